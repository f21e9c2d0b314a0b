#include "hdinf/glm_family.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hdinf/error.hpp"

namespace hdinf {
namespace {

double clamp_eta(double a) {
    return std::clamp(a, -kLinearPredictorClamp, kLinearPredictorClamp);
}

void require_finite(double v, const char* name) {
    if (!std::isfinite(v)) {
        throw DomainError(std::string("non-finite argument '") + name + "'");
    }
}

}  // namespace

double GlmFamily::b(double a) const noexcept {
    switch (kind_) {
    case FamilyKind::gaussian:
        return 0.5 * a * a;
    case FamilyKind::binomial:
        a = clamp_eta(a);
        return a <= 0.0 ? std::log1p(std::exp(a)) : a + std::log1p(std::exp(-a));
    case FamilyKind::poisson:
        return std::exp(clamp_eta(a));
    }
    return 0.0;
}

double GlmFamily::b_dot(double a) const noexcept {
    switch (kind_) {
    case FamilyKind::gaussian:
        return a;
    case FamilyKind::binomial: {
        a = clamp_eta(a);
        if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
        const double e = std::exp(a);
        return e / (1.0 + e);
    }
    case FamilyKind::poisson:
        return std::exp(clamp_eta(a));
    }
    return 0.0;
}

double GlmFamily::b_ddot(double a) const noexcept {
    switch (kind_) {
    case FamilyKind::gaussian:
        return 1.0;
    case FamilyKind::binomial: {
        // e^{-|a|} / (1 + e^{-|a|})^2 is symmetric and never cancels.
        const double e = std::exp(-std::abs(clamp_eta(a)));
        return e / ((1.0 + e) * (1.0 + e));
    }
    case FamilyKind::poisson:
        return std::exp(clamp_eta(a));
    }
    return 0.0;
}

double GlmFamily::link(double mean) const {
    switch (kind_) {
    case FamilyKind::gaussian:
        return mean;
    case FamilyKind::binomial:
        if (!(mean > 0.0 && mean < 1.0)) {
            throw DataError("degenerate binomial response: all observations in one class");
        }
        return std::log(mean / (1.0 - mean));
    case FamilyKind::poisson:
        if (!(mean > 0.0)) {
            throw DataError("degenerate poisson response: all counts are zero");
        }
        return std::log(mean);
    }
    return mean;
}

std::string_view GlmFamily::name() const noexcept {
    switch (kind_) {
    case FamilyKind::gaussian:
        return "gaussian";
    case FamilyKind::binomial:
        return "binomial";
    case FamilyKind::poisson:
        return "poisson";
    }
    return "unknown";
}

GlmFamily parse_family(std::string_view name) {
    if (name == "gaussian") return gaussian_family;
    if (name == "binomial") return binomial_family;
    if (name == "poisson") return poisson_family;
    throw DomainError("unknown family '" + std::string(name) +
                      "' (expected gaussian, binomial or poisson)");
}

double loss(GlmFamily family, double y, double a) {
    require_finite(y, "y");
    require_finite(a, "a");
    return -y * a + family.b(a);
}

double dloss(GlmFamily family, double y, double a) {
    require_finite(y, "y");
    require_finite(a, "a");
    return -y + family.b_dot(a);
}

double d2loss(GlmFamily family, double a) {
    require_finite(a, "a");
    return family.b_ddot(a);
}

}  // namespace hdinf
