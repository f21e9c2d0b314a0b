#include "hdinf/inference.hpp"

#include <cmath>

#include "hdinf/error.hpp"
#include "hdinf/stats.hpp"

namespace hdinf {
namespace {

void check_contrast(const DebiasedFit& fit, const Vector& alpha) {
    if (alpha.size() != fit.b_hat.size()) throw DomainError("contrast has the wrong length");
    if (!alpha.allFinite() || !(alpha.norm() > 0.0)) {
        throw DomainError("contrast must be finite and non-zero");
    }
}

void check_level(double level) {
    if (!(level > 0.0 && level < 1.0)) throw DomainError("confidence level must lie in (0, 1)");
}

}  // namespace

bool RegionResult::contains(const Vector& a) const {
    const Vector diff = center - a;
    return diff.dot(shape * diff) <= threshold;
}

double contrast_se(const DebiasedFit& fit, const Vector& alpha) {
    check_contrast(fit, alpha);
    const double q = alpha.dot(fit.variance * alpha);
    if (!(q > 0.0) || !std::isfinite(q)) {
        throw NumericalError("contrast variance is not positive; the interval is degenerate");
    }
    return std::sqrt(q / static_cast<double>(fit.n));
}

CiResult wald_ci(const DebiasedFit& fit, const Vector& alpha, double level) {
    check_level(level);
    CiResult ci;
    ci.se = contrast_se(fit, alpha);
    ci.estimate = alpha.dot(fit.b_hat);
    const double z = stats::normal_quantile(0.5 + 0.5 * level);
    ci.lower = ci.estimate - z * ci.se;
    ci.upper = ci.estimate + z * ci.se;
    ci.level = level;
    ci.alpha = alpha;
    return ci;
}

CiResult wald_ci(const DebiasedFit& fit, Index j, double level) {
    if (j < 0 || j >= fit.b_hat.size()) throw DomainError("coefficient index out of range");
    return wald_ci(fit, Vector::Unit(fit.b_hat.size(), j), level);
}

RegionResult confidence_region(const DebiasedFit& fit, const Matrix& contrasts, double level) {
    check_level(level);
    const Index m = contrasts.rows();
    if (m < 1 || contrasts.cols() != fit.b_hat.size()) {
        throw DomainError("contrast matrix must have p+1 columns and at least one row");
    }
    if (m > fit.b_hat.size()) throw DomainError("more contrast rows than coefficients");
    const Matrix middle = contrasts * fit.variance * contrasts.transpose();
    const Eigen::LLT<Matrix> llt(0.5 * (middle + middle.transpose()));
    if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-14)) {
        throw NumericalError("A V A' is rank deficient; contrast rows must be linearly independent");
    }
    RegionResult region;
    region.center = contrasts * fit.b_hat;
    region.shape = llt.solve(Matrix::Identity(m, m)) * static_cast<double>(fit.n);
    region.shape = 0.5 * (region.shape + region.shape.transpose());
    region.threshold = stats::chi_squared_upper_quantile(static_cast<int>(m), 1.0 - level);
    region.level = level;
    return region;
}

WaldTestResult wald_test(const DebiasedFit& fit, const Vector& alpha, double null_value) {
    const double se = contrast_se(fit, alpha);
    WaldTestResult out;
    out.z = (alpha.dot(fit.b_hat) - null_value) / se;
    out.p_value = std::erfc(std::abs(out.z) / std::sqrt(2.0));
    return out;
}

}  // namespace hdinf
