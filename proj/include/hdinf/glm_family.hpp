#pragma once

#include <string>
#include <string_view>

namespace hdinf {

enum class FamilyKind { gaussian, binomial, poisson };

/// Linear predictors are clamped to this range inside b, b' and b'' for the
/// binomial and poisson families.
inline constexpr double kLinearPredictorClamp = 30.0;

/// Canonical-link exponential family. The loss is rho(y, a) = -y*a + b(a).
class GlmFamily {
public:
    constexpr explicit GlmFamily(FamilyKind kind = FamilyKind::gaussian) : kind_(kind) {}

    constexpr FamilyKind kind() const noexcept { return kind_; }

    // Unchecked kernels; callers guarantee finite arguments.
    double b(double a) const noexcept;
    double b_dot(double a) const noexcept;
    double b_ddot(double a) const noexcept;

    /// Inverse of b_dot: the natural parameter whose mean is `mean`.
    /// Used for intercept-only fits.
    double link(double mean) const;

    std::string_view name() const noexcept;

    friend constexpr bool operator==(GlmFamily, GlmFamily) = default;

private:
    FamilyKind kind_;
};

inline constexpr GlmFamily gaussian_family{FamilyKind::gaussian};
inline constexpr GlmFamily binomial_family{FamilyKind::binomial};
inline constexpr GlmFamily poisson_family{FamilyKind::poisson};

/// Parses "gaussian", "binomial" or "poisson". Throws DomainError otherwise.
GlmFamily parse_family(std::string_view name);

/// rho(y, a) = -y*a + b(a). Throws DomainError on non-finite input.
double loss(GlmFamily family, double y, double a);

/// d rho / d a = -y + b'(a).
double dloss(GlmFamily family, double y, double a);

/// d^2 rho / d a^2 = b''(a); free of y for canonical links.
double d2loss(GlmFamily family, double a);

}  // namespace hdinf
