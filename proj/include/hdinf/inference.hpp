#pragma once

#include "hdinf/debias.hpp"
#include "hdinf/types.hpp"

namespace hdinf {

/// Wald interval for the linear combination alpha' xi.
struct CiResult {
    double estimate = 0.0;
    double se = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double level = 0.0;
    Vector alpha;
};

/// Ellipsoid { a : (center - a)' shape (center - a) <= threshold } with
/// shape = n (A V A')^{-1}.
struct RegionResult {
    Vector center;
    Matrix shape;
    double threshold = 0.0;
    double level = 0.0;

    bool contains(const Vector& a) const;
};

struct WaldTestResult {
    double z = 0.0;
    double p_value = 1.0;
};

/// Standard error of alpha' b_hat: sqrt(alpha' V alpha / n).
double contrast_se(const DebiasedFit& fit, const Vector& alpha);

CiResult wald_ci(const DebiasedFit& fit, const Vector& alpha, double level);
/// Shorthand for alpha = e_j.
CiResult wald_ci(const DebiasedFit& fit, Index j, double level);

RegionResult confidence_region(const DebiasedFit& fit, const Matrix& contrasts, double level);

/// Two-sided test of alpha' xi = null_value.
WaldTestResult wald_test(const DebiasedFit& fit, const Vector& alpha, double null_value);

}  // namespace hdinf
