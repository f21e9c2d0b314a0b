#pragma once

#include <span>

namespace hdinf::stats {

double normal_cdf(double x);
/// Lower-tail quantile of N(0, 1); p in (0, 1).
double normal_quantile(double p);
/// Upper r-quantile of chi^2 with m degrees of freedom: P(X > q) = r.
double chi_squared_upper_quantile(int m, double r);

struct KsResult {
    double statistic = 0.0;
    double p_value = 0.0;
};

/// One-sample Kolmogorov-Smirnov test of `sample` against N(0, 1). The
/// p-value uses the asymptotic Kolmogorov distribution with Stephens'
/// small-sample correction.
KsResult ks_test_normal(std::span<const double> sample);

/// P(K > x) for the Kolmogorov distribution.
double kolmogorov_survival(double x);

}  // namespace hdinf::stats
