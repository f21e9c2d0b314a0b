#include "hdinf/stats.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "hdinf/error.hpp"

namespace hdinf::stats {

double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("normal quantile needs p in (0, 1)");
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double chi_squared_upper_quantile(int m, double r) {
    if (m < 1) throw DomainError("chi-squared degrees of freedom must be positive");
    if (!(r > 0.0 && r < 1.0)) throw DomainError("chi-squared tail probability must lie in (0, 1)");
    const boost::math::chi_squared_distribution<double> dist(m);
    return boost::math::quantile(boost::math::complement(dist, r));
}

double kolmogorov_survival(double x) {
    if (x <= 0.0) return 1.0;
    if (x < 1.18) {
        // Jacobi-theta form converges fast for small x.
        const double y = std::exp(-M_PI * M_PI / (8.0 * x * x));
        double sum = 0.0;
        for (int k = 1; k < 50; k += 2) sum += std::pow(y, k * k);
        return 1.0 - std::sqrt(2.0 * M_PI) / x * sum;
    }
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * x * x);
        sum += (k % 2 == 1 ? term : -term);
        if (term < 1e-17) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_test_normal(std::span<const double> sample) {
    if (sample.empty()) throw DomainError("KS test needs a non-empty sample");
    std::vector<double> x(sample.begin(), sample.end());
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = normal_cdf(x[i]);
        d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
    }
    const double sqrt_n = std::sqrt(n);
    return {d, kolmogorov_survival((sqrt_n + 0.12 + 0.11 / sqrt_n) * d)};
}

}  // namespace hdinf::stats
