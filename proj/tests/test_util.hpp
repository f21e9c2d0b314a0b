#pragma once

#include <cmath>
#include <random>

#include "hdinf/data.hpp"
#include "hdinf/glm_family.hpp"

namespace testutil {

using hdinf::Matrix;
using hdinf::Vector;

inline Matrix random_matrix(Eigen::Index n, Eigen::Index p, std::mt19937_64& gen) {
    std::normal_distribution<double> norm;
    Matrix x(n, p);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < p; ++j) x(i, j) = norm(gen);
    return x;
}

/// Random GLM instance with a few moderate signals; the response is drawn
/// with std:: distributions, independent of the library's generator.
inline hdinf::Dataset random_dataset(Eigen::Index n, Eigen::Index p, hdinf::GlmFamily family,
                                     std::uint64_t seed, double signal = 0.5) {
    std::mt19937_64 gen(seed);
    const Matrix x = random_matrix(n, p, gen);
    Vector beta = Vector::Zero(p);
    for (Eigen::Index j = 0; j < std::min<Eigen::Index>(p, 3); ++j) beta(j) = signal * (j % 2 ? -1.0 : 1.0);
    const Vector eta = (x * beta).array() + 0.2;
    Vector y(n);
    std::normal_distribution<double> norm;
    std::uniform_real_distribution<double> unif;
    for (Eigen::Index i = 0; i < n; ++i) {
        switch (family.kind()) {
        case hdinf::FamilyKind::gaussian:
            y(i) = eta(i) + norm(gen);
            break;
        case hdinf::FamilyKind::binomial:
            y(i) = unif(gen) < 1.0 / (1.0 + std::exp(-eta(i))) ? 1.0 : 0.0;
            break;
        case hdinf::FamilyKind::poisson:
            y(i) = static_cast<double>(std::poisson_distribution<int>(std::exp(eta(i)))(gen));
            break;
        }
    }
    return hdinf::make_dataset(y, x);
}

inline hdinf::Dataset random_standardized(Eigen::Index n, Eigen::Index p, hdinf::GlmFamily family,
                                          std::uint64_t seed, double signal = 0.5) {
    return hdinf::standardize(random_dataset(n, p, family, seed, signal)).first;
}

}  // namespace testutil
