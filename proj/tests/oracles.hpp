#pragma once

// Reference computations used only by the tests. They deliberately avoid the
// library's solvers (no Cholesky, no coordinate descent) so that agreement is
// evidence rather than tautology.

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Fam { gaussian, logistic, poisson };

inline double mean_fn(Fam f, double a) {
    switch (f) {
    case Fam::gaussian: return a;
    case Fam::logistic: return 1.0 / (1.0 + std::exp(-a));
    case Fam::poisson: return std::exp(a);
    }
    return 0.0;
}

inline double var_fn(Fam f, double a) {
    switch (f) {
    case Fam::gaussian: return 1.0;
    case Fam::logistic: { const double m = 1.0 / (1.0 + std::exp(-a)); return m * (1.0 - m); }
    case Fam::poisson: return std::exp(a);
    }
    return 0.0;
}

/// Gradient of the mean negative log-likelihood.
inline VectorXd gradient(Fam f, const MatrixXd& x, const VectorXd& y, const VectorXd& xi) {
    VectorXd g = VectorXd::Zero(x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double a = 0.0;
        for (Eigen::Index j = 0; j < x.cols(); ++j) a += x(i, j) * xi(j);
        const double r = mean_fn(f, a) - y(i);
        for (Eigen::Index j = 0; j < x.cols(); ++j) g(j) += r * x(i, j);
    }
    return g / static_cast<double>(x.rows());
}

/// Hessian by an explicit triple loop.
inline MatrixXd hessian(Fam f, const MatrixXd& x, const VectorXd& xi) {
    const Eigen::Index k = x.cols();
    MatrixXd h = MatrixXd::Zero(k, k);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double a = 0.0;
        for (Eigen::Index j = 0; j < k; ++j) a += x(i, j) * xi(j);
        const double w = var_fn(f, a);
        for (Eigen::Index r = 0; r < k; ++r)
            for (Eigen::Index c = 0; c < k; ++c) h(r, c) += w * x(i, r) * x(i, c);
    }
    return h / static_cast<double>(x.rows());
}

/// One Newton step xi - H(xi)^{-1} grad(xi), solved with full-pivot LU.
inline VectorXd newton_step(Fam f, const MatrixXd& x, const VectorXd& y, const VectorXd& xi) {
    return xi - hessian(f, x, xi).fullPivLu().solve(gradient(f, x, y, xi));
}

/// Plain Newton iteration to the unpenalized MLE.
inline VectorXd newton_mle(Fam f, const MatrixXd& x, const VectorXd& y, int iters = 100) {
    VectorXd xi = VectorXd::Zero(x.cols());
    for (int it = 0; it < iters; ++it) {
        const VectorXd next = newton_step(f, x, y, xi);
        const double change = (next - xi).cwiseAbs().maxCoeff();
        xi = next;
        if (change < 1e-14) break;
    }
    return xi;
}

/// OLS from the normal equations via full-pivot LU.
inline VectorXd ols(const MatrixXd& x, const VectorXd& y) {
    return (x.transpose() * x).fullPivLu().solve(x.transpose() * y);
}

inline double soft_threshold(double z, double t) {
    return z > t ? z - t : (z < -t ? z + t : 0.0);
}

}  // namespace oracle
