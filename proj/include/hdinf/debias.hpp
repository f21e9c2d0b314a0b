#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "hdinf/data.hpp"
#include "hdinf/glm_family.hpp"
#include "hdinf/lasso.hpp"
#include "hdinf/types.hpp"

namespace hdinf {

/// Sample Hessian of the empirical loss at xi,
///   sigma_hat = X^T W^2 X / n,  W = diag(omega),  omega_i = sqrt(rho''(y_i, x_i' xi)).
struct HessianModel {
    Matrix sigma_hat;
    Vector weights;
    /// Lower Cholesky factor; empty (0 x 0) when sigma_hat is not positive definite.
    Matrix chol;
    /// Estimated 1-norm condition number (infinite without a factor).
    double condition_estimate = 0.0;
    Vector xi_at;

    bool has_chol() const noexcept { return chol.size() > 0; }
};

/// Condition estimates above this make invert_hessian fail.
inline constexpr double kMaxHessianCondition = 1e12;

HessianModel hessian(const Dataset& d, GlmFamily family, const Vector& xi);

/// Wraps a given symmetric matrix (e.g. a Gram matrix) as a HessianModel.
HessianModel hessian_from_matrix(const Matrix& sigma);

/// Attempts the Cholesky factorization of h.sigma_hat and records the
/// condition estimate; clears the factor when the matrix is not PD.
void factorize(HessianModel& h);

/// Theta_hat = sigma_hat^{-1} by triangular solves against the Cholesky factor,
/// symmetrized on return. Throws SingularHessianError.
Matrix invert_hessian(const HessianModel& h);

enum class DebiasMethod { ref, orig, qp };

struct DebiasedFit {
    Vector b_hat;
    /// The matrix M in b_hat = xi_hat - M * score(xi_hat).
    Matrix theta_hat;
    /// Asymptotic covariance of sqrt(n) * (b_hat - xi0): Theta_hat for REF-DS,
    /// the sandwich M Sigma_hat M^T otherwise.
    Matrix variance;
    DebiasMethod method = DebiasMethod::ref;
    double mu = 0.0;
    Index n = 0;
    Vector xi_init;
    double lambda = 0.0;
    double condition_estimate = 0.0;

    /// "REF-DS", "ORIG-DS" or "QP(<mu>)".
    std::string method_tag() const;
};

/// b_hat = xi_hat - Theta_hat * score(xi_hat) with the exact inverse Hessian.
DebiasedFit refine_debias(const Dataset& d, GlmFamily family, const LassoFit& fit);

struct QpOptions {
    int max_iter = 50000;  ///< coordinate sweeps
    double tol = 1e-8;     ///< KKT tolerance of the penalized form
};

/// Row j of M from  min { z' S z : ||S z - e_j||_inf <= mu }.
///
/// The equivalent Lagrangian form  min 1/2 z' S z - z_j + mu ||z||_1  is
/// solved by cyclic coordinate descent; its optimality conditions are exactly
/// the infinity-norm constraint. mu = 0 needs a positive definite S and yields
/// row j of S^{-1} to within `tol`. Throws ConvergenceError with the last
/// iterate.
Vector qp_debias(const HessianModel& h, Index j, double mu, const QpOptions& options = {});

/// All rows of qp_debias stacked into M.
Matrix qp_theta(const HessianModel& h, double mu, const QpOptions& options = {});

/// b_hat = xi_hat - M score(xi_hat) with M from qp_theta. mu = 0 reproduces
/// refine_debias exactly.
DebiasedFit qp_debias_fit(const Dataset& d, GlmFamily family, const LassoFit& fit, double mu,
                          const QpOptions& options = {});

struct NodewiseOptions {
    int n_folds = 5;
    int n_lambda = 100;
    double ratio = 1e-3;
    double tol = 1e-10;
    /// Looser tolerance for the path fits that only score CV candidates.
    double cv_tol = 1e-6;
    int max_sweeps = 10000;
    int workers = 1;  ///< threads over columns; the result does not depend on it
};

struct NodewiseResult {
    Matrix theta;
    Vector lambdas;  ///< per-column penalty
    Vector tau2;
};

/// Node-wise lasso on a Gram matrix with fixed per-column penalties: column
/// j is regressed on the others, gamma_j = argmin 1/2 g'S_{-j,-j}g - S_{-j,j}'g
/// + lambda_j ||g||_1, tau_j^2 = S_jj - S_{j,-j} gamma_j, and row j of Theta is
/// (e_j - gamma_j) / tau_j^2.
NodewiseResult nodewise_from_gram(const Matrix& gram, std::span<const double> lambdas,
                                  const NodewiseOptions& options = {});

/// Node-wise Theta_tilde on the weighted design W X at the lasso estimate, with
/// each lambda_j chosen by K-fold CV on held-out squared error.
NodewiseResult nodewise_theta(const Dataset& d, GlmFamily family, const LassoFit& fit,
                              std::uint64_t seed, const NodewiseOptions& options = {},
                              std::uint64_t scenario = 0, std::uint64_t replicate = 0);

/// b_hat = xi_hat - Theta_tilde * score(xi_hat); sandwich variance.
DebiasedFit orig_debias(const Dataset& d, GlmFamily family, const LassoFit& fit,
                        const Matrix& theta_tilde);

/// Moves b_hat and variance to the original covariate scale.
DebiasedFit to_original_scale(const DebiasedFit& fit, const CoefMap& map);

}  // namespace hdinf
