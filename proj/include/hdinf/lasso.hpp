#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hdinf/data.hpp"
#include "hdinf/glm_family.hpp"
#include "hdinf/rng.hpp"
#include "hdinf/types.hpp"

namespace hdinf {

struct LassoOptions {
    double outer_tol = 1e-8;     ///< max coefficient change between IRLS steps
    int max_outer = 100;
    double inner_tol = 1e-10;    ///< coordinate descent, on sqrt(v_j) * |change|
    int max_sweeps = 10000;
    int max_backtracks = 20;     ///< step halvings before declaring divergence
    double weight_floor = 1e-10;
    double kkt_tol = 1e-7;
};

/// Solution of min_xi  P_n rho_xi + lambda * ||beta||_1 (intercept unpenalized).
struct LassoFit {
    Vector xi_hat;
    double lambda = 0.0;
    int n_iter = 0;
    double kkt_residual = 0.0;
    bool converged = false;
    double objective = 0.0;
    /// Penalized objective after every accepted IRLS step, starting with the
    /// initial point.
    std::vector<double> objective_trace;
};

struct CvResult {
    std::vector<double> lambda_grid;
    std::vector<double> mean_deviance;
    std::vector<double> se_deviance;
    double lambda_min = 0.0;
    std::vector<int> fold_assignment;
};

/// Penalized objective P_n rho + lambda * sum_{j>=1} |xi_j|.
double lasso_objective(const Dataset& d, GlmFamily family, const Vector& xi, double lambda);

/// Score P_n rho_dot at xi: X^T (b'(X xi) - y) / n.
Vector score(const Dataset& d, GlmFamily family, const Vector& xi);

/// Largest KKT violation of xi as a solution at `lambda`.
double kkt_residual(const Dataset& d, GlmFamily family, const Vector& xi, double lambda);

/// Intercept-only maximum likelihood coefficient.
double null_intercept(const Dataset& d, GlmFamily family);

/// Smallest lambda at which every penalized coefficient is zero.
double lambda_max(const Dataset& d, GlmFamily family);

/// Geometric grid from lmax down to ratio * lmax.
std::vector<double> lambda_path(double lmax, int n_lambda, double ratio);

LassoFit fit_lasso(const Dataset& d, GlmFamily family, double lambda,
                   const std::optional<Vector>& warm = std::nullopt,
                   const LassoOptions& options = {});

/// Fits a descending grid with warm starts. Entry k corresponds to grid[k].
std::vector<LassoFit> fit_lasso_path(const Dataset& d, GlmFamily family,
                                     std::span<const double> grid,
                                     const LassoOptions& options = {});

/// Seeded fold labels in [0, n_folds). Each fold is a contiguous block of a
/// permutation; binomial responses are permuted and split per class so every
/// fold sees both classes.
std::vector<int> make_folds(const Vector& y, GlmFamily family, int n_folds, std::uint64_t seed,
                            std::uint64_t scenario = 0, std::uint64_t replicate = 0);

/// Permutes 0..n-1 with `stream` and cuts the permutation into n_folds
/// contiguous blocks. Entry i is the fold of element i.
std::vector<int> block_folds(std::size_t n, int n_folds, rng::Stream& stream);

/// K-fold CV over a descending grid using given fold labels. Folds are fitted
/// by up to `workers` threads; results do not depend on the thread count.
CvResult cross_validate(const Dataset& d, GlmFamily family, std::span<const int> folds,
                        std::span<const double> grid, const LassoOptions& options = {},
                        int workers = 1);

CvResult cross_validate(const Dataset& d, GlmFamily family, int n_folds,
                        std::span<const double> grid, std::uint64_t seed,
                        const LassoOptions& options = {}, int workers = 1);

/// Rows of `d` selected by `rows`. The result is not re-validated: a subset
/// may legitimately contain a constant column.
Dataset subset_rows(const Dataset& d, std::span<const Index> rows);

}  // namespace hdinf
