#include "hdinf/lasso.hpp"

#include <algorithm>
#include <cmath>

#include "hdinf/error.hpp"
#include "hdinf/rng.hpp"
#include "parallel.hpp"

namespace hdinf {
namespace {

double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

double mean_loss(const Dataset& d, GlmFamily family, const Vector& eta) {
    double total = 0.0;
    for (Index i = 0; i < d.n(); ++i) total += -d.y(i) * eta(i) + family.b(eta(i));
    return total / static_cast<double>(d.n());
}

double penalty(const Vector& xi, double lambda) {
    return lambda * xi.tail(xi.size() - 1).lpNorm<1>();
}

bool objective_increased(double candidate, double current) {
    return candidate > current + 1e-12 * std::max(1.0, std::abs(current));
}

/// Weighted least-squares lasso on the IRLS quadratic approximation,
///   (1/2n) sum_i w_i (z_i - x_i' xi)^2 + lambda ||beta||_1,
/// solved by cyclic coordinate descent with an active-set inner loop.
/// `resid` holds z - X xi on entry. With few nonzeros the residual is
/// updated directly (O(n) per coordinate); with many, the weighted Gram
/// matrix is formed once per IRLS step and updates cost O(p) instead.
class WeightedCd {
public:
    WeightedCd(const Matrix& x, const LassoOptions& options)
        : x_(x), options_(options), wx_(x.rows(), x.cols()), v_(x.cols()) {}

    void set_weights(const Vector& w) {
        const double n = static_cast<double>(x_.rows());
        wx_ = x_.array().colwise() * w.array();
        for (Index j = 0; j < x_.cols(); ++j) v_(j) = wx_.col(j).dot(x_.col(j)) / n;
        sqrt_w_ = w.cwiseSqrt();
        gram_ready_ = false;
    }

    /// Updates xi in place; `resid` is consumed.
    void solve(Vector& xi, Vector& resid, double lambda) {
        const Index k = x_.cols();
        const Index nonzero = (xi.tail(k - 1).array() != 0.0).count();
        if (4 * nonzero >= k - 1) {
            solve_gram(xi, resid, lambda);
            return;
        }
        std::vector<Index> active;
        int sweeps = 0;
        for (;;) {
            const double full_change = sweep_all(xi, resid, lambda);
            ++sweeps;
            if (full_change < options_.inner_tol || sweeps >= options_.max_sweeps) break;
            active.clear();
            for (Index j = 1; j < k; ++j) {
                if (xi(j) != 0.0) active.push_back(j);
            }
            while (sweeps < options_.max_sweeps) {
                const double change = sweep(xi, resid, lambda, active);
                ++sweeps;
                if (change < options_.inner_tol) break;
            }
        }
    }

private:
    void solve_gram(Vector& xi, const Vector& resid, double lambda) {
        const Index k = x_.cols();
        const double n = static_cast<double>(x_.rows());
        if (!gram_ready_) {
            const Matrix sx = x_.array().colwise() * sqrt_w_.array();
            gram_.setZero(k, k);
            gram_.selfadjointView<Eigen::Lower>().rankUpdate(sx.transpose(), 1.0 / n);
            gram_ = gram_.selfadjointView<Eigen::Lower>();
            gram_ready_ = true;
        }
        // grad = X' W (z - X xi) / n, kept in sync with xi.
        Vector grad = wx_.transpose() * resid / n;
        auto update = [&](Index j) {
            const double diag = v_(j);
            if (!(diag > 0.0)) return 0.0;
            const double old = xi(j);
            const double next = j == 0 ? old + grad(0) / diag
                                       : soft_threshold(grad(j) + diag * old, lambda) / diag;
            if (next == old) return 0.0;
            xi(j) = next;
            grad.noalias() -= (next - old) * gram_.col(j);
            return std::sqrt(diag) * std::abs(next - old);
        };
        std::vector<Index> active;
        int sweeps = 0;
        for (;;) {
            double full_change = 0.0;
            for (Index j = 0; j < k; ++j) full_change = std::max(full_change, update(j));
            ++sweeps;
            if (full_change < options_.inner_tol || sweeps >= options_.max_sweeps) break;
            active.clear();
            active.push_back(0);
            for (Index j = 1; j < k; ++j) {
                if (xi(j) != 0.0) active.push_back(j);
            }
            while (sweeps < options_.max_sweeps) {
                double change = 0.0;
                for (Index j : active) change = std::max(change, update(j));
                ++sweeps;
                if (change < options_.inner_tol) break;
            }
        }
    }

    double update_intercept(Vector& xi, Vector& resid) {
        const double n = static_cast<double>(x_.rows());
        const double delta = wx_.col(0).dot(resid) / n / v_(0);
        if (delta == 0.0) return 0.0;
        xi(0) += delta;
        resid.array() -= delta;
        return std::sqrt(v_(0)) * std::abs(delta);
    }

    double update(Index j, Vector& xi, Vector& resid, double lambda) {
        const double n = static_cast<double>(x_.rows());
        if (!(v_(j) > 0.0)) return 0.0;
        const double old = xi(j);
        const double grad = wx_.col(j).dot(resid) / n;
        const double next = soft_threshold(grad + v_(j) * old, lambda) / v_(j);
        if (next == old) return 0.0;
        xi(j) = next;
        resid.noalias() -= (next - old) * x_.col(j);
        return std::sqrt(v_(j)) * std::abs(next - old);
    }

    double sweep_all(Vector& xi, Vector& resid, double lambda) {
        double change = update_intercept(xi, resid);
        for (Index j = 1; j < x_.cols(); ++j) change = std::max(change, update(j, xi, resid, lambda));
        return change;
    }

    double sweep(Vector& xi, Vector& resid, double lambda, const std::vector<Index>& active) {
        double change = update_intercept(xi, resid);
        for (Index j : active) change = std::max(change, update(j, xi, resid, lambda));
        return change;
    }

    const Matrix& x_;
    const LassoOptions& options_;
    Matrix wx_;
    Vector v_;
    Vector sqrt_w_;
    Matrix gram_;
    bool gram_ready_ = false;
};

LassoFit null_fit(const Dataset& d, GlmFamily family, double lambda, double intercept) {
    LassoFit fit;
    fit.xi_hat = Vector::Zero(d.X.cols());
    fit.xi_hat(0) = intercept;
    fit.lambda = lambda;
    fit.objective = lasso_objective(d, family, fit.xi_hat, lambda);
    fit.objective_trace = {fit.objective};
    fit.kkt_residual = kkt_residual(d, family, fit.xi_hat, lambda);
    fit.converged = true;
    return fit;
}

void check_lambda(double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw DomainError("lambda must be a finite non-negative number");
    }
}

LassoFit fit_impl(const Dataset& d, GlmFamily family, double lambda, Vector xi,
                  const LassoOptions& options) {
    const Index n = d.n();
    LassoFit fit;
    fit.lambda = lambda;

    Vector eta = d.X * xi;
    Vector w(n), resid(n);
    double objective = mean_loss(d, family, eta) + penalty(xi, lambda);
    fit.objective_trace.push_back(objective);

    WeightedCd cd(d.X, options);
    Vector candidate;
    for (int iter = 1; iter <= options.max_outer; ++iter) {
        fit.n_iter = iter;
        for (Index i = 0; i < n; ++i) {
            w(i) = std::max(family.b_ddot(eta(i)), options.weight_floor);
            resid(i) = (d.y(i) - family.b_dot(eta(i))) / w(i);
        }
        cd.set_weights(w);
        candidate = xi;
        cd.solve(candidate, resid, lambda);

        // Step-halving line search on the penalized objective.
        Vector step = candidate - xi;
        Vector eta_step = d.X * step;
        double t = 1.0;
        Vector eta_next = eta + eta_step;
        Vector xi_next = candidate;
        double next = mean_loss(d, family, eta_next) + penalty(xi_next, lambda);
        int halvings = 0;
        while (objective_increased(next, objective)) {
            if (halvings == options.max_backtracks) {
                if (step.lpNorm<Eigen::Infinity>() < options.outer_tol) break;
                throw ConvergenceError("IRLS diverged: objective kept increasing after " +
                                           std::to_string(halvings) + " step halvings",
                                       xi);
            }
            t *= 0.5;
            ++halvings;
            xi_next = xi + t * step;
            eta_next = eta + t * eta_step;
            next = mean_loss(d, family, eta_next) + penalty(xi_next, lambda);
        }
        if (objective_increased(next, objective)) {
            // Only reachable for a negligible step; keep the current iterate.
            xi_next = xi;
            eta_next = eta;
            next = objective;
        }

        const double change = (xi_next - xi).lpNorm<Eigen::Infinity>();
        xi = std::move(xi_next);
        eta = std::move(eta_next);
        objective = next;
        fit.objective_trace.push_back(objective);

        if (change < options.outer_tol) {
            fit.kkt_residual = kkt_residual(d, family, xi, lambda);
            if (fit.kkt_residual <= options.kkt_tol) {
                fit.converged = true;
                break;
            }
        }
    }
    if (!fit.converged) fit.kkt_residual = kkt_residual(d, family, xi, lambda);
    fit.xi_hat = std::move(xi);
    fit.objective = objective;
    return fit;
}

Vector start_point(const Dataset& d, GlmFamily family) {
    Vector xi = Vector::Zero(d.X.cols());
    try {
        xi(0) = null_intercept(d, family);
    } catch (const DataError&) {
        // Degenerate response; start from zero and let the solver saturate.
    }
    return xi;
}

}  // namespace

double lasso_objective(const Dataset& d, GlmFamily family, const Vector& xi, double lambda) {
    const Vector eta = d.X * xi;
    return mean_loss(d, family, eta) + penalty(xi, lambda);
}

Vector score(const Dataset& d, GlmFamily family, const Vector& xi) {
    const Vector eta = d.X * xi;
    Vector r(d.n());
    for (Index i = 0; i < d.n(); ++i) r(i) = family.b_dot(eta(i)) - d.y(i);
    return d.X.transpose() * r / static_cast<double>(d.n());
}

double kkt_residual(const Dataset& d, GlmFamily family, const Vector& xi, double lambda) {
    const Vector g = score(d, family, xi);
    double worst = std::abs(g(0));
    for (Index j = 1; j < g.size(); ++j) {
        const double v = xi(j) != 0.0 ? std::abs(g(j) + lambda * (xi(j) > 0.0 ? 1.0 : -1.0))
                                      : std::max(0.0, std::abs(g(j)) - lambda);
        worst = std::max(worst, v);
    }
    return worst;
}

double null_intercept(const Dataset& d, GlmFamily family) {
    return family.link(d.y.mean());
}

double lambda_max(const Dataset& d, GlmFamily family) {
    validate_response(d, family);
    const double mu = family.b_dot(null_intercept(d, family));
    const Vector r = d.y.array() - mu;
    const Vector g = d.X.rightCols(d.p()).transpose() * r;
    return g.lpNorm<Eigen::Infinity>() / static_cast<double>(d.n());
}

std::vector<double> lambda_path(double lmax, int n_lambda, double ratio) {
    if (n_lambda < 2) throw DomainError("lambda path needs at least 2 values");
    if (!(ratio > 0.0 && ratio < 1.0)) throw DomainError("lambda path ratio must lie in (0, 1)");
    if (!(lmax > 0.0) || !std::isfinite(lmax)) throw DomainError("lambda_max must be positive");
    std::vector<double> grid(static_cast<std::size_t>(n_lambda));
    const double log_step = std::log(ratio) / (n_lambda - 1);
    for (int k = 0; k < n_lambda; ++k) grid[static_cast<std::size_t>(k)] = lmax * std::exp(log_step * k);
    grid.back() = lmax * ratio;
    return grid;
}

LassoFit fit_lasso(const Dataset& d, GlmFamily family, double lambda,
                   const std::optional<Vector>& warm, const LassoOptions& options) {
    check_lambda(lambda);
    validate_response(d, family);
    if (warm && warm->size() != d.X.cols()) {
        throw DomainError("warm start has the wrong length");
    }
    if (lambda > 0.0) {
        const double lmax = lambda_max(d, family);
        if (lambda >= lmax) return null_fit(d, family, lambda, null_intercept(d, family));
    }
    return fit_impl(d, family, lambda, warm ? *warm : start_point(d, family), options);
}

std::vector<LassoFit> fit_lasso_path(const Dataset& d, GlmFamily family,
                                     std::span<const double> grid, const LassoOptions& options) {
    validate_response(d, family);
    std::vector<LassoFit> fits;
    fits.reserve(grid.size());
    std::optional<double> lmax;
    std::optional<double> intercept;
    try {
        intercept = null_intercept(d, family);
        lmax = lambda_max(d, family);
    } catch (const DataError&) {
    }
    Vector xi = start_point(d, family);
    for (double lambda : grid) {
        check_lambda(lambda);
        if (lmax && lambda > 0.0 && lambda >= *lmax) {
            fits.push_back(null_fit(d, family, lambda, *intercept));
        } else {
            fits.push_back(fit_impl(d, family, lambda, xi, options));
        }
        xi = fits.back().xi_hat;
    }
    return fits;
}

std::vector<int> make_folds(const Vector& y, GlmFamily family, int n_folds, std::uint64_t seed,
                            std::uint64_t scenario, std::uint64_t replicate) {
    if (n_folds < 2) throw DomainError("need at least 2 folds");
    const auto n = static_cast<std::size_t>(y.size());
    rng::Stream stream(seed, rng::Purpose::lasso_folds, scenario, replicate);

    std::vector<std::vector<std::size_t>> strata;
    if (family.kind() == FamilyKind::binomial) {
        strata.resize(2);
        for (std::size_t i = 0; i < n; ++i) strata[y(static_cast<Index>(i)) == 1.0 ? 1 : 0].push_back(i);
        for (const auto& s : strata) {
            if (s.size() < static_cast<std::size_t>(n_folds)) {
                throw DataError("binomial class with " + std::to_string(s.size()) +
                                " observations cannot be stratified into " +
                                std::to_string(n_folds) + " folds");
            }
        }
    } else {
        if (n < static_cast<std::size_t>(n_folds)) throw DataError("fewer observations than folds");
        strata.emplace_back(n);
        for (std::size_t i = 0; i < n; ++i) strata[0][i] = i;
    }

    std::vector<int> folds(n, 0);
    for (const auto& members : strata) {
        const auto blocks = block_folds(members.size(), n_folds, stream);
        for (std::size_t pos = 0; pos < members.size(); ++pos) folds[members[pos]] = blocks[pos];
    }
    return folds;
}

std::vector<int> block_folds(std::size_t n, int n_folds, rng::Stream& stream) {
    const auto perm = rng::permutation(n, stream);
    std::vector<int> folds(n);
    for (std::size_t pos = 0; pos < n; ++pos) {
        folds[perm[pos]] = static_cast<int>(pos * static_cast<std::size_t>(n_folds) / n);
    }
    return folds;
}

Dataset subset_rows(const Dataset& d, std::span<const Index> rows) {
    Dataset out;
    out.y.resize(static_cast<Index>(rows.size()));
    out.X.resize(static_cast<Index>(rows.size()), d.X.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out.y(static_cast<Index>(r)) = d.y(rows[r]);
        out.X.row(static_cast<Index>(r)) = d.X.row(rows[r]);
    }
    out.col_names = d.col_names;
    out.standardization = d.standardization;
    out.standardized = d.standardized;
    return out;
}

CvResult cross_validate(const Dataset& d, GlmFamily family, std::span<const int> folds,
                        std::span<const double> grid, const LassoOptions& options, int workers) {
    if (grid.empty()) throw DomainError("lambda grid is empty");
    if (static_cast<Index>(folds.size()) != d.n()) throw DomainError("fold vector has the wrong length");
    for (std::size_t k = 1; k < grid.size(); ++k) {
        if (grid[k] > grid[k - 1]) throw DomainError("lambda grid must be descending");
    }
    validate_response(d, family);
    const int n_folds = *std::max_element(folds.begin(), folds.end()) + 1;
    if (n_folds < 2 || *std::min_element(folds.begin(), folds.end()) < 0) {
        throw DomainError("fold labels must cover 0..K-1 with K >= 2");
    }

    // deviance[fold][lambda]
    std::vector<std::vector<double>> deviance(static_cast<std::size_t>(n_folds));
    auto run_fold = [&](int k) {
        std::vector<Index> train, test;
        for (Index i = 0; i < d.n(); ++i) (folds[static_cast<std::size_t>(i)] == k ? test : train).push_back(i);
        if (test.empty()) throw DomainError("fold " + std::to_string(k) + " is empty");
        const Dataset train_set = subset_rows(d, train);
        const Dataset test_set = subset_rows(d, test);
        if (family.kind() == FamilyKind::binomial) {
            const double m = train_set.y.mean();
            if (m == 0.0 || m == 1.0) {
                throw DataError("training fold " + std::to_string(k) + " has a single response class");
            }
        }
        const auto fits = fit_lasso_path(train_set, family, grid, options);
        auto& out = deviance[static_cast<std::size_t>(k)];
        out.resize(grid.size());
        for (std::size_t l = 0; l < grid.size(); ++l) {
            const Vector eta = test_set.X * fits[l].xi_hat;
            out[l] = mean_loss(test_set, family, eta);
        }
    };

    detail::parallel_for(static_cast<std::size_t>(n_folds), workers,
                         [&](std::size_t k) { run_fold(static_cast<int>(k)); });

    CvResult result;
    result.lambda_grid.assign(grid.begin(), grid.end());
    result.fold_assignment.assign(folds.begin(), folds.end());
    result.mean_deviance.resize(grid.size());
    result.se_deviance.resize(grid.size());
    const double kf = n_folds;
    std::size_t best = 0;
    for (std::size_t l = 0; l < grid.size(); ++l) {
        double sum = 0.0;
        for (int k = 0; k < n_folds; ++k) sum += deviance[static_cast<std::size_t>(k)][l];
        const double mean = sum / kf;
        double ss = 0.0;
        for (int k = 0; k < n_folds; ++k) {
            const double dv = deviance[static_cast<std::size_t>(k)][l] - mean;
            ss += dv * dv;
        }
        result.mean_deviance[l] = mean;
        result.se_deviance[l] = std::sqrt(ss / (kf - 1.0) / kf);
        // Strict comparison keeps the larger lambda on ties.
        if (mean < result.mean_deviance[best]) best = l;
    }
    result.lambda_min = grid[best];
    return result;
}

CvResult cross_validate(const Dataset& d, GlmFamily family, int n_folds,
                        std::span<const double> grid, std::uint64_t seed,
                        const LassoOptions& options, int workers) {
    const auto folds = make_folds(d.y, family, n_folds, seed);
    return cross_validate(d, family, folds, grid, options, workers);
}

}  // namespace hdinf
