#include "hdinf/debias.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "hdinf/error.hpp"
#include "hdinf/rng.hpp"
#include "parallel.hpp"

namespace hdinf {
namespace {

void require_converged(const LassoFit& fit) {
    if (!fit.converged) {
        throw ConvergenceError("initial lasso fit did not converge", fit.xi_hat);
    }
}

double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

/// Covariance-mode coordinate descent for
///   min_g 1/2 g' G g - c' g + lambda ||g||_1,  with g_skip pinned at 0.
/// `grad` holds c - G g and is kept in sync.
class GramLasso {
public:
    GramLasso(const Matrix& gram, Index skip, double tol, int max_sweeps)
        : g_(gram), skip_(skip), tol_(tol), max_sweeps_(max_sweeps) {}

    /// Returns false when the sweep cap is hit.
    bool solve(Vector& coef, Vector& grad, double lambda) const {
        const Index k = g_.rows();
        std::vector<Index> active;
        int sweeps = 0;
        for (;;) {
            double change = 0.0;
            for (Index j = 0; j < k; ++j) change = std::max(change, update(j, coef, grad, lambda));
            if (++sweeps >= max_sweeps_) return change < tol_;
            if (change < tol_) return true;
            active.clear();
            for (Index j = 0; j < k; ++j) {
                if (coef(j) != 0.0) active.push_back(j);
            }
            for (;;) {
                double inner = 0.0;
                for (Index j : active) inner = std::max(inner, update(j, coef, grad, lambda));
                if (++sweeps >= max_sweeps_) return false;
                if (inner < tol_) break;
            }
        }
    }

private:
    double update(Index j, Vector& coef, Vector& grad, double lambda) const {
        if (j == skip_) return 0.0;
        const double diag = g_(j, j);
        if (!(diag > 0.0)) return 0.0;
        const double old = coef(j);
        const double next = soft_threshold(grad(j) + diag * old, lambda) / diag;
        if (next == old) return 0.0;
        coef(j) = next;
        grad.noalias() -= (next - old) * g_.col(j);
        return std::sqrt(diag) * std::abs(next - old);
    }

    const Matrix& g_;
    Index skip_;
    double tol_;
    int max_sweeps_;
};

/// Node-wise regression of column j at one penalty, warm-started from coef.
void nodewise_column(const GramLasso& solver, Index j, double lambda, Vector& coef, Vector& grad,
                     const NodewiseOptions& options) {
    if (!solver.solve(coef, grad, lambda)) {
        throw ConvergenceError("node-wise lasso for column " + std::to_string(j) +
                                   " hit the sweep cap of " + std::to_string(options.max_sweeps),
                               coef);
    }
}

double column_lambda_max(const Matrix& gram, Index j) {
    double m = 0.0;
    for (Index k = 0; k < gram.rows(); ++k) {
        if (k != j) m = std::max(m, std::abs(gram(k, j)));
    }
    return m;
}

}  // namespace

std::string DebiasedFit::method_tag() const {
    switch (method) {
    case DebiasMethod::ref:
        return "REF-DS";
    case DebiasMethod::orig:
        return "ORIG-DS";
    case DebiasMethod::qp: {
        std::ostringstream os;
        os << "QP(" << mu << ")";
        return os.str();
    }
    }
    return "unknown";
}

HessianModel hessian(const Dataset& d, GlmFamily family, const Vector& xi) {
    if (xi.size() != d.X.cols()) throw DomainError("coefficient vector has the wrong length");
    if (!xi.allFinite()) throw DomainError("coefficient vector is not finite");
    HessianModel h;
    h.xi_at = xi;
    const Vector eta = d.X * xi;
    h.weights.resize(d.n());
    for (Index i = 0; i < d.n(); ++i) h.weights(i) = std::sqrt(family.b_ddot(eta(i)));
    const Matrix xw = d.X.array().colwise() * h.weights.array();
    h.sigma_hat = Matrix::Zero(d.X.cols(), d.X.cols());
    h.sigma_hat.selfadjointView<Eigen::Lower>().rankUpdate(xw.transpose(), 1.0 / static_cast<double>(d.n()));
    h.sigma_hat = h.sigma_hat.selfadjointView<Eigen::Lower>();
    factorize(h);
    return h;
}

HessianModel hessian_from_matrix(const Matrix& sigma) {
    if (sigma.rows() != sigma.cols()) throw DomainError("Hessian must be square");
    if (!sigma.allFinite()) throw DomainError("Hessian is not finite");
    HessianModel h;
    h.sigma_hat = 0.5 * (sigma + sigma.transpose());
    factorize(h);
    return h;
}

void factorize(HessianModel& h) {
    Eigen::LLT<Matrix> llt(h.sigma_hat);
    if (llt.info() == Eigen::Success) {
        h.chol = llt.matrixL();
        const double rcond = llt.rcond();
        h.condition_estimate = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
    } else {
        h.chol.resize(0, 0);
        h.condition_estimate = std::numeric_limits<double>::infinity();
    }
}

Matrix invert_hessian(const HessianModel& h) {
    if (!h.has_chol() || !(h.condition_estimate <= kMaxHessianCondition)) {
        std::ostringstream os;
        os << "Hessian is singular or ill-conditioned (condition estimate " << h.condition_estimate
           << "); reduce the number of covariates or check for separation";
        throw SingularHessianError(os.str());
    }
    const Index k = h.chol.rows();
    const Matrix l_inv = h.chol.triangularView<Eigen::Lower>().solve(Matrix::Identity(k, k));
    Matrix theta = l_inv.transpose() * l_inv;
    return 0.5 * (theta + theta.transpose());
}

DebiasedFit refine_debias(const Dataset& d, GlmFamily family, const LassoFit& fit) {
    require_converged(fit);
    const HessianModel h = hessian(d, family, fit.xi_hat);
    DebiasedFit out;
    out.theta_hat = invert_hessian(h);
    out.b_hat = fit.xi_hat - out.theta_hat * score(d, family, fit.xi_hat);
    out.variance = out.theta_hat;
    out.method = DebiasMethod::ref;
    out.n = d.n();
    out.xi_init = fit.xi_hat;
    out.lambda = fit.lambda;
    out.condition_estimate = h.condition_estimate;
    return out;
}

Vector qp_debias(const HessianModel& h, Index j, double mu, const QpOptions& options) {
    const Matrix& s = h.sigma_hat;
    const Index k = s.rows();
    if (j < 0 || j >= k) throw DomainError("row index out of range");
    if (!(mu >= 0.0) || !std::isfinite(mu)) throw DomainError("mu must be a finite non-negative number");

    // At mu = 0 the solution is the inverse row; a residual r moves it by at
    // most ||S^-1|| ||r||, so the stopping rule is tightened by that norm.
    double tol = options.tol;
    if (mu == 0.0) {
        if (!h.has_chol()) throw SingularHessianError("mu = 0 requires a positive definite Hessian");
        const double inverse_norm = h.condition_estimate / s.cwiseAbs().colwise().sum().maxCoeff();
        tol /= std::max(1.0, inverse_norm);
    }

    // grad = e_j - S z; KKT: |grad_i| <= mu, with equality (and matching sign)
    // wherever z_i != 0.
    Vector z = Vector::Zero(k);
    Vector grad = Vector::Unit(k, j);
    for (int sweep = 0; sweep < options.max_iter; ++sweep) {
        for (Index i = 0; i < k; ++i) {
            const double diag = s(i, i);
            const double old = z(i);
            const double next = soft_threshold(grad(i) + diag * old, mu) / diag;
            if (next != old) {
                z(i) = next;
                grad.noalias() -= (next - old) * s.col(i);
            }
        }
        double violation = 0.0;
        for (Index i = 0; i < k; ++i) {
            const double v = z(i) != 0.0 ? std::abs(grad(i) - mu * (z(i) > 0.0 ? 1.0 : -1.0))
                                         : std::max(0.0, std::abs(grad(i)) - mu);
            violation = std::max(violation, v);
        }
        if (violation <= tol) return z;
    }
    throw ConvergenceError("constrained inverse-row solver hit the iteration cap of " +
                               std::to_string(options.max_iter),
                           z);
}

Matrix qp_theta(const HessianModel& h, double mu, const QpOptions& options) {
    const Index k = h.sigma_hat.rows();
    Matrix m(k, k);
    for (Index j = 0; j < k; ++j) m.row(j) = qp_debias(h, j, mu, options).transpose();
    return m;
}

DebiasedFit qp_debias_fit(const Dataset& d, GlmFamily family, const LassoFit& fit, double mu,
                          const QpOptions& options) {
    require_converged(fit);
    if (mu == 0.0) {
        DebiasedFit out = refine_debias(d, family, fit);
        out.method = DebiasMethod::qp;
        return out;
    }
    const HessianModel h = hessian(d, family, fit.xi_hat);
    DebiasedFit out;
    out.theta_hat = qp_theta(h, mu, options);
    out.b_hat = fit.xi_hat - out.theta_hat * score(d, family, fit.xi_hat);
    out.variance = out.theta_hat * h.sigma_hat * out.theta_hat.transpose();
    out.method = DebiasMethod::qp;
    out.mu = mu;
    out.n = d.n();
    out.xi_init = fit.xi_hat;
    out.lambda = fit.lambda;
    out.condition_estimate = h.condition_estimate;
    return out;
}

NodewiseResult nodewise_from_gram(const Matrix& gram, std::span<const double> lambdas,
                                  const NodewiseOptions& options) {
    const Index k = gram.rows();
    if (gram.cols() != k || static_cast<Index>(lambdas.size()) != k) {
        throw DomainError("node-wise lasso: Gram matrix and penalty vector sizes disagree");
    }
    NodewiseResult out;
    out.theta = Matrix::Zero(k, k);
    out.lambdas = Eigen::Map<const Vector>(lambdas.data(), k);
    out.tau2.resize(k);
    for (Index j = 0; j < k; ++j) {
        const double lambda = lambdas[static_cast<std::size_t>(j)];
        if (!(lambda >= 0.0)) throw DomainError("node-wise penalties must be non-negative");
        const GramLasso solver(gram, j, options.tol, options.max_sweeps);
        Vector gamma = Vector::Zero(k);
        Vector grad = gram.col(j);
        nodewise_column(solver, j, lambda, gamma, grad, options);
        // At the optimum the squared residual plus penalty collapses to this.
        const double tau2 = gram(j, j) - gram.col(j).dot(gamma);
        if (!(tau2 >= 1e-12)) {
            throw NumericalError("node-wise lasso: degenerate column " + std::to_string(j) +
                                 " (tau^2 below 1e-12)");
        }
        out.tau2(j) = tau2;
        out.theta.row(j) = -gamma.transpose() / tau2;
        out.theta(j, j) = 1.0 / tau2;
    }
    return out;
}

NodewiseResult nodewise_theta(const Dataset& d, GlmFamily family, const LassoFit& fit,
                              std::uint64_t seed, const NodewiseOptions& options,
                              std::uint64_t scenario, std::uint64_t replicate) {
    require_converged(fit);
    if (options.n_folds < 2) throw DomainError("node-wise CV needs at least 2 folds");
    const Index n = d.n();
    const Index k = d.X.cols();
    const HessianModel h = hessian(d, family, fit.xi_hat);
    const Matrix xw = d.X.array().colwise() * h.weights.array();

    rng::Stream stream(seed, rng::Purpose::nodewise_folds, scenario, replicate);
    const auto folds = block_folds(static_cast<std::size_t>(n), options.n_folds, stream);

    // Unnormalized per-fold Gram matrices; training Grams are total minus fold.
    std::vector<Matrix> fold_gram(static_cast<std::size_t>(options.n_folds), Matrix::Zero(k, k));
    std::vector<Index> fold_size(static_cast<std::size_t>(options.n_folds), 0);
    for (int f = 0; f < options.n_folds; ++f) {
        std::vector<Index> rows;
        for (Index i = 0; i < n; ++i) {
            if (folds[static_cast<std::size_t>(i)] == f) rows.push_back(i);
        }
        Matrix block(static_cast<Index>(rows.size()), k);
        for (std::size_t r = 0; r < rows.size(); ++r) block.row(static_cast<Index>(r)) = xw.row(rows[r]);
        auto& g = fold_gram[static_cast<std::size_t>(f)];
        g.selfadjointView<Eigen::Lower>().rankUpdate(block.transpose());
        g = g.selfadjointView<Eigen::Lower>();
        fold_size[static_cast<std::size_t>(f)] = static_cast<Index>(rows.size());
    }
    const Matrix total = h.sigma_hat * static_cast<double>(n);
    std::vector<Matrix> train_gram, test_gram;
    for (int f = 0; f < options.n_folds; ++f) {
        const auto nf = static_cast<double>(fold_size[static_cast<std::size_t>(f)]);
        train_gram.push_back((total - fold_gram[static_cast<std::size_t>(f)]) / (static_cast<double>(n) - nf));
        test_gram.push_back(fold_gram[static_cast<std::size_t>(f)] / nf);
    }

    std::vector<double> chosen(static_cast<std::size_t>(k), 0.0);
    auto choose = [&](std::size_t column) {
        const auto j = static_cast<Index>(column);
        const double lmax = column_lambda_max(h.sigma_hat, j);
        if (!(lmax > 0.0)) return;
        const auto grid = lambda_path(lmax, options.n_lambda, options.ratio);
        std::vector<double> cv_loss(grid.size(), 0.0);
        std::vector<Index> support;
        for (int f = 0; f < options.n_folds; ++f) {
            const Matrix& train = train_gram[static_cast<std::size_t>(f)];
            const Matrix& test = test_gram[static_cast<std::size_t>(f)];
            const GramLasso solver(train, j, options.cv_tol, options.max_sweeps);
            Vector gamma = Vector::Zero(k);
            Vector grad = train.col(j);
            for (std::size_t l = 0; l < grid.size(); ++l) {
                nodewise_column(solver, j, grid[l], gamma, grad, options);
                // Held-out mean squared residual: c' T c with c = e_j - gamma,
                // summed over the support of c only.
                support.clear();
                support.push_back(j);
                for (Index i = 0; i < k; ++i) {
                    if (gamma(i) != 0.0) support.push_back(i);
                }
                double loss = 0.0;
                for (const Index a : support) {
                    const double ca = a == j ? 1.0 : -gamma(a);
                    double row = 0.0;
                    for (const Index b : support) row += test(b, a) * (b == j ? 1.0 : -gamma(b));
                    loss += ca * row;
                }
                cv_loss[l] += loss / options.n_folds;
            }
        }
        std::size_t best = 0;
        for (std::size_t l = 1; l < grid.size(); ++l) {
            if (cv_loss[l] < cv_loss[best]) best = l;
        }
        chosen[column] = grid[best];
    };
    detail::parallel_for(static_cast<std::size_t>(k), options.workers, choose);
    return nodewise_from_gram(h.sigma_hat, chosen, options);
}

DebiasedFit orig_debias(const Dataset& d, GlmFamily family, const LassoFit& fit,
                        const Matrix& theta_tilde) {
    if (theta_tilde.rows() != d.X.cols() || theta_tilde.cols() != d.X.cols()) {
        throw DomainError("Theta_tilde has the wrong shape");
    }
    const HessianModel h = hessian(d, family, fit.xi_hat);
    DebiasedFit out;
    out.theta_hat = theta_tilde;
    out.b_hat = fit.xi_hat - theta_tilde * score(d, family, fit.xi_hat);
    out.variance = theta_tilde * h.sigma_hat * theta_tilde.transpose();
    out.method = DebiasMethod::orig;
    out.n = d.n();
    out.xi_init = fit.xi_hat;
    out.lambda = fit.lambda;
    out.condition_estimate = h.condition_estimate;
    return out;
}

DebiasedFit to_original_scale(const DebiasedFit& fit, const CoefMap& map) {
    if (map.size() != fit.b_hat.size()) throw DomainError("coefficient map has the wrong size");
    DebiasedFit out = fit;
    const Matrix t = map.transform();
    out.b_hat = t * fit.b_hat;
    out.xi_init = t * fit.xi_init;
    out.variance = t * fit.variance * t.transpose();
    // M maps scores to coefficient corrections; scores transform with T^{-T}.
    out.theta_hat = t * fit.theta_hat * t.transpose();
    return out;
}

}  // namespace hdinf
