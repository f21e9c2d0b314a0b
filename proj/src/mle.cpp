#include "hdinf/mle.hpp"

#include <cmath>

#include "hdinf/debias.hpp"
#include "hdinf/error.hpp"
#include "hdinf/lasso.hpp"

namespace hdinf {

MleFit fit_mle(const Dataset& d, GlmFamily family, const MleOptions& options) {
    validate_response(d, family);
    Vector xi = Vector::Zero(d.X.cols());
    try {
        xi(0) = null_intercept(d, family);
    } catch (const DataError&) {
    }
    double objective = lasso_objective(d, family, xi, 0.0);
    for (int iter = 1; iter <= options.max_iter; ++iter) {
        const HessianModel h = hessian(d, family, xi);
        if (!h.has_chol()) throw SingularHessianError("MLE: Hessian is not positive definite");
        const Vector g = score(d, family, xi);
        Vector step = -g;
        h.chol.triangularView<Eigen::Lower>().solveInPlace(step);
        h.chol.transpose().triangularView<Eigen::Upper>().solveInPlace(step);

        double t = 1.0;
        Vector next = xi + step;
        double next_obj = lasso_objective(d, family, next, 0.0);
        int halvings = 0;
        while (!(next_obj <= objective + 1e-12 * std::max(1.0, std::abs(objective))) &&
               halvings < options.max_halvings) {
            t *= 0.5;
            ++halvings;
            next = xi + t * step;
            next_obj = lasso_objective(d, family, next, 0.0);
        }
        const double change = (next - xi).lpNorm<Eigen::Infinity>();
        xi = std::move(next);
        objective = next_obj;
        if (!(xi.lpNorm<Eigen::Infinity>() <= options.divergence_bound)) {
            throw ConvergenceError("MLE diverged: |xi|_inf exceeded " +
                                       std::to_string(options.divergence_bound),
                                   xi);
        }
        if (change < options.tol) return {xi, iter};
    }
    throw ConvergenceError("MLE: no convergence after " + std::to_string(options.max_iter) +
                               " Newton iterations",
                           xi);
}

}  // namespace hdinf
