#pragma once

#include "hdinf/data.hpp"
#include "hdinf/glm_family.hpp"
#include "hdinf/types.hpp"

namespace hdinf {

struct MleOptions {
    int max_iter = 200;
    double divergence_bound = 1e3;  ///< ||xi||_inf beyond this counts as divergence
    double tol = 1e-10;
    int max_halvings = 30;
};

struct MleFit {
    Vector xi_hat;
    int n_iter = 0;
};

/// Unpenalized maximum likelihood by Newton-Raphson with step halving.
/// Throws ConvergenceError on divergence (separation) or when the iteration
/// cap is reached, SingularHessianError when a Newton system is not PD.
MleFit fit_mle(const Dataset& d, GlmFamily family, const MleOptions& options = {});

}  // namespace hdinf
