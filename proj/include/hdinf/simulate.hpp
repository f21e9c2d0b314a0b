#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "hdinf/glm_family.hpp"
#include "hdinf/rng.hpp"
#include "hdinf/types.hpp"

namespace hdinf {

enum class CovarianceKind { identity, ar1, cs };

struct CovarianceStructure {
    CovarianceKind kind = CovarianceKind::identity;
    double rho = 0.0;
};

enum class SimMethodKind { mle, orig, ref, qp };

struct SimMethod {
    SimMethodKind kind = SimMethodKind::ref;
    double mu = 0.0;  ///< QP only

    /// "MLE", "ORIG-DS", "REF-DS" or "QP(<mu>)".
    std::string tag() const;
    /// Inverse of tag(); "QP(0.1)" parses to {qp, 0.1}.
    static SimMethod parse(const std::string& tag);

    friend bool operator==(const SimMethod&, const SimMethod&) = default;
};

/// Positions of the fixed nonzero coefficients in the default truth: indices
/// 2 and 3 are 1.0, 4 and 5 are 0.5 (index 0 is the intercept, 1 the moving
/// coefficient).
inline constexpr Index kDefaultSignalIndices[4] = {2, 3, 4, 5};

struct SimConfig {
    Index n = 1000;
    Index p = 100;
    CovarianceStructure structure{CovarianceKind::ar1, 0.7};
    double truncation = 6.0;
    GlmFamily family = binomial_family;
    /// Length p+1 truth; entry `target` is overwritten by each grid value.
    /// Empty selects default_xi0.
    Vector xi0;
    std::vector<double> beta1_grid{0.0};
    int n_replicates = 200;
    std::vector<SimMethod> methods{{SimMethodKind::orig}, {SimMethodKind::ref}};
    double level = 0.95;
    std::uint64_t seed = 1;
    int cv_folds = 10;
    int nodewise_folds = 5;
    int n_lambda = 100;
    double lambda_ratio = 1e-4;
    /// Covariates are re-standardized inside every replicate.
    bool standardize = true;
    Index target = 1;

    /// Throws DomainError on an invalid configuration.
    void validate() const;
};

/// Sigma_x for the given structure. Throws DomainError when not PD.
Matrix covariance_matrix(Index p, const CovarianceStructure& structure);

/// n x p rows from N(0, Sigma_x), each entry clipped to [-truncation, truncation].
Matrix gen_covariates(Index n, Index p, const CovarianceStructure& structure, double truncation,
                      rng::Stream& stream);

/// Responses given a design that includes the intercept column.
Vector gen_response(const Matrix& x_with_intercept, const Vector& xi0, GlmFamily family,
                    rng::Stream& stream);

/// (0, beta1, 1, 1, 0.5, 0.5, 0, ..., 0) of length p+1. Throws for p < 5.
Vector default_xi0(Index p, double beta1);

/// One method on one replicate.
struct ReplicateRecord {
    double estimate = 0.0;
    double se = 0.0;
    bool covered = false;
    bool failed = false;
    std::string error;
};

struct SummaryRow {
    double beta1 = 0.0;
    std::string method;
    double mean_bias = 0.0;
    double coverage = 0.0;
    std::optional<double> empirical_se;  ///< absent with fewer than 2 successes
    double model_se = 0.0;
    int n_failed = 0;
};

struct SimSummary {
    std::vector<SummaryRow> rows;  ///< beta-major, then config method order
    /// records[beta_index][replicate][method_index]
    std::vector<std::vector<std::vector<ReplicateRecord>>> records;
    std::vector<double> beta1_grid;
    std::vector<SimMethod> methods;

    const SummaryRow& row(std::size_t beta_index, std::size_t method_index) const;
    /// (estimate - truth) / se over the successful replicates of one cell.
    std::vector<double> standardized_statistics(std::size_t beta_index,
                                                std::size_t method_index) const;
};

/// Runs every (beta1, replicate) pair on up to `workers` threads. Replicate r
/// at grid index b draws from streams keyed (seed, purpose, b, r), and
/// aggregation runs in a fixed order, so the summary is bitwise identical for
/// any worker count. Per-method failures are recorded, never thrown.
SimSummary run_replicates(const SimConfig& config, int workers = 1);

struct MuSweepRow {
    double mu = 0.0;
    double beta1 = 0.0;
    double mean_bias = 0.0;
    double coverage = 0.0;
    double se_ratio = 0.0;  ///< mean model SE / empirical SE
    double model_se = 0.0;
    std::optional<double> empirical_se;
    int n_failed = 0;
};

struct MuSweepResult {
    std::vector<double> mu_grid;
    std::vector<MuSweepRow> rows;  ///< mu-major
    SimSummary summary;            ///< REF-DS plus one QP method per mu
};

/// Replaces the configured methods with REF-DS and QP(mu) for each grid value,
/// all sharing the same lasso fit per replicate.
MuSweepResult mu_sweep(SimConfig config, const std::vector<double>& mu_grid, int workers = 1);

/// "beta1,method,bias,coverage,emp_se,model_se,n_failed" plus one line per row.
void write_summary_csv(const SimSummary& summary, std::ostream& out);
/// Per replicate: beta1, replicate, method, estimate, se, covered, failed, error.
void write_replicates_csv(const SimSummary& summary, std::ostream& out);
/// "mu,beta1,bias,coverage,se_ratio,model_se,emp_se,n_failed".
void write_mu_sweep_csv(const MuSweepResult& result, std::ostream& out);

}  // namespace hdinf
