#include "hdinf/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <tuple>

#include "hdinf/csv.hpp"
#include "hdinf/data.hpp"
#include "hdinf/debias.hpp"
#include "hdinf/error.hpp"
#include "hdinf/lasso.hpp"
#include "hdinf/mle.hpp"
#include "hdinf/stats.hpp"
#include "parallel.hpp"

namespace hdinf {
namespace {

std::string format_mu(double mu) {
    std::ostringstream os;
    os << mu;
    return os.str();
}

struct EstimateSe {
    double estimate;
    double se;
};

EstimateSe extract(const DebiasedFit& fit_std, const CoefMap& map, Index target) {
    const DebiasedFit fit = to_original_scale(fit_std, map);
    const double var = fit.variance(target, target);
    return {fit.b_hat(target), var > 0.0 ? std::sqrt(var / static_cast<double>(fit.n)) : 0.0};
}

bool needs_lasso(const std::vector<SimMethod>& methods) {
    return std::any_of(methods.begin(), methods.end(),
                       [](const SimMethod& m) { return m.kind != SimMethodKind::mle; });
}

class ReplicateRunner {
public:
    explicit ReplicateRunner(const SimConfig& config)
        : config_(config),
          chol_(covariance_matrix(config.p, config.structure).llt().matrixL()),
          z_(stats::normal_quantile(0.5 + 0.5 * config.level)) {}

    std::vector<ReplicateRecord> run(std::size_t beta_index, std::size_t replicate) const {
        const auto& methods = config_.methods;
        std::vector<ReplicateRecord> out(methods.size());
        const double truth = config_.beta1_grid[beta_index];
        Vector xi0 = config_.xi0.size() > 0 ? config_.xi0 : default_xi0(config_.p, truth);
        xi0(config_.target) = truth;

        auto fail_all = [&](const Error& e) {
            for (auto& r : out) {
                r.failed = true;
                r.error = e.kind();
            }
        };

        Dataset data_std;
        CoefMap map;
        try {
            rng::Stream xs(config_.seed, rng::Purpose::covariates, beta_index, replicate);
            rng::Stream ys(config_.seed, rng::Purpose::response, beta_index, replicate);
            const Matrix x = draw_covariates(xs);
            Matrix design(config_.n, config_.p + 1);
            design.col(0).setOnes();
            design.rightCols(config_.p) = x;
            Vector y = gen_response(design, xi0, config_.family, ys);
            Dataset raw = make_dataset(std::move(y), x);
            if (config_.standardize) {
                std::tie(data_std, map) = standardize(raw);
            } else {
                map = identity_map(raw);
                data_std = std::move(raw);
            }
        } catch (const Error& e) {
            fail_all(e);
            return out;
        }

        std::optional<LassoFit> lasso;
        if (needs_lasso(methods)) {
            try {
                lasso = cv_lasso(data_std, beta_index, replicate);
            } catch (const Error& e) {
                for (std::size_t m = 0; m < methods.size(); ++m) {
                    if (methods[m].kind != SimMethodKind::mle) {
                        out[m].failed = true;
                        out[m].error = e.kind();
                    }
                }
            }
        }

        const Index target = config_.target;
        for (std::size_t m = 0; m < methods.size(); ++m) {
            if (out[m].failed) continue;
            try {
                EstimateSe es{};
                switch (methods[m].kind) {
                case SimMethodKind::mle: {
                    const MleFit mle = fit_mle(data_std, config_.family);
                    DebiasedFit fit;
                    fit.b_hat = mle.xi_hat;
                    fit.xi_init = mle.xi_hat;
                    fit.variance = invert_hessian(hessian(data_std, config_.family, mle.xi_hat));
                    fit.theta_hat = fit.variance;
                    fit.n = data_std.n();
                    es = extract(fit, map, target);
                    break;
                }
                case SimMethodKind::ref:
                    es = extract(refine_debias(data_std, config_.family, *lasso), map, target);
                    break;
                case SimMethodKind::orig: {
                    NodewiseOptions nw;
                    nw.n_folds = config_.nodewise_folds;
                    const auto theta = nodewise_theta(data_std, config_.family, *lasso, config_.seed,
                                                      nw, beta_index, replicate);
                    es = extract(orig_debias(data_std, config_.family, *lasso, theta.theta), map, target);
                    break;
                }
                case SimMethodKind::qp:
                    es = extract(qp_debias_fit(data_std, config_.family, *lasso, methods[m].mu), map,
                                 target);
                    break;
                }
                out[m].estimate = es.estimate;
                out[m].se = es.se;
                out[m].covered = std::abs(es.estimate - truth) <= z_ * es.se;
            } catch (const Error& e) {
                out[m].failed = true;
                out[m].error = e.kind();
            }
        }
        return out;
    }

private:
    Matrix draw_covariates(rng::Stream& stream) const {
        Matrix z(config_.n, config_.p);
        for (Index i = 0; i < config_.n; ++i) {
            for (Index j = 0; j < config_.p; ++j) z(i, j) = stream.normal();
        }
        Matrix x = z * chol_.transpose();
        return x.cwiseMax(-config_.truncation).cwiseMin(config_.truncation);
    }

    LassoFit cv_lasso(const Dataset& d, std::size_t beta_index, std::size_t replicate) const {
        const auto grid = lambda_path(lambda_max(d, config_.family), config_.n_lambda,
                                      config_.lambda_ratio);
        const auto folds = make_folds(d.y, config_.family, config_.cv_folds, config_.seed,
                                      beta_index, replicate);
        const CvResult cv = cross_validate(d, config_.family, folds, grid);
        const auto stop = std::find(grid.begin(), grid.end(), cv.lambda_min);
        auto fits = fit_lasso_path(d, config_.family,
                                   std::span<const double>(grid.data(), static_cast<std::size_t>(stop - grid.begin()) + 1));
        return std::move(fits.back());
    }

    const SimConfig& config_;
    Matrix chol_;
    double z_;
};

SummaryRow summarize(double truth, const std::string& tag,
                     const std::vector<const ReplicateRecord*>& cell) {
    SummaryRow row;
    row.beta1 = truth;
    row.method = tag;
    double bias = 0.0, covered = 0.0, se = 0.0, sum = 0.0;
    int ok = 0;
    for (const auto* r : cell) {
        if (r->failed) {
            ++row.n_failed;
            continue;
        }
        ++ok;
        bias += r->estimate - truth;
        sum += r->estimate;
        se += r->se;
        covered += r->covered ? 1.0 : 0.0;
    }
    if (ok == 0) {
        const double nan = std::nan("");
        row.mean_bias = row.coverage = row.model_se = nan;
        return row;
    }
    row.mean_bias = bias / ok;
    row.coverage = covered / ok;
    row.model_se = se / ok;
    if (ok >= 2) {
        const double mean = sum / ok;
        double ss = 0.0;
        for (const auto* r : cell) {
            if (!r->failed) ss += (r->estimate - mean) * (r->estimate - mean);
        }
        row.empirical_se = std::sqrt(ss / (ok - 1));
    }
    return row;
}

std::string optional_field(const std::optional<double>& v) {
    return v ? csv::format_double(*v) : std::string();
}

}  // namespace

std::string SimMethod::tag() const {
    switch (kind) {
    case SimMethodKind::mle:
        return "MLE";
    case SimMethodKind::orig:
        return "ORIG-DS";
    case SimMethodKind::ref:
        return "REF-DS";
    case SimMethodKind::qp:
        return "QP(" + format_mu(mu) + ")";
    }
    return "unknown";
}

SimMethod SimMethod::parse(const std::string& tag) {
    if (tag == "MLE") return {SimMethodKind::mle};
    if (tag == "ORIG-DS") return {SimMethodKind::orig};
    if (tag == "REF-DS") return {SimMethodKind::ref};
    if (tag.size() > 4 && tag.starts_with("QP(") && tag.back() == ')') {
        try {
            std::size_t used = 0;
            const std::string inner = tag.substr(3, tag.size() - 4);
            const double mu = std::stod(inner, &used);
            if (used == inner.size() && mu >= 0.0) return {SimMethodKind::qp, mu};
        } catch (const std::exception&) {
        }
    }
    throw DomainError("unknown method '" + tag + "' (expected MLE, ORIG-DS, REF-DS or QP(<mu>))");
}

void SimConfig::validate() const {
    if (n < 2) throw DomainError("n must be at least 2");
    if (p < 1) throw DomainError("p must be at least 1");
    if (beta1_grid.empty()) throw DomainError("beta1_grid must not be empty");
    if (n_replicates < 1) throw DomainError("n_replicates must be at least 1");
    if (methods.empty()) throw DomainError("at least one method is required");
    if (!(structure.rho > -1.0 && structure.rho < 1.0)) throw DomainError("rho must lie in (-1, 1)");
    if (!(truncation > 0.0)) throw DomainError("truncation must be positive");
    if (!(level > 0.0 && level < 1.0)) throw DomainError("level must lie in (0, 1)");
    if (target < 1 || target > p) throw DomainError("target must index a covariate (1..p)");
    if (xi0.size() != 0 && xi0.size() != p + 1) throw DomainError("xi0 must have length p+1");
    if (xi0.size() == 0 && p < 5) throw DomainError("the default truth needs p >= 5; supply xi0");
    if (cv_folds < 2 || nodewise_folds < 2) throw DomainError("fold counts must be at least 2");
    for (double b : beta1_grid) {
        if (!std::isfinite(b)) throw DomainError("beta1_grid values must be finite");
    }
    covariance_matrix(p, structure);
}

Matrix covariance_matrix(Index p, const CovarianceStructure& structure) {
    if (p < 1) throw DomainError("p must be positive");
    const double rho = structure.rho;
    Matrix s = Matrix::Identity(p, p);
    switch (structure.kind) {
    case CovarianceKind::identity:
        break;
    case CovarianceKind::ar1:
        if (!(std::abs(rho) < 1.0)) throw DomainError("AR(1) correlation must lie in (-1, 1)");
        for (Index i = 0; i < p; ++i) {
            for (Index j = 0; j < p; ++j) s(i, j) = std::pow(rho, static_cast<double>(std::abs(i - j)));
        }
        break;
    case CovarianceKind::cs:
        if (!(rho < 1.0) || (p > 1 && !(rho > -1.0 / static_cast<double>(p - 1)))) {
            throw DomainError("compound-symmetry correlation must lie in (-1/(p-1), 1)");
        }
        s.setConstant(rho);
        s.diagonal().setOnes();
        break;
    }
    return s;
}

Matrix gen_covariates(Index n, Index p, const CovarianceStructure& structure, double truncation,
                      rng::Stream& stream) {
    const Matrix l = covariance_matrix(p, structure).llt().matrixL();
    Matrix z(n, p);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < p; ++j) z(i, j) = stream.normal();
    }
    Matrix x = z * l.transpose();
    return x.cwiseMax(-truncation).cwiseMin(truncation);
}

Vector gen_response(const Matrix& x_with_intercept, const Vector& xi0, GlmFamily family,
                    rng::Stream& stream) {
    if (x_with_intercept.cols() != xi0.size()) throw DomainError("truth has the wrong length");
    const Vector eta = x_with_intercept * xi0;
    Vector y(eta.size());
    for (Index i = 0; i < eta.size(); ++i) {
        switch (family.kind()) {
        case FamilyKind::gaussian:
            y(i) = eta(i) + stream.normal();
            break;
        case FamilyKind::binomial:
            y(i) = stream.bernoulli(family.b_dot(eta(i))) ? 1.0 : 0.0;
            break;
        case FamilyKind::poisson:
            y(i) = static_cast<double>(stream.poisson(family.b_dot(eta(i))));
            break;
        }
    }
    return y;
}

Vector default_xi0(Index p, double beta1) {
    if (p < 5) throw DomainError("default truth needs p >= 5");
    Vector xi = Vector::Zero(p + 1);
    xi(1) = beta1;
    xi(kDefaultSignalIndices[0]) = 1.0;
    xi(kDefaultSignalIndices[1]) = 1.0;
    xi(kDefaultSignalIndices[2]) = 0.5;
    xi(kDefaultSignalIndices[3]) = 0.5;
    return xi;
}

const SummaryRow& SimSummary::row(std::size_t beta_index, std::size_t method_index) const {
    return rows.at(beta_index * methods.size() + method_index);
}

std::vector<double> SimSummary::standardized_statistics(std::size_t beta_index,
                                                        std::size_t method_index) const {
    std::vector<double> out;
    const double truth = beta1_grid.at(beta_index);
    for (const auto& rep : records.at(beta_index)) {
        const auto& r = rep.at(method_index);
        if (!r.failed && r.se > 0.0) out.push_back((r.estimate - truth) / r.se);
    }
    return out;
}

SimSummary run_replicates(const SimConfig& config, int workers) {
    config.validate();
    const ReplicateRunner runner(config);
    const std::size_t n_beta = config.beta1_grid.size();
    const auto n_rep = static_cast<std::size_t>(config.n_replicates);

    SimSummary summary;
    summary.beta1_grid = config.beta1_grid;
    summary.methods = config.methods;
    summary.records.assign(n_beta, std::vector<std::vector<ReplicateRecord>>(n_rep));

    const std::size_t n_tasks = n_beta * n_rep;
    auto run_task = [&](std::size_t task) {
        const std::size_t b = task / n_rep;
        const std::size_t r = task % n_rep;
        summary.records[b][r] = runner.run(b, r);
    };
    detail::parallel_for(n_tasks, workers, run_task);

    for (std::size_t b = 0; b < n_beta; ++b) {
        for (std::size_t m = 0; m < config.methods.size(); ++m) {
            std::vector<const ReplicateRecord*> cell;
            cell.reserve(n_rep);
            for (std::size_t r = 0; r < n_rep; ++r) cell.push_back(&summary.records[b][r][m]);
            summary.rows.push_back(summarize(config.beta1_grid[b], config.methods[m].tag(), cell));
        }
    }
    return summary;
}

MuSweepResult mu_sweep(SimConfig config, const std::vector<double>& mu_grid, int workers) {
    if (mu_grid.empty()) throw DomainError("mu grid must not be empty");
    config.methods = {{SimMethodKind::ref}};
    for (double mu : mu_grid) {
        if (!(mu >= 0.0) || !std::isfinite(mu)) throw DomainError("mu values must be non-negative");
        config.methods.push_back({SimMethodKind::qp, mu});
    }
    MuSweepResult result;
    result.mu_grid = mu_grid;
    result.summary = run_replicates(config, workers);
    for (std::size_t k = 0; k < mu_grid.size(); ++k) {
        for (std::size_t b = 0; b < config.beta1_grid.size(); ++b) {
            const SummaryRow& row = result.summary.row(b, k + 1);
            MuSweepRow out;
            out.mu = mu_grid[k];
            out.beta1 = row.beta1;
            out.mean_bias = row.mean_bias;
            out.coverage = row.coverage;
            out.model_se = row.model_se;
            out.empirical_se = row.empirical_se;
            out.se_ratio = row.empirical_se && *row.empirical_se > 0.0
                               ? row.model_se / *row.empirical_se
                               : std::nan("");
            out.n_failed = row.n_failed;
            result.rows.push_back(out);
        }
    }
    return result;
}

void write_summary_csv(const SimSummary& summary, std::ostream& out) {
    out << "beta1,method,bias,coverage,emp_se,model_se,n_failed\n";
    for (const auto& row : summary.rows) {
        out << csv::format_double(row.beta1) << ',' << csv::escape(row.method) << ','
            << csv::format_double(row.mean_bias) << ',' << csv::format_double(row.coverage) << ','
            << optional_field(row.empirical_se) << ',' << csv::format_double(row.model_se) << ','
            << row.n_failed << '\n';
    }
}

void write_replicates_csv(const SimSummary& summary, std::ostream& out) {
    out << "beta1,replicate,method,estimate,se,covered,failed,error\n";
    for (std::size_t b = 0; b < summary.records.size(); ++b) {
        for (std::size_t r = 0; r < summary.records[b].size(); ++r) {
            for (std::size_t m = 0; m < summary.methods.size(); ++m) {
                const auto& rec = summary.records[b][r][m];
                out << csv::format_double(summary.beta1_grid[b]) << ',' << r << ','
                    << csv::escape(summary.methods[m].tag()) << ','
                    << csv::format_double(rec.estimate) << ',' << csv::format_double(rec.se) << ','
                    << (rec.covered ? 1 : 0) << ',' << (rec.failed ? 1 : 0) << ','
                    << csv::escape(rec.error) << '\n';
            }
        }
    }
}

void write_mu_sweep_csv(const MuSweepResult& result, std::ostream& out) {
    out << "mu,beta1,bias,coverage,se_ratio,model_se,emp_se,n_failed\n";
    for (const auto& row : result.rows) {
        out << csv::format_double(row.mu) << ',' << csv::format_double(row.beta1) << ','
            << csv::format_double(row.mean_bias) << ',' << csv::format_double(row.coverage) << ','
            << csv::format_double(row.se_ratio) << ',' << csv::format_double(row.model_se) << ','
            << optional_field(row.empirical_se) << ',' << row.n_failed << '\n';
    }
}

}  // namespace hdinf
