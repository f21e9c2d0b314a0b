#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "hdinf/error.hpp"
#include "hdinf/simulate.hpp"

using namespace hdinf;

namespace {

double correlation(const Vector& a, const Vector& b) {
    const Vector ac = a.array() - a.mean();
    const Vector bc = b.array() - b.mean();
    return ac.dot(bc) / std::sqrt(ac.squaredNorm() * bc.squaredNorm());
}

SimConfig small_config(GlmFamily family) {
    SimConfig c;
    c.n = 120;
    c.p = 8;
    c.family = family;
    c.structure = {CovarianceKind::ar1, 0.5};
    c.beta1_grid = {0.0, 0.5};
    c.n_replicates = 6;
    c.cv_folds = 5;
    c.n_lambda = 30;
    c.lambda_ratio = 1e-3;
    c.seed = 99;
    return c;
}

}  // namespace

TEST(Covariates, IdentityIsUncorrelated) {
    rng::Stream s(1, rng::Purpose::covariates);
    const Matrix x = gen_covariates(100000, 2, {CovarianceKind::identity, 0.0}, 6.0, s);
    EXPECT_LT(std::abs(correlation(x.col(0), x.col(1))), 0.01);
}

TEST(Covariates, Ar1LagTwoCorrelation) {
    rng::Stream s(2, rng::Purpose::covariates);
    const Matrix x = gen_covariates(100000, 4, {CovarianceKind::ar1, 0.7}, 6.0, s);
    EXPECT_NEAR(correlation(x.col(0), x.col(2)), 0.49, 0.02);
    EXPECT_NEAR(correlation(x.col(0), x.col(1)), 0.7, 0.02);
}

TEST(Covariates, CompoundSymmetry) {
    const Matrix s = covariance_matrix(4, {CovarianceKind::cs, 0.3});
    EXPECT_DOUBLE_EQ(s(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(s(1, 3), 0.3);
    EXPECT_THROW(covariance_matrix(4, {CovarianceKind::cs, -0.34}), DomainError);
    EXPECT_NO_THROW(covariance_matrix(4, {CovarianceKind::cs, -0.3}));
}

TEST(Covariates, TruncationClipsEveryEntry) {
    rng::Stream s(3, rng::Purpose::covariates);
    const Matrix x = gen_covariates(5000, 5, {CovarianceKind::ar1, 0.7}, 1.5, s);
    EXPECT_LE(x.cwiseAbs().maxCoeff(), 1.5);
    EXPECT_EQ(x.cwiseAbs().maxCoeff(), 1.5);
    rng::Stream t(3, rng::Purpose::covariates);
    const Matrix y = gen_covariates(2000, 3, {CovarianceKind::identity, 0.0}, 6.0, t);
    EXPECT_LE(y.cwiseAbs().maxCoeff(), 6.0);
}

TEST(Response, NullBinomialMean) {
    rng::Stream s(4, rng::Purpose::response);
    const Matrix x = Matrix::Ones(100000, 1);
    const Vector y = gen_response(x, Vector::Zero(1), binomial_family, s);
    EXPECT_NEAR(y.mean(), 0.5, 0.005);
}

TEST(Response, PoissonInterceptMean) {
    rng::Stream s(5, rng::Purpose::response);
    const Matrix x = Matrix::Ones(100000, 1);
    const Vector y = gen_response(x, Vector::Constant(1, std::log(2.0)), poisson_family, s);
    EXPECT_NEAR(y.mean(), 2.0, 0.05);
}

TEST(Response, GaussianUnitNoiseAndDeterminism) {
    const Matrix x = Matrix::Ones(50000, 1);
    rng::Stream a(6, rng::Purpose::response), b(6, rng::Purpose::response);
    const Vector ya = gen_response(x, Vector::Constant(1, 3.0), gaussian_family, a);
    const Vector yb = gen_response(x, Vector::Constant(1, 3.0), gaussian_family, b);
    EXPECT_EQ(ya, yb);
    EXPECT_NEAR(ya.mean(), 3.0, 0.02);
    EXPECT_NEAR((ya.array() - ya.mean()).square().mean(), 1.0, 0.03);
}

TEST(DefaultTruth, Examples) {
    const Vector v = default_xi0(5, 0.0);
    EXPECT_EQ(v, (Vector(6) << 0, 0, 1, 1, 0.5, 0.5).finished());
    const Vector w = default_xi0(100, 1.5);
    EXPECT_EQ(w.size(), 101);
    EXPECT_EQ((w.tail(100).array() != 0.0).count(), 5);
    EXPECT_THROW(default_xi0(4, 0.0), DomainError);
}

TEST(SimMethod, TagRoundTrip) {
    for (const SimMethod& m : {SimMethod{SimMethodKind::mle}, SimMethod{SimMethodKind::orig},
                               SimMethod{SimMethodKind::ref}, SimMethod{SimMethodKind::qp, 0.01}}) {
        EXPECT_EQ(SimMethod::parse(m.tag()), m);
    }
    EXPECT_EQ(SimMethod{SimMethodKind::ref}.tag(), "REF-DS");
    EXPECT_THROW(SimMethod::parse("LASSO"), DomainError);
}

TEST(SimConfig, Validation) {
    SimConfig c = small_config(binomial_family);
    EXPECT_NO_THROW(c.validate());
    c.beta1_grid.clear();
    EXPECT_THROW(c.validate(), DomainError);
    c = small_config(binomial_family);
    c.n_replicates = 0;
    EXPECT_THROW(c.validate(), DomainError);
    c = small_config(binomial_family);
    c.structure.rho = 1.0;
    EXPECT_THROW(c.validate(), DomainError);
}

TEST(RunReplicates, SingleReplicateHasNoEmpiricalSe) {
    SimConfig c = small_config(binomial_family);
    c.beta1_grid = {0.0};
    c.n_replicates = 1;
    const SimSummary s = run_replicates(c);
    ASSERT_EQ(s.rows.size(), 2u);
    for (const auto& row : s.rows) {
        EXPECT_FALSE(row.empirical_se.has_value());
        EXPECT_GE(row.coverage, 0.0);
        EXPECT_LE(row.coverage, 1.0);
    }
    std::ostringstream csv;
    write_summary_csv(s, csv);
    EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "beta1,method,bias,coverage,emp_se,model_se,n_failed");
    EXPECT_NE(csv.str().find(",,"), std::string::npos);
}

TEST(RunReplicates, GaussianRefineEqualsMle) {
    SimConfig c = small_config(gaussian_family);
    c.methods = {{SimMethodKind::mle}, {SimMethodKind::ref}};
    c.n_replicates = 10;
    const SimSummary s = run_replicates(c);
    for (std::size_t b = 0; b < c.beta1_grid.size(); ++b) {
        for (int r = 0; r < c.n_replicates; ++r) {
            const auto& mle = s.records[b][static_cast<std::size_t>(r)][0];
            const auto& ref = s.records[b][static_cast<std::size_t>(r)][1];
            ASSERT_FALSE(mle.failed);
            ASSERT_FALSE(ref.failed);
            EXPECT_NEAR(mle.estimate, ref.estimate, 1e-8);
            EXPECT_NEAR(mle.se, ref.se, 1e-10);
            EXPECT_EQ(mle.covered, ref.covered);
        }
        EXPECT_EQ(s.row(b, 0).coverage, s.row(b, 1).coverage);
    }
}

TEST(RunReplicates, MleSeparationIsRecordedNotThrown) {
    SimConfig c = small_config(binomial_family);
    c.n = 30;
    c.p = 12;
    c.xi0 = Vector::Constant(13, 3.0);
    c.beta1_grid = {3.0};
    c.methods = {{SimMethodKind::mle}, {SimMethodKind::ref}};
    c.n_replicates = 4;
    c.cv_folds = 3;
    const SimSummary s = run_replicates(c);
    EXPECT_GT(s.row(0, 0).n_failed, 0);
    for (const auto& rep : s.records[0]) {
        if (rep[0].failed) EXPECT_FALSE(rep[0].error.empty());
    }
}

TEST(RunReplicates, IdenticalAcrossWorkerCounts) {
    SimConfig c = small_config(binomial_family);
    c.methods = {{SimMethodKind::orig}, {SimMethodKind::ref}, {SimMethodKind::mle}};
    const SimSummary a = run_replicates(c, 1);
    const SimSummary b = run_replicates(c, 4);
    std::ostringstream ca, cb, ra, rb;
    write_summary_csv(a, ca);
    write_summary_csv(b, cb);
    write_replicates_csv(a, ra);
    write_replicates_csv(b, rb);
    EXPECT_EQ(ca.str(), cb.str());
    EXPECT_EQ(ra.str(), rb.str());
    c.seed = 100;
    std::ostringstream cc;
    write_replicates_csv(run_replicates(c, 2), cc);
    EXPECT_NE(cc.str(), ra.str());
}

TEST(RunReplicates, StandardizedStatistics) {
    SimConfig c = small_config(poisson_family);
    c.methods = {{SimMethodKind::ref}};
    const SimSummary s = run_replicates(c);
    const auto z = s.standardized_statistics(1, 0);
    EXPECT_EQ(z.size(), static_cast<std::size_t>(c.n_replicates - s.row(1, 0).n_failed));
    for (std::size_t r = 0; r < z.size(); ++r) {
        const auto& rec = s.records[1][r][0];
        EXPECT_DOUBLE_EQ(z[r], (rec.estimate - 0.5) / rec.se);
    }
}

TEST(MuSweep, StructureAndZeroMatchesRefine) {
    SimConfig c = small_config(binomial_family);
    c.beta1_grid = {0.5};
    const MuSweepResult r = mu_sweep(c, {0.0, 0.01, 0.1, 1.0});
    ASSERT_EQ(r.mu_grid.size(), 4u);
    ASSERT_EQ(r.rows.size(), 4u);
    ASSERT_EQ(r.summary.methods.size(), 5u);
    EXPECT_EQ(r.summary.methods[0].tag(), "REF-DS");
    const SummaryRow& ref = r.summary.row(0, 0);
    EXPECT_NEAR(r.rows[0].mean_bias, ref.mean_bias, 1e-10);
    EXPECT_NEAR(r.rows[0].coverage, ref.coverage, 1e-10);
    EXPECT_NEAR(r.rows[0].model_se, ref.model_se, 1e-10);
    for (int rep = 0; rep < c.n_replicates; ++rep) {
        const auto& cell = r.summary.records[0][static_cast<std::size_t>(rep)];
        EXPECT_NEAR(cell[0].estimate, cell[1].estimate, 1e-10);
    }
    // mu = 1 zeroes the correction row, so the estimate is the lasso value.
    EXPECT_EQ(r.rows[3].mu, 1.0);
    std::ostringstream csv;
    write_mu_sweep_csv(r, csv);
    EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "mu,beta1,bias,coverage,se_ratio,model_se,emp_se,n_failed");
}

TEST(RunReplicates, GaussianEmpiricalSeMatchesOls) {
    // Fixed-design OLS SE averaged over replicates versus the spread of the
    // REF-DS estimates; needs many replicates for a 5% comparison.
    SimConfig c;
    c.n = 60;
    c.p = 5;
    c.family = gaussian_family;
    c.structure = {CovarianceKind::ar1, 0.5};
    c.beta1_grid = {0.7};
    c.n_replicates = 2000;
    c.methods = {{SimMethodKind::ref}};
    c.cv_folds = 3;
    c.n_lambda = 5;
    c.lambda_ratio = 0.1;
    c.seed = 5;
    const SimSummary s = run_replicates(c, 2);
    const SummaryRow& row = s.row(0, 0);
    ASSERT_TRUE(row.empirical_se.has_value());
    EXPECT_NEAR(*row.empirical_se / row.model_se, 1.0, 0.05);
    EXPECT_NEAR(row.coverage, 0.95, 0.02);
}
