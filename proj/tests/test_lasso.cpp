#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "hdinf/error.hpp"
#include "hdinf/lasso.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace hdinf;

namespace {

/// Design whose non-intercept columns are centered with X_j'X_k / n = delta_jk.
Dataset orthonormal_dataset(Index n, Index p, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    Matrix z(n, p + 1);
    z.col(0).setOnes();
    z.rightCols(p) = testutil::random_matrix(n, p, gen);
    const Eigen::HouseholderQR<Matrix> qr(z);
    const Matrix q = qr.householderQ() * Matrix::Identity(n, p + 1);
    Matrix x = q.rightCols(p) * std::sqrt(static_cast<double>(n));
    Vector beta(p);
    for (Index j = 0; j < p; ++j) beta(j) = (j % 3 == 0) ? 0.8 : ((j % 3 == 1) ? -0.1 : 0.35);
    std::normal_distribution<double> norm;
    Vector y = (x * beta).array() + 1.5;
    for (Index i = 0; i < n; ++i) y(i) += 0.5 * norm(gen);
    return make_dataset(y, x);
}

void expect_monotone(const LassoFit& fit) {
    for (std::size_t k = 1; k < fit.objective_trace.size(); ++k) {
        const double prev = fit.objective_trace[k - 1];
        EXPECT_LE(fit.objective_trace[k], prev + 1e-12 * std::max(1.0, std::abs(prev)));
    }
}

}  // namespace

TEST(Lasso, OrthonormalGaussianMatchesSoftThreshold) {
    const Dataset d = orthonormal_dataset(120, 8, 4);
    const double lambda = 0.3;
    const LassoFit fit = fit_lasso(d, gaussian_family, lambda);
    ASSERT_TRUE(fit.converged);
    EXPECT_NEAR(fit.xi_hat(0), d.y.mean(), 1e-8);
    for (Index j = 1; j <= d.p(); ++j) {
        const double z = d.X.col(j).dot(d.y) / d.n();
        EXPECT_NEAR(fit.xi_hat(j), oracle::soft_threshold(z, lambda), 1e-8) << j;
    }
    EXPECT_LE(fit.kkt_residual, 1e-7);
}

TEST(Lasso, AboveLambdaMaxGivesNullModel) {
    for (GlmFamily f : {gaussian_family, binomial_family, poisson_family}) {
        const Dataset d = testutil::random_standardized(150, 6, f, 21);
        const double lmax = lambda_max(d, f);
        for (double scale : {1.0, 1.5, 10.0}) {
            const LassoFit fit = fit_lasso(d, f, lmax * scale);
            EXPECT_TRUE(fit.xi_hat.tail(d.p()).isZero(0.0)) << f.name();
            const double ybar = d.y.mean();
            const double expected = f.kind() == FamilyKind::gaussian ? ybar
                                    : f.kind() == FamilyKind::binomial ? std::log(ybar / (1 - ybar))
                                                                       : std::log(ybar);
            EXPECT_NEAR(fit.xi_hat(0), expected, 1e-12) << f.name();
            EXPECT_LE(fit.kkt_residual, 1e-7);
        }
    }
}

TEST(Lasso, LambdaMaxBracketsTheFirstEntry) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const Dataset d = testutil::random_standardized(200, 10, binomial_family, seed);
        const double lmax = lambda_max(d, binomial_family);
        const LassoFit at = fit_lasso(d, binomial_family, lmax);
        EXPECT_EQ((at.xi_hat.tail(d.p()).array() != 0.0).count(), 0);
        const LassoFit below = fit_lasso(d, binomial_family, 0.99 * lmax);
        EXPECT_GT((below.xi_hat.tail(d.p()).array() != 0.0).count(), 0);
        EXPECT_LE(below.kkt_residual, 1e-7);
    }
}

TEST(Lasso, LambdaMaxGaussianCenteredResponse) {
    Dataset d = testutil::random_standardized(80, 5, gaussian_family, 8);
    d.y.array() -= d.y.mean();
    const double expected = (d.X.rightCols(d.p()).transpose() * d.y).cwiseAbs().maxCoeff() / d.n();
    EXPECT_NEAR(lambda_max(d, gaussian_family), expected, 1e-14);
}

TEST(Lasso, LambdaMaxDegenerateBinomial) {
    Dataset d = testutil::random_standardized(50, 3, binomial_family, 1);
    d.y.setOnes();
    EXPECT_THROW(lambda_max(d, binomial_family), DataError);
}

TEST(Lasso, UnpenalizedBinomialMatchesNewtonOracle) {
    const Dataset d = testutil::random_standardized(200, 5, binomial_family, 17, 0.8);
    const LassoFit fit = fit_lasso(d, binomial_family, 0.0);
    ASSERT_TRUE(fit.converged);
    const Vector mle = oracle::newton_mle(oracle::Fam::logistic, d.X, d.y);
    EXPECT_LT((fit.xi_hat - mle).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LE(fit.kkt_residual, 1e-7);
    expect_monotone(fit);
}

TEST(Lasso, LambdaPathExamples) {
    const auto a = lambda_path(1.0, 3, 0.01);
    ASSERT_EQ(a.size(), 3u);
    EXPECT_NEAR(a[0], 1.0, 1e-15);
    EXPECT_NEAR(a[1], 0.1, 1e-15);
    EXPECT_NEAR(a[2], 0.01, 1e-15);
    const auto b = lambda_path(2.0, 2, 0.5);
    EXPECT_DOUBLE_EQ(b[0], 2.0);
    EXPECT_DOUBLE_EQ(b[1], 1.0);
    const auto c = lambda_path(1.0, 100, 1e-4);
    ASSERT_EQ(c.size(), 100u);
    const double r0 = c[1] / c[0];
    for (std::size_t k = 1; k < c.size(); ++k) EXPECT_NEAR(c[k] / c[k - 1], r0, 1e-12);
    EXPECT_THROW(lambda_path(1.0, 5, 1.0), DomainError);
    EXPECT_THROW(lambda_path(1.0, 5, 0.0), DomainError);
    EXPECT_THROW(lambda_path(1.0, 1, 0.5), DomainError);
}

TEST(Lasso, NegativeLambdaRejected) {
    const Dataset d = testutil::random_standardized(30, 3, gaussian_family, 2);
    EXPECT_THROW(fit_lasso(d, gaussian_family, -0.1), DomainError);
}

TEST(Lasso, DivergenceSurfacesWithLastIterate) {
    const Dataset d = testutil::random_standardized(60, 3, poisson_family, 6, 0.2);
    Vector warm = Vector::Zero(4);
    warm(0) = -20.0;
    LassoOptions opts;
    opts.max_backtracks = 0;
    try {
        fit_lasso(d, poisson_family, 0.01, warm, opts);
        FAIL() << "expected ConvergenceError";
    } catch (const ConvergenceError& e) {
        EXPECT_EQ(e.last_iterate().size(), 4);
        EXPECT_DOUBLE_EQ(e.last_iterate()(0), -20.0);
    }
    // With line search a poor (but less extreme) start still converges.
    warm(0) = -4.0;
    const LassoFit fit = fit_lasso(d, poisson_family, 0.01, warm);
    EXPECT_TRUE(fit.converged);
    expect_monotone(fit);
}

TEST(Lasso, PathFitsSatisfyKktAndMonotonicity) {
    for (GlmFamily f : {gaussian_family, binomial_family, poisson_family}) {
        const Dataset d = testutil::random_standardized(300, 20, f, 33);
        const auto grid = lambda_path(lambda_max(d, f), 30, 1e-3);
        const auto fits = fit_lasso_path(d, f, grid);
        for (const auto& fit : fits) {
            EXPECT_TRUE(fit.converged) << f.name() << " lambda=" << fit.lambda;
            EXPECT_LE(fit.kkt_residual, 1e-7) << f.name() << " lambda=" << fit.lambda;
            EXPECT_TRUE(std::isfinite(fit.objective));
            expect_monotone(fit);
        }
        EXPECT_EQ((fits.front().xi_hat.tail(d.p()).array() != 0.0).count(), 0);
    }
}

TEST(Lasso, WarmAndColdStartsAgree) {
    for (GlmFamily f : {binomial_family, poisson_family}) {
        const Dataset d = testutil::random_standardized(250, 15, f, 44);
        const double lambda = 0.05 * lambda_max(d, f);
        const LassoFit cold = fit_lasso(d, f, lambda);
        Vector warm = Vector::Constant(d.X.cols(), 0.3);
        const LassoFit warmed = fit_lasso(d, f, lambda, warm);
        EXPECT_NEAR(cold.objective, warmed.objective, 1e-6);
        EXPECT_LE(warmed.kkt_residual, 1e-7);
    }
}

TEST(Lasso, FitIsDeterministic) {
    const Dataset d = testutil::random_standardized(200, 12, binomial_family, 5);
    const LassoFit a = fit_lasso(d, binomial_family, 0.01);
    const LassoFit b = fit_lasso(d, binomial_family, 0.01);
    EXPECT_EQ(a.xi_hat, b.xi_hat);
    EXPECT_EQ(a.n_iter, b.n_iter);
}

TEST(CrossValidation, SingleLambdaGrid) {
    const Dataset d = testutil::random_standardized(100, 5, gaussian_family, 3);
    const std::vector<double> grid{0.05};
    const CvResult cv = cross_validate(d, gaussian_family, 5, grid, 1);
    EXPECT_EQ(cv.lambda_min, 0.05);
    EXPECT_EQ(cv.mean_deviance.size(), 1u);
    EXPECT_EQ(cv.fold_assignment.size(), 100u);
}

TEST(CrossValidation, BinomialFoldsAreStratified) {
    const Dataset d = testutil::random_standardized(97, 4, binomial_family, 12);
    const auto folds = make_folds(d.y, binomial_family, 10, 99);
    for (int k = 0; k < 10; ++k) {
        int ones = 0, zeros = 0;
        for (Index i = 0; i < d.n(); ++i) {
            if (folds[static_cast<std::size_t>(i)] != k) continue;
            (d.y(i) == 1.0 ? ones : zeros)++;
        }
        EXPECT_GT(ones, 0);
        EXPECT_GT(zeros, 0);
    }
    EXPECT_EQ(folds, make_folds(d.y, binomial_family, 10, 99));
    EXPECT_NE(folds, make_folds(d.y, binomial_family, 10, 100));
}

TEST(CrossValidation, DuplicatedRowsGiveSameDeviances) {
    const Dataset d = testutil::random_standardized(120, 6, binomial_family, 71);
    const auto grid = lambda_path(lambda_max(d, binomial_family), 20, 1e-2);
    const auto folds = make_folds(d.y, binomial_family, 5, 8);
    const CvResult single = cross_validate(d, binomial_family, folds, grid);

    Dataset doubled;
    doubled.X.resize(2 * d.n(), d.X.cols());
    doubled.y.resize(2 * d.n());
    std::vector<int> paired(2 * static_cast<std::size_t>(d.n()));
    for (Index i = 0; i < d.n(); ++i) {
        for (Index c = 0; c < 2; ++c) {
            doubled.X.row(2 * i + c) = d.X.row(i);
            doubled.y(2 * i + c) = d.y(i);
            paired[static_cast<std::size_t>(2 * i + c)] = folds[static_cast<std::size_t>(i)];
        }
    }
    doubled.col_names = d.col_names;
    doubled.standardization = d.standardization;
    const CvResult twice = cross_validate(doubled, binomial_family, paired, grid);
    for (std::size_t l = 0; l < grid.size(); ++l) {
        EXPECT_NEAR(single.mean_deviance[l], twice.mean_deviance[l], 1e-8);
        EXPECT_NEAR(single.se_deviance[l], twice.se_deviance[l], 1e-8);
    }
    EXPECT_EQ(single.lambda_min, twice.lambda_min);
}

TEST(CrossValidation, ReproducibleAcrossRunsAndWorkers) {
    const Dataset d = testutil::random_standardized(1000, 100, binomial_family, 2024, 0.4);
    const auto grid = lambda_path(lambda_max(d, binomial_family), 100, 1e-4);
    const CvResult a = cross_validate(d, binomial_family, 10, grid, 7);
    const CvResult b = cross_validate(d, binomial_family, 10, grid, 7, {}, 3);
    EXPECT_EQ(a.lambda_min, b.lambda_min);
    EXPECT_EQ(a.mean_deviance, b.mean_deviance);
    EXPECT_EQ(a.fold_assignment, b.fold_assignment);
    const auto it = std::find(a.lambda_grid.begin(), a.lambda_grid.end(), a.lambda_min);
    EXPECT_NE(it, a.lambda_grid.end());
}
