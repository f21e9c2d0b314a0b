#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "hdinf/error.hpp"
#include "hdinf/glm_family.hpp"

using namespace hdinf;

namespace {
constexpr GlmFamily kFamilies[] = {gaussian_family, binomial_family, poisson_family};
}

TEST(GlmFamily, LossExamples) {
    EXPECT_DOUBLE_EQ(loss(gaussian_family, 0.0, 0.0), 0.0);
    EXPECT_NEAR(loss(binomial_family, 1.0, 0.0), std::log(2.0), 1e-15);
    EXPECT_DOUBLE_EQ(loss(poisson_family, 2.0, 0.0), 1.0);
}

TEST(GlmFamily, FirstDerivativeExamples) {
    EXPECT_DOUBLE_EQ(dloss(gaussian_family, 3.0, 3.0), 0.0);
    EXPECT_DOUBLE_EQ(dloss(binomial_family, 1.0, 0.0), -0.5);
    EXPECT_NEAR(dloss(poisson_family, 0.0, 1.0), 2.718281828459045, 1e-15);
}

TEST(GlmFamily, SecondDerivativeExamples) {
    EXPECT_DOUBLE_EQ(d2loss(gaussian_family, 17.3), 1.0);
    EXPECT_DOUBLE_EQ(d2loss(binomial_family, 0.0), 0.25);
    // e^2 / (1 + e^2)^2 evaluated at 40 digits.
    EXPECT_NEAR(d2loss(binomial_family, 2.0), 0.10499358540350651735, 1e-16);
}

TEST(GlmFamily, NonFiniteArgumentsAreNamed) {
    const double inf = std::numeric_limits<double>::infinity();
    try {
        loss(binomial_family, 1.0, inf);
        FAIL() << "expected DomainError";
    } catch (const DomainError& e) {
        EXPECT_NE(std::string(e.what()).find("'a'"), std::string::npos);
    }
    try {
        dloss(poisson_family, std::nan(""), 0.0);
        FAIL() << "expected DomainError";
    } catch (const DomainError& e) {
        EXPECT_NE(std::string(e.what()).find("'y'"), std::string::npos);
    }
    EXPECT_THROW(d2loss(gaussian_family, -inf), DomainError);
}

TEST(GlmFamily, ParseFamily) {
    EXPECT_EQ(parse_family("binomial"), binomial_family);
    EXPECT_EQ(parse_family("poisson").name(), "poisson");
    EXPECT_THROW(parse_family("gamma"), DomainError);
}

TEST(GlmFamily, FiniteDifferencesMatchDerivatives) {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> eta(-8.0, 8.0);
    const double h = 1e-5;
    for (GlmFamily f : kFamilies) {
        for (int k = 0; k < 1000; ++k) {
            const double a = eta(gen);
            double y = 0.0;
            switch (f.kind()) {
            case FamilyKind::gaussian: y = eta(gen); break;
            case FamilyKind::binomial: y = (k % 2); break;
            case FamilyKind::poisson: y = k % 7; break;
            }
            const double fd1 = (loss(f, y, a + h) - loss(f, y, a - h)) / (2 * h);
            const double d1 = dloss(f, y, a);
            EXPECT_LE(std::abs(fd1 - d1), 1e-6 * std::max(1.0, std::abs(d1))) << f.name() << " a=" << a;
            const double fd2 = (dloss(f, y, a + h) - dloss(f, y, a - h)) / (2 * h);
            const double d2 = d2loss(f, a);
            EXPECT_LE(std::abs(fd2 - d2), 1e-5 * std::max(1.0, std::abs(d2))) << f.name() << " a=" << a;
        }
    }
}

TEST(GlmFamily, CurvaturePositiveOnClampedRange) {
    for (GlmFamily f : kFamilies) {
        for (double a = -40.0; a <= 40.0; a += 0.25) EXPECT_GT(d2loss(f, a), 0.0) << f.name() << " " << a;
    }
}

TEST(GlmFamily, BinomialLabelFlipSymmetry) {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> eta(-25.0, 25.0);
    for (int k = 0; k < 500; ++k) {
        const double a = eta(gen);
        for (double y : {0.0, 1.0}) {
            EXPECT_NEAR(loss(binomial_family, y, a), loss(binomial_family, 1.0 - y, -a),
                        1e-12 * std::max(1.0, std::abs(a)));
        }
    }
}

TEST(GlmFamily, BinomialStableForLargePredictors) {
    EXPECT_TRUE(std::isfinite(loss(binomial_family, 0.0, 700.0)));
    EXPECT_NEAR(binomial_family.b(-30.0), std::exp(-30.0), 1e-25);
    EXPECT_NEAR(binomial_family.b(30.0), 30.0 + std::exp(-30.0), 1e-12);
    // Clamped: beyond +-30 the mean saturates at its value at the boundary.
    EXPECT_EQ(binomial_family.b_dot(100.0), binomial_family.b_dot(30.0));
    EXPECT_EQ(poisson_family.b_ddot(-1000.0), std::exp(-30.0));
}
