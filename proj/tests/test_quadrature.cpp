#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "ergofix/quadrature.hpp"

using namespace ergofix;

TEST(Simpson, PolynomialsUpToCubicAreExact) {
    auto res = simpson_integrate([](double t) { return 3 * t * t * t - t + 2; }, -1.0, 2.0, [](double) { return 1e-14; });
    // 3/4 (16 - 1) - (4 - 1)/2 + 2 * 3
    EXPECT_NEAR(res.integral, 11.25 - 1.5 + 6.0, 1e-12);
}

TEST(Simpson, ExponentialToTolerance) {
    auto res = simpson_integrate([](double t) { return std::exp(-t); }, 0.0, 100.0, [](double) { return 1e-10; }, 200);
    EXPECT_NEAR(res.integral, -std::expm1(-100.0), 1e-10);
    EXPECT_LE(res.error_estimate, 1e-10);
}

TEST(Simpson, VectorValued) {
    auto f = [](double t) {
        Eigen::VectorXd v(2);
        v << std::cos(t), std::sin(t);
        return v;
    };
    auto res = simpson_integrate(f, 0.0, std::numbers::pi, [](const Eigen::VectorXd&) { return 1e-12; }, 8);
    EXPECT_NEAR(res.integral[0], 0.0, 1e-11);
    EXPECT_NEAR(res.integral[1], 2.0, 1e-11);
}

TEST(Simpson, EmptyInterval) {
    auto res = simpson_integrate([](double t) { return t; }, 1.0, 1.0, [](double) { return 1e-12; });
    EXPECT_EQ(res.integral, 0.0);
}

TEST(Simpson, NonConvergenceAndNonFinite) {
    // Tolerance below double resolution cannot be met.
    EXPECT_THROW(simpson_integrate([](double t) { return std::sin(1e4 * t); }, 0.0, 1.0, [](double) { return 0.0; }),
                 numeric_error);
    EXPECT_THROW(simpson_integrate([](double t) { return 1.0 / t; }, 0.0, 1.0, [](double) { return 1e-8; }),
                 numeric_error);
    EXPECT_THROW(simpson_integrate([](double t) { return t; }, 1.0, 0.0, [](double) { return 1e-8; }),
                 invalid_argument_error);
}
