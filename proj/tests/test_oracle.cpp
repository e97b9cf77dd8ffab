#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "ergofix/builtins.hpp"
#include "ergofix/detail/random.hpp"
#include "ergofix/ergodic.hpp"
#include "ergofix/oracle.hpp"

using namespace ergofix;
using builtins::vec;

namespace {
constexpr double pi = std::numbers::pi;
}

TEST(RotationClosedForm, Examples) {
    const Vector a = oracle::rotation_cesaro_closed_form(pi / 2, pi / 2, 2, vec({1, 0}), Vector::Zero(2));
    EXPECT_NEAR(a[0], 0.0, 1e-15);
    EXPECT_NEAR(a[1], -0.5, 1e-15);
    const Vector x = vec({0.3, -0.7});
    EXPECT_EQ(oracle::rotation_cesaro_closed_form(0.0, 0.0, 17, x, Vector::Zero(2)), x);
    const Vector b = oracle::rotation_cesaro_closed_form(pi / 2, pi / 2, 1, vec({1, 0}), Vector::Zero(2));
    EXPECT_NEAR(b[0], -1.0, 1e-15);
    EXPECT_NEAR(b[1], 0.0, 1e-15);
    EXPECT_THROW(oracle::rotation_cesaro_closed_form(1, 1, 0, x, Vector::Zero(2)), invalid_argument_error);
}

TEST(RotationClosedForm, AgreesWithCesaroSums) {
    detail::Rng rng(1);
    for (int trial = 0; trial < 4; ++trial) {
        const double th = rng.uniform(-pi, pi), ph = rng.uniform(-pi, pi);
        const auto f = builtins::rotation_pair(th, ph);
        const auto& pair = std::get<CommutingPair>(f);
        for (std::int64_t n = 1; n <= 50; n += 7) {
            const Vector x = pair.domain().sample(rng);
            EXPECT_LE((apply_cesaro2d(pair, n, x).point -
                       oracle::rotation_cesaro_closed_form(th, ph, n, x, Vector::Zero(2)))
                          .norm(),
                      1e-12);
        }
    }
}

TEST(LinearFlowClosedForm, Examples) {
    const Matrix a = vec({0.0, 1.0}).asDiagonal().toDenseMatrix();
    const Vector v = oracle::linear_flow_mean_closed_form(a, 2.0, vec({1, 1}));
    EXPECT_NEAR(v[0], 1.0, 1e-15);
    EXPECT_NEAR(v[1], 0.4323323583816937, 1e-15);
    const Vector x = vec({0.2, -0.4});
    EXPECT_LE((oracle::linear_flow_mean_closed_form(Matrix::Zero(2, 2), 3.0, x) - x).norm(), 1e-15);
    const Vector s = oracle::linear_flow_mean_closed_form(Matrix::Identity(1, 1), 100.0, vec({1.0}));
    EXPECT_NEAR(s[0], 0.01, 1e-15);
    EXPECT_THROW(oracle::linear_flow_mean_closed_form((Matrix(2, 2) << 1, 1, 0, 1).finished(), 1.0, x),
                 invalid_argument_error);
    EXPECT_THROW(oracle::linear_flow_mean_closed_form(-Matrix::Identity(2, 2), 1.0, x), invalid_argument_error);
}

TEST(KernelProjection, Examples) {
    const Matrix a = vec({0.0, 1.0}).asDiagonal().toDenseMatrix();
    const Vector p = oracle::kernel_projection(a, vec({0.5, 0.8}));
    EXPECT_NEAR(p[0], 0.5, 1e-15);
    EXPECT_NEAR(p[1], 0.0, 1e-15);
    const Vector x = vec({0.1, 0.9});
    EXPECT_LE((oracle::kernel_projection(Matrix::Zero(2, 2), x) - x).norm(), 1e-15);
    EXPECT_LE(oracle::kernel_projection(Matrix::Identity(2, 2), x).norm(), 1e-15);
    // dense matrix with kernel spanned by (1, -1)/sqrt 2
    const Matrix b = (Matrix(2, 2) << 1, 1, 1, 1).finished();
    const Vector q = oracle::kernel_projection(b, vec({1, 0}));
    EXPECT_NEAR(q[0], 0.5, 1e-15);
    EXPECT_NEAR(q[1], -0.5, 1e-15);
}

TEST(VerifyInvariantMean, Examples) {
    auto sat = FiniteSemigroup::saturating(3);
    EXPECT_EQ(oracle::verify_invariant_mean(*sat, FiniteMean::delta(sat->elem(3))), 0.0);
    auto z4 = FiniteSemigroup::cyclic(4);
    std::vector<FiniteMean::Entry> uni;
    for (std::int64_t k = 0; k < 4; ++k) uni.emplace_back(z4->elem(k), 0.25);
    EXPECT_EQ(oracle::verify_invariant_mean(*z4, FiniteMean(uni)), 0.0);
    EXPECT_EQ(oracle::verify_invariant_mean(*sat, FiniteMean::delta(sat->elem(1))), 1.0);
}

TEST(FixedSet, BuiltinsAreFixedBySampling) {
    detail::Rng rng(6);
    for (const auto& f : {builtins::diag_flow({0.0, 1.0}), builtins::diag_flow({0.0, 0.0}), builtins::rotation_flow(0.8),
                          builtins::rotation_pair(0.3, 0.3)}) {
        const auto fixed = oracle::fixed_set_of(f);
        for (int k = 0; k < 50; ++k) {
            const Vector z = fixed.nearest(domain_of(f).sample(rng));
            const Index s = index_kind(f) == IndexKind::grid2d ? Index{Grid2D{3, 5}} : Index{Time{rng.uniform(0, 9)}};
            EXPECT_LE((act(f, s, z) - z).norm(), 1e-12);
        }
    }
}

TEST(FixedSet, DistanceToKernelAxis) {
    const auto fixed = oracle::fixed_set_of(builtins::diag_flow({0.0, 1.0}));
    EXPECT_NEAR(fixed.distance(vec({0.4, 0.6})), 0.6, 1e-15);
    EXPECT_EQ(fixed.distance(vec({-1.2, 0.0})), 0.0);
}
