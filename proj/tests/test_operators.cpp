#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "ergofix/builtins.hpp"
#include "ergofix/detail/random.hpp"
#include "ergofix/operators.hpp"

using namespace ergofix;
using builtins::vec;

namespace {

constexpr double pi = std::numbers::pi;

struct Named {
    const char* name;
    OperatorFamily family;
};

std::vector<Named> all_builtins() {
    return {
        {"rotation_pair_half_pi", builtins::rotation_pair(pi / 2, pi / 2)},
        {"rotation_pair_golden", builtins::rotation_pair(builtins::golden_angle, builtins::golden_angle)},
        {"contraction_pair", builtins::contraction_pair()},
        {"projection_rotation_pair", builtins::projection_rotation_pair(0.7)},
        {"linear_flow_diag01", builtins::diag_flow({0.0, 1.0})},
        {"linear_flow_dense", builtins::linear_flow((Matrix(3, 3) << 2, 1, 0, 1, 2, 0, 0, 0, 0).finished())},
        {"scalar_decay", builtins::scalar_decay_flow()},
        {"rotation_flow", builtins::rotation_flow(pi / 2)},
    };
}

Index sample_index(const OperatorFamily& f, detail::Rng& rng) {
    if (index_kind(f) == IndexKind::grid2d)
        return Grid2D{1 + static_cast<std::int64_t>(rng.below(6)), 1 + static_cast<std::int64_t>(rng.below(6))};
    return Time{rng.uniform(0.0, 5.0)};
}

} // namespace

TEST(Domain, ProjectionIsIdempotentAndNonexpansive) {
    const std::vector<Domain> domains{Domain::ball(vec({1.0, -1.0}), 0.5), Domain::box(vec({-1, 0}), vec({2, 1}))};
    detail::Rng rng(3);
    for (const auto& c : domains) {
        for (int k = 0; k < 500; ++k) {
            const Vector x = vec({rng.uniform(-4, 4), rng.uniform(-4, 4)});
            const Vector y = vec({rng.uniform(-4, 4), rng.uniform(-4, 4)});
            const Vector px = c.project(x);
            EXPECT_TRUE(c.contains(px));
            EXPECT_LE((c.project(px) - px).norm(), 1e-15);
            EXPECT_LE((px - c.project(y)).norm(), (x - y).norm() + 1e-14);
            EXPECT_TRUE(c.contains(c.sample(rng)));
        }
    }
    EXPECT_THROW(Domain::ball(vec({0, 0}), 0.0), invalid_argument_error);
    EXPECT_THROW(Domain::box(vec({0, 1}), vec({1, 1})), invalid_argument_error);
}

TEST(NonexpansiveMap, Validation) {
    EXPECT_THROW(NonexpansiveMap::affine(2.0 * Matrix::Identity(2, 2), Vector::Zero(2)), invalid_argument_error);
    EXPECT_THROW(NonexpansiveMap::rotation(0.3, Vector::Zero(3)), invalid_argument_error);
    EXPECT_NO_THROW(NonexpansiveMap::affine(0.5 * Matrix::Identity(2, 2), vec({0.1, 0.2})));
}

TEST(CommutingPair, RejectsNonCommutingMaps) {
    const auto c = Domain::ball(Vector::Zero(2), 2.0);
    // rotations about different centers do not commute
    EXPECT_THROW(CommutingPair(NonexpansiveMap::rotation(0.5), NonexpansiveMap::rotation(0.5, vec({0.3, 0.0})), c),
                 invalid_argument_error);
    // a map that leaves C
    EXPECT_THROW(CommutingPair(NonexpansiveMap::affine(Matrix::Identity(2, 2), vec({1.5, 0})),
                               NonexpansiveMap::identity(2), c),
                 invalid_argument_error);
}

TEST(LinearFlow, Validation) {
    EXPECT_THROW(builtins::linear_flow((Matrix(2, 2) << 1, 2, 0, 1).finished()), invalid_argument_error);
    EXPECT_THROW(builtins::diag_flow({-1.0, 1.0}), invalid_argument_error);
}

TEST(Act, Examples) {
    const auto rf = builtins::rotation_flow(pi / 2);
    const Vector r = act(rf, Time{1.0}, vec({1, 0}));
    EXPECT_NEAR(r[0], 0.0, 1e-15);
    EXPECT_NEAR(r[1], 1.0, 1e-15);

    const auto lf = builtins::diag_flow({0.0, 1.0});
    const Vector l = act(lf, Time{2.0}, vec({1, 1}));
    EXPECT_NEAR(l[0], 1.0, 1e-15);
    EXPECT_NEAR(l[1], 0.1353352832366127, 1e-15);

    const auto pair = builtins::rotation_pair(pi / 2, pi / 2);
    const Vector p = act(pair, Grid2D{1, 1}, vec({1, 0}));
    EXPECT_NEAR(p[0], -1.0, 1e-15);
    EXPECT_NEAR(p[1], 0.0, 1e-15);
}

TEST(Act, Errors) {
    const auto pair = builtins::rotation_pair(pi / 2, pi / 2);
    EXPECT_THROW(act(pair, Time{1.0}, vec({0, 0})), invalid_argument_error);
    EXPECT_THROW(act(pair, Grid2D{1, 1}, vec({3, 0})), domain_error);
    EXPECT_THROW(act(pair, Grid2D{1, 1}, vec({0, 0, 0})), invalid_argument_error);
    const auto lf = builtins::diag_flow({0.0, 1.0});
    EXPECT_THROW(act(lf, Grid2D{1, 1}, vec({0, 0})), invalid_argument_error);
}

TEST(CheckNonexpansive, Builtins) {
    for (const auto& [name, f] : all_builtins()) {
        detail::Rng rng(99);
        for (int k = 0; k < 5; ++k) EXPECT_LE(check_nonexpansive(f, sample_index(f, rng), 1000, 17 + k), 1e-12) << name;
    }
    // scaled identity wrapped as a pair: a strict contraction
    const auto half = CommutingPair(NonexpansiveMap::affine(0.5 * Matrix::Identity(2, 2), Vector::Zero(2)),
                                    NonexpansiveMap::identity(2), Domain::ball(Vector::Zero(2), 1.0));
    EXPECT_LE(check_nonexpansive(half, Grid2D{1, 1}, 1000, 5), 1e-12);
}

TEST(CheckSemigroupLaw, Builtins) {
    for (const auto& [name, f] : all_builtins()) {
        detail::Rng rng(5);
        for (int k = 0; k < 5; ++k) {
            const Index s = sample_index(f, rng), t = sample_index(f, rng);
            EXPECT_LE(check_semigroup_law(f, s, t, 100, 3 + k), 1e-10) << name;
        }
    }
    EXPECT_LE(check_semigroup_law(builtins::diag_flow({0.0, 1.0}), Time{1.0}, Time{2.0}, 100, 1), 1e-10);
    EXPECT_LE(check_semigroup_law(builtins::rotation_pair(0.4, 1.1), Grid2D{1, 2}, Grid2D{2, 1}, 100, 1), 1e-12);
}

TEST(CheckSemigroupLaw, ZeroDefectAtFixedPoint) {
    const auto f = builtins::rotation_pair(0.4, 1.1);
    const Vector z = Vector::Zero(2);
    const Index s = Grid2D{3, 2};
    EXPECT_EQ((act(f, combine(s, s), z) - act(f, s, act(f, s, z))).norm(), 0.0);
}

TEST(Families, DomainPreservation) {
    for (const auto& [name, f] : all_builtins()) {
        detail::Rng rng(8);
        const auto& c = domain_of(f);
        for (int k = 0; k < 1000; ++k) EXPECT_TRUE(c.contains(act(f, sample_index(f, rng), c.sample(rng)))) << name;
    }
}

TEST(Families, StrongContinuity) {
    const double h = 1e-6;
    const auto lf = builtins::linear_flow((Matrix(2, 2) << 2, 1, 1, 2).finished());
    const auto rf = builtins::rotation_flow(1.7);
    detail::Rng rng(4);
    for (int k = 0; k < 200; ++k) {
        const double t = rng.uniform(0, 5);
        const Vector x = domain_of(lf).sample(rng);
        const double bound_l = std::get<LinearFlow>(lf).operator_norm() * h * x.norm();
        EXPECT_LE((act(lf, Time{t + h}, x) - act(lf, Time{t}, x)).norm(), bound_l + 1e-15);
        EXPECT_LE((act(rf, Time{t + h}, x) - act(rf, Time{t}, x)).norm(), 1.7 * h * x.norm() + 1e-15);
    }
}

TEST(PowerTable, MatchesRepeatedApplication) {
    const auto f = builtins::rotation_pair(0.3, 0.9);
    const auto& pair = std::get<CommutingPair>(f);
    const Vector x = vec({0.4, -0.2});
    PowerTable table(pair, 5, 7, x);
    for (std::int64_t i = 1; i <= 5; ++i)
        for (std::int64_t j = 1; j <= 7; ++j) EXPECT_EQ(table.at(i, j), pair.power(i, j, x));
}
