#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "ergofix/detail/random.hpp"
#include "ergofix/mean.hpp"
#include "ergofix/oracle.hpp"

using namespace ergofix;

namespace {

double indicator11(const Grid2D& g) { return g.i == 1 && g.j == 1 ? 1.0 : 0.0; }

} // namespace

TEST(FiniteMean, RejectsBadWeights) {
    EXPECT_THROW(FiniteMean({{Grid2D{1, 1}, 0.5}}), invalid_argument_error);
    EXPECT_THROW(FiniteMean({{Grid2D{1, 1}, 1.5}, {Grid2D{1, 2}, -0.5}}), invalid_argument_error);
    EXPECT_THROW(FiniteMean({{Grid2D{1, 1}, 0.5}, {Grid2D{1, 1}, 0.5}}), invalid_argument_error);
    EXPECT_THROW(FiniteMean({{Grid2D{0, 1}, 1.0}}), invalid_argument_error);
    EXPECT_THROW(FiniteMean({{Grid2D{1, 1}, 0.5}, {Time{1.0}, 0.5}}), invalid_argument_error);
    EXPECT_THROW(TimeMean(0.0), invalid_argument_error);
}

TEST(Cesaro2d, Construction) {
    const auto m1 = cesaro2d(1);
    ASSERT_EQ(m1.support().size(), 1u);
    EXPECT_EQ(std::get<Grid2D>(m1.support()[0].first), (Grid2D{1, 1}));
    EXPECT_EQ(m1.support()[0].second, 1.0);
    const auto m2 = cesaro2d(2);
    ASSERT_EQ(m2.support().size(), 4u);
    for (const auto& [s, w] : m2.support()) EXPECT_EQ(w, 0.25);
    EXPECT_DOUBLE_EQ(apply_mean(m2, [](const Grid2D& g) { return static_cast<double>(g.i + g.j); }), 3.0);
    EXPECT_THROW(cesaro2d(0), invalid_argument_error);
}

TEST(ApplyMean, Examples) {
    EXPECT_NEAR(apply_mean(cesaro2d(7), [](const Index&) { return 1.0; }), 1.0, 1e-15);
    EXPECT_NEAR(apply_mean(TimeMean(3.3), [](double) { return 1.0; }), 1.0, 1e-10);
    EXPECT_NEAR(apply_mean(TimeMean(2.0), [](double t) { return std::exp(-t); }, 1e-10), 0.432332358381693654,
                1e-10 * 2);
    EXPECT_EQ(apply_mean(cesaro2d(2), indicator11), 0.25);
    EXPECT_THROW(apply_mean(cesaro2d(2), [](const Grid2D&) { return std::nan(""); }), numeric_error);
}

TEST(ApplyMean, MeanAxiomsOnRandomFunctions) {
    detail::Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const auto n = 1 + static_cast<std::int64_t>(rng.below(12));
        const auto mu = cesaro2d(n);
        const double phase = rng.uniform(0, 6), amp = rng.uniform(0.1, 3);
        auto a = [&](const Grid2D& g) { return amp * std::sin(phase + 0.7 * g.i - 1.3 * g.j); };
        auto b = [&](const Grid2D& g) { return a(g) + std::abs(std::cos(0.3 * g.i * g.j)); };
        double lo = 1e300, hi = -1e300;
        for (const auto& [s, w] : mu.support()) {
            lo = std::min(lo, a(std::get<Grid2D>(s)));
            hi = std::max(hi, a(std::get<Grid2D>(s)));
        }
        const double va = apply_mean(mu, a);
        EXPECT_GE(va, lo - 1e-15);
        EXPECT_LE(va, hi + 1e-15);
        EXPECT_LE(va, apply_mean(mu, b) + 1e-15);

        const TimeMean tm(rng.uniform(0.5, 30));
        auto f = [&](double t) { return amp * std::cos(phase + t) * std::exp(-0.1 * t); };
        const double vf = apply_mean(tm, f);
        EXPECT_GE(vf, -amp - 1e-10);
        EXPECT_LE(vf, amp + 1e-10);
        EXPECT_LE(vf, apply_mean(tm, [&](double t) { return f(t) + 0.5; }) + 1e-10);
    }
}

TEST(TvDistance, Examples) {
    EXPECT_EQ(tv_distance(cesaro2d(3), cesaro2d(3)), 0.0);
    EXPECT_DOUBLE_EQ(tv_distance(cesaro2d(1), cesaro2d(2)), 1.5);
    // 2 - 2 * 1/2: the densities 1 on [0,1] and 1/2 on [0,2] differ by 1/2 on each unit.
    EXPECT_DOUBLE_EQ(tv_distance(TimeMean(1.0), TimeMean(2.0)), 1.0);
    EXPECT_THROW(tv_distance(Mean{cesaro2d(1)}, Mean{TimeMean(1.0)}), invalid_argument_error);
}

TEST(TvDistance, CesaroIdentityMatchesEnumeration) {
    for (std::int64_t n = 1; n <= 100; ++n) {
        const double expected = 2.0 * static_cast<double>(2 * n + 1) / static_cast<double>((n + 1) * (n + 1));
        EXPECT_NEAR(tv_distance(cesaro2d(n), cesaro2d(n + 1)), expected, 1e-12) << "n = " << n;
    }
    // Independent enumeration for small n: n^2 cells at |1/n^2 - 1/(n+1)^2| plus 2n+1 border cells.
    for (std::int64_t n = 1; n <= 6; ++n) {
        double manual = 0.0;
        const double a = 1.0 / static_cast<double>(n * n), b = 1.0 / static_cast<double>((n + 1) * (n + 1));
        for (std::int64_t i = 1; i <= n + 1; ++i)
            for (std::int64_t j = 1; j <= n + 1; ++j) manual += (i <= n && j <= n) ? std::abs(a - b) : b;
        EXPECT_NEAR(tv_distance(cesaro2d(n), cesaro2d(n + 1)), manual, 1e-14);
    }
}

TEST(TvDistance, TimeIdentity) {
    for (int n = 1; n <= 100; ++n)
        EXPECT_NEAR(tv_distance(TimeMean(n), TimeMean(n + 1)), 2.0 / (n + 1), 1e-12);
}

TEST(InvarianceDeficiency, Examples) {
    auto sat = FiniteSemigroup::saturating(3);
    const auto delta3 = FiniteMean::delta(sat->elem(3));
    for (std::int64_t s = 1; s <= 3; ++s) {
        auto a = [](const FiniteElem& e) { return static_cast<double>(e.label() * e.label()) - 0.3; };
        EXPECT_EQ(invariance_deficiency(delta3, sat->elem(s), a), 0.0);
    }
    EXPECT_DOUBLE_EQ(invariance_deficiency(cesaro2d(2), Grid2D{1, 1}, indicator11), 0.25);
    EXPECT_NEAR(invariance_deficiency(TimeMean(10.0), Time{1.0}, [](double t) { return std::exp(-t); }),
                0.0632091860599585439, 1e-10);
}

TEST(InvarianceDeficiency, DecaysLikeOneOverN) {
    auto ind = [](const Grid2D& g) { return g.i <= 2 ? 1.0 : 0.0; };
    auto expo = [](const Grid2D& g) { return std::exp(-0.1 * static_cast<double>(g.i + g.j)); };
    for (std::int64_t n : {10, 20, 40, 80, 160}) {
        const auto mu = cesaro2d(n);
        // shifting by (1, 2) moves at most 3n of n^2 cells
        EXPECT_LE(invariance_deficiency(mu, Grid2D{1, 2}, ind), 3.0 / static_cast<double>(n) + 1e-14);
        EXPECT_LE(invariance_deficiency(mu, Grid2D{1, 2}, expo), 3.0 / static_cast<double>(n) + 1e-14);
        EXPECT_LE(invariance_deficiency(TimeMean(static_cast<double>(n)), Time{2.0},
                                        [](double t) { return std::exp(-t); }),
                  2.0 / static_cast<double>(n) + 1e-10);
    }
}

TEST(SolveInvariantMean, Examples) {
    auto sat = FiniteSemigroup::saturating(3);
    const auto mu = solve_invariant_mean(*sat);
    ASSERT_EQ(mu.support().size(), 3u);
    EXPECT_NEAR(mu.support()[0].second, 0.0, 1e-12);
    EXPECT_NEAR(mu.support()[1].second, 0.0, 1e-12);
    EXPECT_NEAR(mu.support()[2].second, 1.0, 1e-12);

    auto z4 = FiniteSemigroup::cyclic(4);
    for (const auto& [s, w] : solve_invariant_mean(*z4).support()) EXPECT_NEAR(w, 0.25, 1e-12);

    auto single = FiniteSemigroup::create({7}, {{7}});
    const auto d = solve_invariant_mean(*single);
    EXPECT_EQ(d.support().size(), 1u);
    EXPECT_DOUBLE_EQ(d.support()[0].second, 1.0);
}

TEST(SolveInvariantMean, PassesBruteForceCheck) {
    std::vector<std::shared_ptr<const FiniteSemigroup>> sgs;
    for (std::int64_t m = 1; m <= 10; ++m) {
        sgs.push_back(FiniteSemigroup::saturating(m));
        sgs.push_back(FiniteSemigroup::cyclic(m));
        sgs.push_back(FiniteSemigroup::min_semilattice(m));
    }
    sgs.push_back(FiniteSemigroup::cyclic(64));
    sgs.push_back(FiniteSemigroup::saturating(64));
    // Z_3 x {0, 1} under (+, max): two idempotents, the invariant mean is not a point mass
    sgs.push_back(FiniteSemigroup::from_rule({0, 1, 2, 10, 11, 12}, [](std::int64_t a, std::int64_t b) {
        return 10 * std::max(a / 10, b / 10) + (a % 10 + b % 10) % 3;
    }));
    for (const auto& sg : sgs) {
        const auto mu = solve_invariant_mean(*sg);
        EXPECT_LE(oracle::verify_invariant_mean(*sg, mu), 1e-9) << "|S| = " << sg->size();
    }
}

TEST(IndicatorBound, Examples) {
    auto sat = FiniteSemigroup::saturating(3);
    const auto delta3 = FiniteMean::delta(sat->elem(3));
    auto r = indicator_bound_check(delta3, *sat, {{2, 3}, {3}});
    EXPECT_DOUBLE_EQ(r.alpha, 1.0);
    EXPECT_DOUBLE_EQ(r.mass, 1.0);
    EXPECT_TRUE(r.holds);

    r = indicator_bound_check(delta3, *sat, {{1, 2, 3}});
    EXPECT_DOUBLE_EQ(r.alpha, 1.0);
    EXPECT_DOUBLE_EQ(r.mass, 1.0);
    EXPECT_TRUE(r.holds);

    auto z4 = FiniteSemigroup::cyclic(4);
    const auto uni = solve_invariant_mean(*z4);
    r = indicator_bound_check(uni, *z4, {{0, 1, 2}, {1, 2, 3}});
    EXPECT_NEAR(r.alpha, 0.5, 1e-12);
    EXPECT_NEAR(r.mass, 0.5, 1e-12);
    EXPECT_TRUE(r.holds);

    EXPECT_THROW(indicator_bound_check(delta3, *sat, {{4}}), invalid_argument_error);
}

TEST(TranslateIntersection, Examples) {
    auto sat = FiniteSemigroup::saturating(3);
    auto z4 = FiniteSemigroup::cyclic(4);
    EXPECT_TRUE(translate_intersection(*sat, 1, {3}));
    EXPECT_TRUE(translate_intersection(*z4, 2, {0}));
    EXPECT_FALSE(translate_intersection(*sat, 3, {1}));
}

TEST(IndicatorBound, PositiveAlphaForcesTranslatesToMeetIntersection) {
    detail::Rng rng(2024);
    int positive = 0;
    for (int trial = 0; trial < 3000; ++trial) {
        const auto m = 2 + static_cast<std::int64_t>(rng.below(7));
        auto sg = rng.below(2) == 0 ? FiniteSemigroup::saturating(m) : FiniteSemigroup::cyclic(m);
        const auto mu = solve_invariant_mean(*sg);
        const auto k = 1 + rng.below(3);
        std::vector<std::vector<std::int64_t>> sets(k);
        for (auto& set : sets)
            for (auto label : sg->labels())
                if (rng.uniform() < 0.85) set.push_back(label);
        const auto r = indicator_bound_check(mu, *sg, sets);
        EXPECT_TRUE(r.holds);
        if (r.alpha <= 0.0) continue;
        ++positive;
        const auto inter = intersect_sets(*sg, sets);
        for (auto s0 : sg->labels()) EXPECT_TRUE(translate_intersection(*sg, s0, inter));
    }
    EXPECT_GT(positive, 100);
}
