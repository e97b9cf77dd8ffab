#pragma once

// Means on a commutative semigroup S: finitely supported weightings
// (including the double Cesaro means on N x N), uniform time averages on
// [0, t_n], and exact invariant means on finite tables.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "ergofix/detail/accumulate.hpp"
#include "ergofix/detail/simplex.hpp"
#include "ergofix/error.hpp"
#include "ergofix/quadrature.hpp"
#include "ergofix/semigroup.hpp"

namespace ergofix {

inline constexpr double default_quad_tol = 1e-10;

/// Probability weighting with finite support. Weights are nonnegative, sum
/// to one within 1e-12 and the support indices are pairwise distinct.
class FiniteMean {
public:
    using Entry = std::pair<Index, double>;

    FiniteMean() = default;

    explicit FiniteMean(std::vector<Entry> support) : support_(std::move(support)) {
        if (support_.empty()) throw invalid_argument_error("a mean needs nonempty support");
        detail::CompensatedSum total;
        for (const auto& [s, w] : support_) {
            if (!std::isfinite(w) || w < 0.0) throw invalid_argument_error("mean weights must be finite and >= 0");
            if (!is_valid(s)) throw invalid_argument_error("mean support contains an invalid index");
            if (s.index() != support_.front().first.index())
                throw invalid_argument_error("mean support mixes index variants");
            total.add(w);
        }
        if (std::abs(total.value() - 1.0) > 1e-12)
            throw invalid_argument_error("mean weights must sum to 1 (got " + std::to_string(total.value()) + ")");
        auto sorted = sorted_support();
        for (std::size_t k = 1; k < sorted.size(); ++k)
            if (!IndexLess{}(sorted[k - 1].first, sorted[k].first))
                throw invalid_argument_error("mean support indices must be distinct");
    }

    /// Point mass.
    static FiniteMean delta(Index s) { return FiniteMean({{std::move(s), 1.0}}); }

    const std::vector<Entry>& support() const { return support_; }
    IndexKind kind() const { return kind_of(support_.front().first); }

    std::vector<Entry> sorted_support() const {
        auto out = support_;
        std::sort(out.begin(), out.end(), [](const Entry& a, const Entry& b) { return IndexLess{}(a.first, b.first); });
        return out;
    }

private:
    std::vector<Entry> support_;
};

/// mu(a) = (1 / t_n) * integral of a over [0, t_n].
struct TimeMean {
    double horizon = 1.0;

    explicit TimeMean(double t_n) : horizon(t_n) {
        if (!(t_n > 0.0) || !std::isfinite(t_n)) throw invalid_argument_error("time mean horizon must be > 0");
    }
};

using Mean = std::variant<FiniteMean, TimeMean>;

/// Uniform weights 1/n^2 on {1..n}^2, listed j outer, i inner.
inline FiniteMean cesaro2d(std::int64_t n) {
    if (n < 1) throw invalid_argument_error("cesaro2d needs n >= 1");
    const double w = 1.0 / static_cast<double>(n * n);
    std::vector<FiniteMean::Entry> support;
    support.reserve(static_cast<std::size_t>(n * n));
    for (std::int64_t j = 1; j <= n; ++j)
        for (std::int64_t i = 1; i <= n; ++i) support.emplace_back(Grid2D{i, j}, w);
    return FiniteMean(std::move(support));
}

namespace detail {

template <class F>
double eval_finite(F& a, const Index& s) {
    double v;
    if constexpr (std::is_invocable_v<F&, const Index&>) {
        v = static_cast<double>(a(s));
    } else {
        v = std::visit(
            [&](const auto& c) -> double {
                if constexpr (std::is_invocable_v<F&, decltype(c)>) return static_cast<double>(a(c));
                else throw invalid_argument_error("function does not accept this index variant");
            },
            s);
    }
    if (!std::isfinite(v)) throw numeric_error("mean argument is not finite");
    return v;
}

template <class F>
double eval_time(F& a, double t) {
    double v;
    if constexpr (std::is_invocable_v<F&, double>) v = static_cast<double>(a(t));
    else if constexpr (std::is_invocable_v<F&, const Time&>) v = static_cast<double>(a(Time{t}));
    else if constexpr (std::is_invocable_v<F&, const Index&>) v = static_cast<double>(a(Index{Time{t}}));
    else throw invalid_argument_error("function does not accept a time index");
    if (!std::isfinite(v)) throw numeric_error("mean argument is not finite");
    return v;
}

inline std::size_t initial_panels_for(double length) {
    return 2 * static_cast<std::size_t>(std::max(1.0, std::ceil(length)));
}

} // namespace detail

/// sum_t w_t a(t), compensated, in support order.
template <class F>
double apply_mean(const FiniteMean& mu, F&& a) {
    detail::CompensatedSum acc;
    for (const auto& [s, w] : mu.support()) acc.add(w * detail::eval_finite(a, s));
    return acc.value();
}

/// (1 / t_n) * integral_0^{t_n} a(t) dt to relative tolerance quad_tol.
template <class F>
double apply_mean(const TimeMean& mu, F&& a, double quad_tol = default_quad_tol) {
    if (!(quad_tol > 0.0)) throw invalid_argument_error("quad_tol must be > 0");
    const double tn = mu.horizon;
    auto res = simpson_integrate([&](double t) { return detail::eval_time(a, t); }, 0.0, tn,
                                 [&](double cur) { return quad_tol * tn * std::max(1.0, std::abs(cur) / tn); },
                                 detail::initial_panels_for(tn));
    return res.integral / tn;
}

template <class F>
double apply_mean(const Mean& mu, F&& a, double quad_tol = default_quad_tol) {
    if (auto* f = std::get_if<FiniteMean>(&mu)) return apply_mean(*f, a);
    return apply_mean(std::get<TimeMean>(mu), a, quad_tol);
}

/// Dual-norm distance: L1 distance of weights over the union support.
inline double tv_distance(const FiniteMean& mu, const FiniteMean& nu) {
    const auto a = mu.sorted_support();
    const auto b = nu.sorted_support();
    IndexLess less;
    detail::CompensatedSum acc;
    std::size_t p = 0, q = 0;
    while (p < a.size() || q < b.size()) {
        if (q == b.size() || (p < a.size() && less(a[p].first, b[q].first))) {
            acc.add(a[p++].second);
        } else if (p == a.size() || less(b[q].first, a[p].first)) {
            acc.add(b[q++].second);
        } else {
            acc.add(std::abs(a[p++].second - b[q++].second));
        }
    }
    return acc.value();
}

/// Total variation of the uniform densities on [0, m] and [0, M]: 2 - 2m/M.
inline double tv_distance(const TimeMean& mu, const TimeMean& nu) {
    const double m = std::min(mu.horizon, nu.horizon);
    const double big = std::max(mu.horizon, nu.horizon);
    return 2.0 - 2.0 * m / big;
}

inline double tv_distance(const Mean& mu, const Mean& nu) {
    if (mu.index() != nu.index()) throw invalid_argument_error("tv_distance: means of different kinds");
    if (auto* f = std::get_if<FiniteMean>(&mu)) return tv_distance(*f, std::get<FiniteMean>(nu));
    return tv_distance(std::get<TimeMean>(mu), std::get<TimeMean>(nu));
}

/// |mu_t(a(t)) - mu_t(a(s + t))|.
template <class F>
double invariance_deficiency(const FiniteMean& mu, const Index& s, F&& a) {
    auto shifted = [&](const Index& t) { return detail::eval_finite(a, combine(s, t)); };
    return std::abs(apply_mean(mu, a) - apply_mean(mu, shifted));
}

template <class F>
double invariance_deficiency(const TimeMean& mu, const Index& s, F&& a, double quad_tol = default_quad_tol) {
    const auto* shift = std::get_if<Time>(&s);
    if (!shift) throw invalid_argument_error("time mean needs a Time shift");
    const double s0 = shift->t;
    auto shifted = [&](double t) { return detail::eval_time(a, s0 + t); };
    return std::abs(apply_mean(mu, a, quad_tol) - apply_mean(mu, shifted, quad_tol));
}

template <class F>
double invariance_deficiency(const Mean& mu, const Index& s, F&& a, double quad_tol = default_quad_tol) {
    if (auto* f = std::get_if<FiniteMean>(&mu)) return invariance_deficiency(*f, s, a);
    return invariance_deficiency(std::get<TimeMean>(mu), s, a, quad_tol);
}

/// Invariant mean on a finite commutative semigroup: weights w >= 0 with
/// sum 1 and, for every s and element e, w_e = sum_{t : s + t = e} w_t
/// (translation invariance on the indicator basis). Any feasible point of
/// that linear system is returned.
inline FiniteMean solve_invariant_mean(const FiniteSemigroup& sg) {
    const std::size_t n = sg.size();
    std::vector<std::vector<double>> rows;
    std::vector<double> rhs;
    rows.reserve(n * n + 1);
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t e = 0; e < n; ++e) {
            std::vector<double> row(n, 0.0);
            row[e] += 1.0;
            for (std::size_t t = 0; t < n; ++t)
                if (sg.op(s, t) == e) row[t] -= 1.0;
            rows.push_back(std::move(row));
            rhs.push_back(0.0);
        }
    }
    rows.emplace_back(n, 1.0);
    rhs.push_back(1.0);

    auto sol = detail::find_nonnegative_solution(rows, rhs);
    if (!sol) throw internal_error("invariant-mean linear system reported infeasible");

    auto w = std::move(*sol);
    double total = 0.0;
    for (auto& v : w) {
        if (v < 1e-14) v = 0.0;
        total += v;
    }
    if (!(total > 0.0)) throw internal_error("invariant-mean solution has zero mass");
    std::vector<FiniteMean::Entry> support;
    support.reserve(n);
    for (std::size_t p = 0; p < n; ++p) support.emplace_back(sg.elem_at(p), w[p] / total);
    return FiniteMean(std::move(support));
}

/// mu(I_A) for a set of element labels.
inline double indicator_mass(const FiniteMean& mu, const FiniteSemigroup& sg, const std::vector<std::int64_t>& set) {
    std::vector<char> in(sg.size(), 0);
    for (auto label : set) in[sg.position(label)] = 1;
    detail::CompensatedSum acc;
    for (const auto& [s, w] : mu.support()) {
        const auto* e = std::get_if<FiniteElem>(&s);
        if (!e || e->table.get() != &sg) throw invalid_argument_error("mean is not supported on this semigroup");
        if (in[e->pos]) acc.add(w);
    }
    return acc.value();
}

struct IndicatorBound {
    double alpha = 0.0; ///< sum_j mu(I_{A_j}) - k + 1
    double mass = 0.0;  ///< mu(I_{A_1 cap ... cap A_k})
    bool holds = false;
};

/// Intersection of label sets; every label must belong to sg.
inline std::vector<std::int64_t> intersect_sets(const FiniteSemigroup& sg,
                                                const std::vector<std::vector<std::int64_t>>& sets) {
    std::vector<int> count(sg.size(), 0);
    for (const auto& set : sets) {
        std::vector<char> seen(sg.size(), 0);
        for (auto label : set) {
            const auto p = sg.position(label);
            if (!seen[p]) ++count[p];
            seen[p] = 1;
        }
    }
    std::vector<std::int64_t> out;
    for (std::size_t p = 0; p < sg.size(); ++p)
        if (count[p] == static_cast<int>(sets.size())) out.push_back(sg.label(p));
    return out;
}

/// Checks mu(I_A) >= alpha for A the intersection of the given sets, with
/// alpha = sum_j mu(I_{A_j}) - k + 1 (vacuous when alpha <= 0).
inline IndicatorBound indicator_bound_check(const FiniteMean& mu, const FiniteSemigroup& sg,
                                            const std::vector<std::vector<std::int64_t>>& sets) {
    if (sets.empty()) throw invalid_argument_error("indicator_bound_check needs at least one set");
    detail::CompensatedSum alpha;
    for (const auto& set : sets) alpha.add(indicator_mass(mu, sg, set));
    alpha.add(1.0 - static_cast<double>(sets.size()));
    IndicatorBound out;
    out.alpha = alpha.value();
    out.mass = indicator_mass(mu, sg, intersect_sets(sg, sets));
    out.holds = out.alpha <= 0.0 || out.mass >= out.alpha - 1e-12;
    return out;
}

/// Whether {s0 + t : t in S} meets A.
inline bool translate_intersection(const FiniteSemigroup& sg, std::int64_t s0, const std::vector<std::int64_t>& set) {
    const auto p = sg.position(s0);
    std::vector<char> in(sg.size(), 0);
    for (auto label : set) in[sg.position(label)] = 1;
    for (std::size_t t = 0; t < sg.size(); ++t)
        if (in[sg.op(p, t)]) return true;
    return false;
}

} // namespace ergofix
