#pragma once

// The mean operator T_mu x. For a finitely supported mean it is the convex
// combination sum_t w_t T(t)x; for the uniform time mean on [0, t_n] it is
// (1/t_n) * integral_0^{t_n} T(t)x dt.

#include <algorithm>
#include <cstdint>
#include <vector>

#include "ergofix/detail/accumulate.hpp"
#include "ergofix/error.hpp"
#include "ergofix/mean.hpp"
#include "ergofix/operators.hpp"
#include "ergofix/quadrature.hpp"

namespace ergofix {

struct ErgodicResult {
    Vector point;
    double quad_error_estimate = 0.0; ///< 0 for finite sums
};

/// sum over the support of w_t T(t)x, accumulated in support order.
inline ErgodicResult apply_finite_mean(const OperatorFamily& family, const FiniteMean& mu, const Vector& x) {
    detail::require_in_domain(family, x);
    if (mu.kind() != index_kind(family))
        throw invalid_argument_error(std::string("mean is indexed by ") + to_string(mu.kind()) + ", family by " +
                                     to_string(index_kind(family)));
    detail::CompensatedVectorSum acc(x.size());

    if (const auto* pair = std::get_if<CommutingPair>(&family)) {
        std::int64_t imax = 1, jmax = 1;
        for (const auto& [s, w] : mu.support()) {
            const auto& g = std::get<Grid2D>(s);
            imax = std::max(imax, g.i);
            jmax = std::max(jmax, g.j);
        }
        // Dense supports (Cesaro blocks) share powers through a table.
        if (imax * jmax <= 4 * static_cast<std::int64_t>(mu.support().size()) + 1024) {
            PowerTable table(*pair, imax, jmax, x);
            for (const auto& [s, w] : mu.support()) {
                const auto& g = std::get<Grid2D>(s);
                acc.add(w * table.at(g.i, g.j));
            }
            return {acc.value(), 0.0};
        }
    }
    for (const auto& [s, w] : mu.support()) acc.add(w * detail::act_unchecked(family, s, x));
    return {acc.value(), 0.0};
}

/// (1/n^2) sum_{i,j=1}^n T^i U^j x with cached U-powers; same operation
/// sequence and summation order (j outer, i inner) as apply_finite_mean on
/// cesaro2d(n).
inline ErgodicResult apply_cesaro2d(const CommutingPair& pair, std::int64_t n, const Vector& x) {
    if (n < 1) throw invalid_argument_error("apply_cesaro2d needs n >= 1");
    if (!pair.domain().contains(x)) throw domain_error("point lies outside the domain");
    const double w = 1.0 / static_cast<double>(n * n);
    detail::CompensatedVectorSum acc(x.size());
    Vector col = x;
    for (std::int64_t j = 1; j <= n; ++j) {
        col = pair.u()(col);
        Vector y = col;
        for (std::int64_t i = 1; i <= n; ++i) {
            y = pair.t()(y);
            acc.add(w * y);
        }
    }
    return {acc.value(), 0.0};
}

/// T_{mu_n} x for n = 1..n_max in O(n_max^2) map applications: each step
/// adds only the new border cells of the (n+1) x (n+1) block. Border cells
/// reach T^i U^j x through a different (commuting) application order than
/// apply_cesaro2d, so values agree to rounding, not bitwise.
inline std::vector<Vector> cesaro2d_sequence(const CommutingPair& pair, std::int64_t n_max, const Vector& x) {
    if (n_max < 1) throw invalid_argument_error("cesaro2d_sequence needs n_max >= 1");
    if (!pair.domain().contains(x)) throw domain_error("point lies outside the domain");
    std::vector<Vector> out;
    out.reserve(static_cast<std::size_t>(n_max));
    detail::CompensatedVectorSum acc(x.size());

    // row[j-1] = T^n U^j x, col[i-1] = T^i U^n x
    const Vector first = pair.t()(pair.u()(x));
    std::vector<Vector> row{first}, col{first};
    acc.add(first);
    out.push_back(acc.value());
    for (std::int64_t n = 1; n < n_max; ++n) {
        const Vector corner = pair.t()(pair.u()(col.back()));
        std::vector<Vector> next_row, next_col;
        next_row.reserve(row.size() + 1);
        next_col.reserve(col.size() + 1);
        for (const auto& v : row) {
            next_row.push_back(pair.t()(v));
            acc.add(next_row.back());
        }
        for (const auto& v : col) {
            next_col.push_back(pair.u()(v));
            acc.add(next_col.back());
        }
        acc.add(corner);
        next_row.push_back(corner);
        next_col.push_back(corner);
        row = std::move(next_row);
        col = std::move(next_col);
        const double m = static_cast<double>(n + 1);
        out.push_back(acc.value() / (m * m));
    }
    return out;
}

namespace detail {

inline Vector flow_apply(const OperatorFamily& family, double t, const Vector& x) {
    if (const auto* lin = std::get_if<LinearFlow>(&family)) return lin->apply(t, x);
    if (const auto* rot = std::get_if<RotationFlow>(&family)) return rot->apply(t, x);
    throw invalid_argument_error("time means need a LinearFlow or RotationFlow family");
}

inline void require_flow(const OperatorFamily& family) {
    if (std::holds_alternative<CommutingPair>(family))
        throw invalid_argument_error("time means need a LinearFlow or RotationFlow family");
}

} // namespace detail

/// (1/t_n) * integral_0^{t_n} T(t)x dt by componentwise composite Simpson
/// with halving; quad_error_estimate <= quad_tol * (1 + ||x||).
inline ErgodicResult apply_time_mean(const OperatorFamily& family, double t_n, const Vector& x,
                                     double quad_tol = default_quad_tol) {
    detail::require_flow(family);
    detail::require_in_domain(family, x);
    if (!(t_n > 0.0) || !std::isfinite(t_n)) throw invalid_argument_error("time mean horizon must be > 0");
    if (!(quad_tol > 0.0)) throw invalid_argument_error("quad_tol must be > 0");
    const double scale = 1.0 + x.norm();
    auto res = simpson_integrate([&](double t) { return detail::flow_apply(family, t, x); }, 0.0, t_n,
                                 [&](const Vector&) { return quad_tol * scale * t_n; },
                                 detail::initial_panels_for(t_n));
    return {res.integral / t_n, res.error_estimate / t_n};
}

/// Time means for an increasing list of horizons, integrating only the new
/// piece [t_{k-1}, t_k] at each step.
inline std::vector<ErgodicResult> time_mean_sequence(const OperatorFamily& family, const std::vector<double>& horizons,
                                                     const Vector& x, double quad_tol = default_quad_tol) {
    detail::require_flow(family);
    detail::require_in_domain(family, x);
    if (!(quad_tol > 0.0)) throw invalid_argument_error("quad_tol must be > 0");
    const double scale = 1.0 + x.norm();
    std::vector<ErgodicResult> out;
    out.reserve(horizons.size());
    detail::CompensatedVectorSum integral(x.size());
    double err = 0.0;
    double prev = 0.0;
    for (double t : horizons) {
        if (!(t > prev) || !std::isfinite(t)) throw invalid_argument_error("horizons must be positive and increasing");
        const double len = t - prev;
        auto piece = simpson_integrate([&](double s) { return detail::flow_apply(family, s, x); }, prev, t,
                                       [&](const Vector&) { return quad_tol * scale * len; },
                                       detail::initial_panels_for(len));
        integral.add(piece.integral);
        err += piece.error_estimate;
        out.push_back({integral.value() / t, err / t});
        prev = t;
    }
    return out;
}

inline ErgodicResult apply_mean_operator(const OperatorFamily& family, const Mean& mu, const Vector& x,
                                         double quad_tol = default_quad_tol) {
    if (const auto* f = std::get_if<FiniteMean>(&mu)) return apply_finite_mean(family, *f, x);
    return apply_time_mean(family, std::get<TimeMean>(mu).horizon, x, quad_tol);
}

/// ||T_mu z - z||.
inline double ergodic_residual(const OperatorFamily& family, const Mean& mu, const Vector& z,
                               double quad_tol = default_quad_tol) {
    return (apply_mean_operator(family, mu, z, quad_tol).point - z).norm();
}

} // namespace ergofix
