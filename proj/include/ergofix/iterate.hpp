#pragma once

// Iterations built on the mean operator:
//   * the Mann-type scheme x_{n+1} = a_n T_{mu_n} x_n + (1 - a_n) x_n,
//   * the retraction Q x = lim (T_mu / 2 + I / 2)^k T_mu x onto the common
//     fixed point set,
//   * fixed-point verdicts from ||T_{mu_n} z - z|| and
//     lambda = limsup_t ||T(t)z - z||.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ergofix/ergodic.hpp"
#include "ergofix/error.hpp"
#include "ergofix/mean.hpp"
#include "ergofix/operators.hpp"
#include "ergofix/semigroup.hpp"

namespace ergofix {

using AlphaSchedule = std::function<double(std::size_t)>;
using MeanSchedule = std::function<Mean(std::size_t)>;

inline AlphaSchedule constant_alpha(double a) {
    return [a](std::size_t) { return a; };
}

/// cesaro2d(n) for pairs, TimeMean(t_scale * n) for flows.
inline MeanSchedule default_mean_schedule(const OperatorFamily& family, double t_scale = 1.0) {
    if (std::holds_alternative<CommutingPair>(family))
        return [](std::size_t n) -> Mean { return cesaro2d(static_cast<std::int64_t>(n)); };
    if (!(t_scale > 0.0)) throw invalid_argument_error("time scale must be > 0");
    return [t_scale](std::size_t n) -> Mean { return TimeMean(t_scale * static_cast<double>(n)); };
}

struct MannConfig {
    AlphaSchedule alpha = constant_alpha(0.5);
    MeanSchedule means; ///< empty: default_mean_schedule(family)
    double tol = 1e-8;
    std::size_t max_iter = 10000;
    double quad_tol = default_quad_tol;
    /// consecutive steps with step_norm <= tol and residual <= tol before stopping
    std::size_t stop_window = 5;
};

struct TraceStep {
    std::size_t n = 0;
    double alpha = 0.0;
    Vector x;   ///< x_n
    Vector w;   ///< T_{mu_n} x_n
    double step_norm = 0.0; ///< ||x_{n+1} - x_n||
    double residual = 0.0;  ///< ||w_n - x_n||
    double mean_gap = 0.0;  ///< ||mu_n - mu_{n+1}||
};

struct Trace {
    std::vector<TraceStep> steps;
    bool converged = false;
    Vector final_point;
};

/// Numeric failure inside mann_iterate; carries the trace up to the failure.
class MannNumericError : public numeric_error {
public:
    MannNumericError(const std::string& what, Trace trace) : numeric_error(what), trace_(std::move(trace)) {}
    const Trace& trace() const { return trace_; }

private:
    Trace trace_;
};

namespace detail {

inline void validate_mann_config(const MannConfig& cfg) {
    if (!cfg.alpha) throw invalid_argument_error("alpha schedule is empty");
    if (!(cfg.tol > 0.0)) throw invalid_argument_error("tol must be > 0");
    if (cfg.max_iter < 1) throw invalid_argument_error("max_iter must be >= 1");
    if (!(cfg.quad_tol > 0.0)) throw invalid_argument_error("quad_tol must be > 0");
    if (cfg.stop_window < 1) throw invalid_argument_error("stop_window must be >= 1");
    // 0 < liminf a_n <= limsup a_n < 1, enforced uniformly on the horizon.
    for (std::size_t n = 1; n <= cfg.max_iter; ++n) {
        const double a = cfg.alpha(n);
        if (!(a >= 0.01 && a <= 0.99))
            throw invalid_argument_error("alpha_" + std::to_string(n) + " = " + std::to_string(a) +
                                         " is outside [0.01, 0.99]");
    }
}

} // namespace detail

/// Runs the Mann-type iteration from x1 until stop_window consecutive steps
/// have step_norm <= tol and residual <= tol, or max_iter steps.
inline Trace mann_iterate(const OperatorFamily& family, const MannConfig& cfg, const Vector& x1) {
    detail::validate_mann_config(cfg);
    detail::require_in_domain(family, x1);
    const MeanSchedule means = cfg.means ? cfg.means : default_mean_schedule(family);

    Trace trace;
    Vector x = x1;
    Mean mu = means(1);
    std::size_t streak = 0;
    for (std::size_t n = 1; n <= cfg.max_iter; ++n) {
        Mean mu_next = means(n + 1);
        TraceStep step;
        step.n = n;
        step.alpha = cfg.alpha(n);
        step.x = x;
        try {
            step.w = apply_mean_operator(family, mu, x, cfg.quad_tol).point;
        } catch (const numeric_error& e) {
            trace.final_point = x;
            throw MannNumericError(std::string("step ") + std::to_string(n) + ": " + e.what(), std::move(trace));
        }
        const Vector next = step.alpha * step.w + (1.0 - step.alpha) * x;
        step.residual = (step.w - x).norm();
        step.step_norm = (next - x).norm();
        step.mean_gap = tv_distance(mu, mu_next);
        if (!next.allFinite() || !std::isfinite(step.residual)) {
            trace.steps.push_back(std::move(step));
            trace.final_point = x;
            throw MannNumericError("non-finite iterate at step " + std::to_string(n), std::move(trace));
        }
        const bool small = step.step_norm <= cfg.tol && step.residual <= cfg.tol;
        trace.steps.push_back(std::move(step));
        x = next;
        // C is convex and T_mu maps into C; only rounding can push x out.
        streak = small ? streak + 1 : 0;
        if (streak >= cfg.stop_window) {
            trace.converged = true;
            break;
        }
        mu = std::move(mu_next);
    }
    trace.final_point = x;
    return trace;
}

/// Running minimum of the residuals ||w_k - x_k||, k <= n.
inline std::vector<double> mann_gap_diagnostic(const Trace& trace) {
    if (trace.steps.empty()) throw invalid_argument_error("trace is empty");
    std::vector<double> out;
    out.reserve(trace.steps.size());
    double m = std::numeric_limits<double>::infinity();
    for (const auto& s : trace.steps) {
        m = std::min(m, s.residual);
        out.push_back(m);
    }
    return out;
}

/// The retraction's inner averaged iteration did not settle.
class IterationLimitError : public numeric_error {
public:
    IterationLimitError(const std::string& what, Vector last) : numeric_error(what), last_(std::move(last)) {}
    const Vector& last_iterate() const { return last_; }

private:
    Vector last_;
};

/// cesaro2d(n) for pairs (mean_index must be integral), TimeMean(tau) for flows.
inline Mean surrogate_mean(const OperatorFamily& family, double mean_index) {
    if (!(mean_index > 0.0) || !std::isfinite(mean_index)) throw invalid_argument_error("mean index must be > 0");
    if (std::holds_alternative<CommutingPair>(family)) {
        if (mean_index != std::floor(mean_index)) throw invalid_argument_error("Cesaro mean index must be an integer");
        return cesaro2d(static_cast<std::int64_t>(mean_index));
    }
    return TimeMean(mean_index);
}

struct RetractionOptions {
    double inner_tol = 1e-12;
    std::size_t max_inner = 100000;
    double quad_tol = default_quad_tol;
    /// called after every inner step with (k, z_k, ||z_k - z_{k-1}||)
    std::function<void(std::size_t, const Vector&, double)> on_step;
};

/// Q x: z_0 = T_mu x, z_{k+1} = (T_mu z_k + z_k) / 2 until ||z_{k+1} - z_k|| <= inner_tol.
inline Vector retraction_apply(const OperatorFamily& family, double mean_index, const Vector& x,
                               const RetractionOptions& opts = {}) {
    if (!(opts.inner_tol > 0.0)) throw invalid_argument_error("inner_tol must be > 0");
    if (opts.max_inner < 1) throw invalid_argument_error("max_inner must be >= 1");
    const Mean mu = surrogate_mean(family, mean_index);
    const auto& c = domain_of(family);
    Vector z = apply_mean_operator(family, mu, x, opts.quad_tol).point;
    for (std::size_t k = 0; k < opts.max_inner; ++k) {
        // Averages of points of C stay in C up to rounding.
        const Vector tz = apply_mean_operator(family, mu, c.project(z), opts.quad_tol).point;
        const Vector next = 0.5 * tz + 0.5 * z;
        if (!next.allFinite()) throw numeric_error("non-finite retraction iterate");
        const double step = (next - z).norm();
        z = next;
        if (opts.on_step) opts.on_step(k + 1, z, step);
        if (step <= opts.inner_tol) return z;
    }
    throw IterationLimitError("retraction did not settle within " + std::to_string(opts.max_inner) + " iterations",
                              z);
}

inline Vector retraction_apply(const OperatorFamily& family, double mean_index, const Vector& x, double inner_tol,
                               std::size_t max_inner) {
    RetractionOptions opts;
    opts.inner_tol = inner_tol;
    opts.max_inner = max_inner;
    return retraction_apply(family, mean_index, x, opts);
}

namespace detail {

inline std::int64_t grid_horizon(double horizon) {
    if (!(horizon >= 1.0) || !std::isfinite(horizon)) throw invalid_argument_error("grid horizon must be >= 1");
    return static_cast<std::int64_t>(std::llround(horizon));
}

} // namespace detail

/// tail_limsup of t -> ||T(t)z - z|| over the tail grid.
inline double lambda_estimate(const OperatorFamily& family, const Vector& z, double horizon) {
    detail::require_in_domain(family, z);
    if (const auto* pair = std::get_if<CommutingPair>(&family)) {
        const auto h = detail::grid_horizon(horizon);
        PowerTable table(*pair, 2 * h, 2 * h, z);
        return tail_limsup_grid([&](const Grid2D& s) { return (table.at(s.i, s.j) - z).norm(); }, h);
    }
    return tail_limsup_time([&](const Time& s) { return (detail::flow_apply(family, s.t, z) - z).norm(); }, horizon);
}

/// max over a head grid of ||T(s)z - z|| - lambda (Grid2D: [1, h]^2;
/// Time: [0, h] at spacing 0.1).
inline double orbit_bound_excess(const OperatorFamily& family, const Vector& z, double lambda, double horizon) {
    detail::require_in_domain(family, z);
    double worst = -std::numeric_limits<double>::infinity();
    if (const auto* pair = std::get_if<CommutingPair>(&family)) {
        const auto h = detail::grid_horizon(horizon);
        PowerTable table(*pair, h, h, z);
        for (std::int64_t j = 1; j <= h; ++j)
            for (std::int64_t i = 1; i <= h; ++i) worst = std::max(worst, (table.at(i, j) - z).norm() - lambda);
        return worst;
    }
    if (!(horizon > 0.0)) throw invalid_argument_error("horizon must be > 0");
    const auto steps = static_cast<std::size_t>(std::ceil(10.0 * horizon - 1e-9));
    for (std::size_t k = 0; k <= steps; ++k) {
        const double t = horizon * static_cast<double>(k) / static_cast<double>(steps);
        worst = std::max(worst, (detail::flow_apply(family, t, z) - z).norm() - lambda);
    }
    return worst;
}

struct CharacterizeOptions {
    std::size_t n_max = 300;
    double tol = 1e-6;
    double horizon = 20.0;
    double quad_tol = default_quad_tol;
    /// empty: cesaro2d(n) / TimeMean(n), evaluated incrementally
    MeanSchedule schedule;
    std::size_t window = 5;
};

struct CharacterizationReport {
    std::vector<double> residual_sequence; ///< ||T_{mu_n} z - z||, n = 1..n_max
    double lambda_estimate = 0.0;
    double orbit_bound_excess = 0.0;
    bool verdict = false;
};

/// Decides whether z is a common fixed point from the ergodic residuals and
/// lambda. verdict = every residual <= tol (which covers the last-window
/// test) and lambda <= tol.
inline CharacterizationReport characterize(const OperatorFamily& family, const Vector& z,
                                           const CharacterizeOptions& opts = {}) {
    if (opts.n_max < 1) throw invalid_argument_error("n_max must be >= 1");
    if (!(opts.tol > 0.0)) throw invalid_argument_error("tol must be > 0");
    detail::require_in_domain(family, z);

    CharacterizationReport rep;
    rep.residual_sequence.reserve(opts.n_max);
    if (opts.schedule) {
        for (std::size_t n = 1; n <= opts.n_max; ++n)
            rep.residual_sequence.push_back(ergodic_residual(family, opts.schedule(n), z, opts.quad_tol));
    } else if (const auto* pair = std::get_if<CommutingPair>(&family)) {
        for (const auto& v : cesaro2d_sequence(*pair, static_cast<std::int64_t>(opts.n_max), z))
            rep.residual_sequence.push_back((v - z).norm());
    } else {
        std::vector<double> horizons(opts.n_max);
        for (std::size_t n = 1; n <= opts.n_max; ++n) horizons[n - 1] = static_cast<double>(n);
        for (const auto& r : time_mean_sequence(family, horizons, z, opts.quad_tol))
            rep.residual_sequence.push_back((r.point - z).norm());
    }

    rep.lambda_estimate = lambda_estimate(family, z, opts.horizon);
    rep.orbit_bound_excess = orbit_bound_excess(family, z, rep.lambda_estimate, opts.horizon);

    const std::size_t window = std::min(opts.window, rep.residual_sequence.size());
    bool last_ok = true;
    for (std::size_t k = rep.residual_sequence.size() - window; k < rep.residual_sequence.size(); ++k)
        last_ok = last_ok && rep.residual_sequence[k] <= opts.tol;
    const bool all_ok = std::all_of(rep.residual_sequence.begin(), rep.residual_sequence.end(),
                                    [&](double r) { return r <= opts.tol; });
    rep.verdict = last_ok && all_ok && rep.lambda_estimate <= opts.tol;
    return rep;
}

} // namespace ergofix
