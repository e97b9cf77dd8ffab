#pragma once

// Composite Simpson quadrature with interval halving, for scalar- and
// vector-valued integrands. Function values are reused across halvings.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <type_traits>

#include <Eigen/Dense>

#include "ergofix/error.hpp"

namespace ergofix {

template <class Value>
struct QuadratureResult {
    Value integral;
    double error_estimate = 0.0; ///< Richardson estimate, same units as the integral
    std::size_t panels = 0;
};

namespace detail {

inline double max_abs(double v) { return std::abs(v); }
inline double max_abs(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }
inline bool all_finite(double v) { return std::isfinite(v); }
inline bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

} // namespace detail

inline constexpr int max_quadrature_halvings = 20;

/// Integrates f over [a, b]. Stops once |S_2N - S_N| / 15 <= abs_tol(S_2N),
/// where abs_tol receives the current integral estimate. Returns the
/// Richardson-extrapolated value. Starts from `initial_panels` Simpson panels
/// (rounded up to even) and halves at most max_quadrature_halvings times.
template <class F, class TolFn>
auto simpson_integrate(F&& f, double a, double b, TolFn&& abs_tol, std::size_t initial_panels = 2)
    -> QuadratureResult<std::decay_t<decltype(f(a))>> {
    using Value = std::decay_t<decltype(f(a))>;
    if (!(b >= a) || !std::isfinite(a) || !std::isfinite(b))
        throw invalid_argument_error("quadrature interval must be finite with a <= b");

    auto eval = [&](double t) -> Value {
        Value v = f(t);
        if (!detail::all_finite(v)) throw numeric_error("non-finite integrand value at t = " + std::to_string(t));
        return v;
    };

    if (b == a) {
        Value zero = eval(a);
        zero *= 0.0;
        return {zero, 0.0, 0};
    }

    std::size_t n = std::max<std::size_t>(2, initial_panels + (initial_panels % 2));
    const double len = b - a;
    double h = len / static_cast<double>(n);

    // Simpson(n) = h/3 [ends + 4 odd + 2 even]
    Value ends = eval(a) + eval(b);
    Value odd = eval(a + h);
    odd *= 0.0;
    Value even = odd;
    for (std::size_t k = 1; k < n; ++k) {
        Value v = eval(a + len * static_cast<double>(k) / static_cast<double>(n));
        if (k % 2 == 1) odd += v;
        else even += v;
    }
    Value prev = (ends + 4.0 * odd + 2.0 * even) * (h / 3.0);

    for (int halving = 1; halving <= max_quadrature_halvings; ++halving) {
        even += odd;
        n *= 2;
        h = len / static_cast<double>(n);
        odd *= 0.0;
        for (std::size_t k = 1; k < n; k += 2)
            odd += eval(a + len * static_cast<double>(k) / static_cast<double>(n));
        Value cur = (ends + 4.0 * odd + 2.0 * even) * (h / 3.0);
        Value diff = cur - prev;
        const double err = detail::max_abs(diff) / 15.0;
        if (err <= abs_tol(cur)) {
            Value extrapolated = cur + diff / 15.0;
            return {extrapolated, err, n};
        }
        prev = cur;
    }
    throw numeric_error("quadrature did not converge after " + std::to_string(max_quadrature_halvings) +
                        " halvings on [" + std::to_string(a) + ", " + std::to_string(b) + "]");
}

} // namespace ergofix
