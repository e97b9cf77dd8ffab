#pragma once

// Feasibility for { x >= 0 : A x = b } with a dense Phase-I simplex.
// The equality system is row-reduced first so redundant rows (the invariant
// mean system has |S|^2 of them for |S| unknowns) never reach the tableau.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "ergofix/error.hpp"

namespace ergofix::detail {

inline constexpr double lp_pivot_tol = 1e-10;

/// Gauss-Jordan elimination with partial pivoting. Returns the independent
/// rows of [A | b], or nullopt when the system is inconsistent.
inline std::optional<std::vector<std::vector<double>>> reduce_rows(std::vector<std::vector<double>> rows,
                                                                   const std::vector<double>& rhs) {
    if (rows.size() != rhs.size()) throw invalid_argument_error("row/rhs count mismatch");
    if (rows.empty()) return std::vector<std::vector<double>>{};
    const std::size_t n = rows.front().size();
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != n) throw invalid_argument_error("ragged constraint matrix");
        rows[r].push_back(rhs[r]);
    }

    std::size_t rank = 0;
    for (std::size_t col = 0; col < n && rank < rows.size(); ++col) {
        std::size_t best = rank;
        for (std::size_t r = rank + 1; r < rows.size(); ++r)
            if (std::abs(rows[r][col]) > std::abs(rows[best][col])) best = r;
        if (std::abs(rows[best][col]) <= lp_pivot_tol) continue;
        std::swap(rows[rank], rows[best]);
        const double piv = rows[rank][col];
        for (auto& v : rows[rank]) v /= piv;
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (r == rank) continue;
            const double f = rows[r][col];
            if (f == 0.0) continue;
            for (std::size_t c = col; c <= n; ++c) rows[r][c] -= f * rows[rank][c];
            rows[r][col] = 0.0;
        }
        ++rank;
    }
    for (std::size_t r = rank; r < rows.size(); ++r)
        if (std::abs(rows[r][n]) > 1e-9) return std::nullopt;
    rows.resize(rank);
    return rows;
}

/// Some x >= 0 with A x = b, or nullopt if none exists.
inline std::optional<std::vector<double>> find_nonnegative_solution(const std::vector<std::vector<double>>& a,
                                                                    const std::vector<double>& b) {
    if (a.empty()) return std::nullopt;
    const std::size_t n = a.front().size();
    auto reduced = reduce_rows(a, b);
    if (!reduced) return std::nullopt;
    auto& rows = *reduced;
    const std::size_t m = rows.size();
    if (m == 0) return std::vector<double>(n, 0.0);

    // Tableau columns: n structural, m artificial, then rhs.
    const std::size_t width = n + m + 1;
    std::vector<std::vector<double>> tab(m + 1, std::vector<double>(width, 0.0));
    std::vector<std::size_t> basis(m);
    for (std::size_t r = 0; r < m; ++r) {
        const double sign = rows[r][n] < 0.0 ? -1.0 : 1.0;
        for (std::size_t c = 0; c < n; ++c) tab[r][c] = sign * rows[r][c];
        tab[r][n + r] = 1.0;
        tab[r][width - 1] = sign * rows[r][n];
        basis[r] = n + r;
    }
    // Objective row: minimize the sum of artificials, written in reduced form.
    auto& obj = tab[m];
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < width; ++c)
            if (c < n || c == width - 1) obj[c] -= tab[r][c];

    const std::size_t max_pivots = 50 * (n + m) + 1000;
    for (std::size_t it = 0; it < max_pivots; ++it) {
        // Bland: lowest-index improving column.
        std::size_t enter = width;
        for (std::size_t c = 0; c + 1 < width; ++c)
            if (obj[c] < -1e-12) {
                enter = c;
                break;
            }
        if (enter == width) break;

        std::size_t leave = m;
        double best_ratio = std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < m; ++r) {
            if (tab[r][enter] <= lp_pivot_tol) continue;
            const double ratio = tab[r][width - 1] / tab[r][enter];
            if (ratio < best_ratio - 1e-15 || (leave != m && std::abs(ratio - best_ratio) <= 1e-15 && basis[r] < basis[leave])) {
                best_ratio = ratio;
                leave = r;
            }
        }
        if (leave == m) throw internal_error("phase-I objective is bounded below; unbounded ray is impossible");

        const double piv = tab[leave][enter];
        for (auto& v : tab[leave]) v /= piv;
        for (std::size_t r = 0; r <= m; ++r) {
            if (r == leave) continue;
            const double f = tab[r][enter];
            if (f == 0.0) continue;
            for (std::size_t c = 0; c < width; ++c) tab[r][c] -= f * tab[leave][c];
            tab[r][enter] = 0.0;
        }
        basis[leave] = enter;
    }

    if (-obj[width - 1] > 1e-9) return std::nullopt;

    std::vector<double> x(n, 0.0);
    for (std::size_t r = 0; r < m; ++r)
        if (basis[r] < n) x[basis[r]] = std::max(0.0, tab[r][width - 1]);
    return x;
}

} // namespace ergofix::detail
