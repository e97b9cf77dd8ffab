#pragma once

// Commutative semigroup index sets: the 2-D lattice N x N (N starting at 1),
// the half-line [0, inf), and finite tables. Provides the operation, the
// induced directed order s <= t  <=>  s = t or s + u = t, and tail sampling
// for limsup estimates over the directed set.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <functional>
#include <string>
#include <tuple>
#include <type_traits>
#include <unordered_map>
#include <variant>
#include <vector>

#include "ergofix/error.hpp"

namespace ergofix {

class FiniteSemigroup;

struct Grid2D {
    std::int64_t i = 1;
    std::int64_t j = 1;
    friend bool operator==(const Grid2D&, const Grid2D&) = default;
};

struct Time {
    double t = 0.0;
    friend bool operator==(const Time&, const Time&) = default;
};

/// Element of a finite table, stored by position; equality also requires the same table.
struct FiniteElem {
    std::shared_ptr<const FiniteSemigroup> table;
    std::size_t pos = 0;

    std::int64_t label() const;
    friend bool operator==(const FiniteElem& a, const FiniteElem& b) {
        return a.table == b.table && a.pos == b.pos;
    }
};

using Index = std::variant<Grid2D, Time, FiniteElem>;

enum class IndexKind { grid2d, time, finite };

inline IndexKind kind_of(const Index& s) { return static_cast<IndexKind>(s.index()); }

inline const char* to_string(IndexKind k) {
    switch (k) {
    case IndexKind::grid2d: return "grid2d";
    case IndexKind::time: return "time";
    case IndexKind::finite: return "finite";
    }
    return "?";
}

/// Total binary operation table over a finite labelled set, validated as a
/// commutative semigroup at construction.
class FiniteSemigroup : public std::enable_shared_from_this<FiniteSemigroup> {
public:
    /// `table[a][b]` is the label of labels[a] + labels[b].
    static std::shared_ptr<const FiniteSemigroup> create(std::vector<std::int64_t> labels,
                                                         const std::vector<std::vector<std::int64_t>>& table) {
        auto sg = std::shared_ptr<FiniteSemigroup>(new FiniteSemigroup(std::move(labels)));
        sg->fill(table);
        return sg;
    }

    /// {1..M} with s + t = min(s + t, M).
    static std::shared_ptr<const FiniteSemigroup> saturating(std::int64_t m) {
        if (m < 1) throw invalid_argument_error("saturating semigroup needs M >= 1");
        std::vector<std::int64_t> labels;
        for (std::int64_t s = 1; s <= m; ++s) labels.push_back(s);
        return from_rule(labels, [m](std::int64_t a, std::int64_t b) { return std::min(a + b, m); });
    }

    /// Z_k under addition mod k, labels 0..k-1.
    static std::shared_ptr<const FiniteSemigroup> cyclic(std::int64_t k) {
        if (k < 1) throw invalid_argument_error("cyclic group needs k >= 1");
        std::vector<std::int64_t> labels;
        for (std::int64_t s = 0; s < k; ++s) labels.push_back(s);
        return from_rule(labels, [k](std::int64_t a, std::int64_t b) { return (a + b) % k; });
    }

    /// {1..M} with s + t = min(s, t); every element is idempotent.
    static std::shared_ptr<const FiniteSemigroup> min_semilattice(std::int64_t m) {
        if (m < 1) throw invalid_argument_error("min semilattice needs M >= 1");
        std::vector<std::int64_t> labels;
        for (std::int64_t s = 1; s <= m; ++s) labels.push_back(s);
        return from_rule(labels, [](std::int64_t a, std::int64_t b) { return std::min(a, b); });
    }

    template <class Rule>
    static std::shared_ptr<const FiniteSemigroup> from_rule(const std::vector<std::int64_t>& labels, Rule rule) {
        std::vector<std::vector<std::int64_t>> table(labels.size(), std::vector<std::int64_t>(labels.size()));
        for (std::size_t a = 0; a < labels.size(); ++a)
            for (std::size_t b = 0; b < labels.size(); ++b) table[a][b] = rule(labels[a], labels[b]);
        return create(labels, table);
    }

    std::size_t size() const { return labels_.size(); }
    std::int64_t label(std::size_t pos) const { return labels_.at(pos); }
    const std::vector<std::int64_t>& labels() const { return labels_; }

    std::size_t position(std::int64_t label) const {
        auto it = pos_of_.find(label);
        if (it == pos_of_.end())
            throw invalid_argument_error("label " + std::to_string(label) + " is not an element of the semigroup");
        return it->second;
    }

    bool contains(std::int64_t label) const { return pos_of_.count(label) != 0; }

    std::size_t op(std::size_t a, std::size_t b) const { return table_[a * size() + b]; }

    FiniteElem elem(std::int64_t label) const { return FiniteElem{shared_from_this(), position(label)}; }
    FiniteElem elem_at(std::size_t pos) const {
        if (pos >= size()) throw invalid_argument_error("element position out of range");
        return FiniteElem{shared_from_this(), pos};
    }

    bool is_commutative() const {
        for (std::size_t a = 0; a < size(); ++a)
            for (std::size_t b = a + 1; b < size(); ++b)
                if (op(a, b) != op(b, a)) return false;
        return true;
    }

    bool is_associative() const {
        for (std::size_t a = 0; a < size(); ++a)
            for (std::size_t b = 0; b < size(); ++b)
                for (std::size_t c = 0; c < size(); ++c)
                    if (op(op(a, b), c) != op(a, op(b, c))) return false;
        return true;
    }

    /// s <= t iff s = t or some u has s + u = t. Exhaustive, O(|S|).
    bool leq(std::size_t s, std::size_t t) const {
        if (s == t) return true;
        for (std::size_t u = 0; u < size(); ++u)
            if (op(s, u) == t) return true;
        return false;
    }

private:
    explicit FiniteSemigroup(std::vector<std::int64_t> labels) : labels_(std::move(labels)) {
        if (labels_.empty()) throw invalid_argument_error("semigroup must have at least one element");
        for (std::size_t p = 0; p < labels_.size(); ++p)
            if (!pos_of_.emplace(labels_[p], p).second)
                throw invalid_argument_error("duplicate element label " + std::to_string(labels_[p]));
    }

    void fill(const std::vector<std::vector<std::int64_t>>& table) {
        const std::size_t n = size();
        if (table.size() != n) throw invalid_argument_error("operation table must have one row per element");
        table_.resize(n * n);
        for (std::size_t a = 0; a < n; ++a) {
            if (table[a].size() != n) throw invalid_argument_error("operation table must be square");
            for (std::size_t b = 0; b < n; ++b) {
                auto it = pos_of_.find(table[a][b]);
                if (it == pos_of_.end())
                    throw invalid_argument_error("operation table is not closed: entry " +
                                                 std::to_string(table[a][b]) + " is not an element");
                table_[a * n + b] = it->second;
            }
        }
        if (!is_commutative()) throw invalid_argument_error("operation table is not commutative");
        if (!is_associative()) throw invalid_argument_error("operation table is not associative");
    }

    std::vector<std::int64_t> labels_;
    std::unordered_map<std::int64_t, std::size_t> pos_of_;
    std::vector<std::size_t> table_;
};

inline std::int64_t FiniteElem::label() const { return table->label(pos); }

namespace detail {

inline void require_same_kind(const Index& s, const Index& t, const char* what) {
    if (s.index() != t.index())
        throw invalid_argument_error(std::string(what) + ": index variants differ (" + to_string(kind_of(s)) +
                                     " vs " + to_string(kind_of(t)) + ")");
    if (auto* a = std::get_if<FiniteElem>(&s)) {
        if (a->table != std::get<FiniteElem>(t).table)
            throw invalid_argument_error(std::string(what) + ": elements belong to different tables");
    }
}

} // namespace detail

inline bool is_valid(const Index& s) {
    return std::visit(
        [](const auto& v) -> bool {
            using V = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<V, Grid2D>) return v.i >= 1 && v.j >= 1;
            else if constexpr (std::is_same_v<V, Time>) return std::isfinite(v.t) && v.t >= 0.0;
            else return v.table && v.pos < v.table->size();
        },
        s);
}

/// s + t.
inline Index combine(const Index& s, const Index& t) {
    detail::require_same_kind(s, t, "combine");
    switch (kind_of(s)) {
    case IndexKind::grid2d: {
        const auto& a = std::get<Grid2D>(s);
        const auto& b = std::get<Grid2D>(t);
        return Grid2D{a.i + b.i, a.j + b.j};
    }
    case IndexKind::time: return Time{std::get<Time>(s).t + std::get<Time>(t).t};
    case IndexKind::finite: {
        const auto& a = std::get<FiniteElem>(s);
        return FiniteElem{a.table, a.table->op(a.pos, std::get<FiniteElem>(t).pos)};
    }
    }
    throw internal_error("combine: unreachable");
}

/// Directed order induced by the operation.
inline bool leq(const Index& s, const Index& t) {
    detail::require_same_kind(s, t, "leq");
    switch (kind_of(s)) {
    case IndexKind::grid2d: {
        const auto& a = std::get<Grid2D>(s);
        const auto& b = std::get<Grid2D>(t);
        return a == b || (a.i < b.i && a.j < b.j);
    }
    case IndexKind::time: return std::get<Time>(s).t <= std::get<Time>(t).t;
    case IndexKind::finite: {
        const auto& a = std::get<FiniteElem>(s);
        return a.table->leq(a.pos, std::get<FiniteElem>(t).pos);
    }
    }
    throw internal_error("leq: unreachable");
}

/// Some w with s <= w and t <= w.
inline Index common_upper_bound(const Index& s, const Index& t) {
    detail::require_same_kind(s, t, "common_upper_bound");
    switch (kind_of(s)) {
    case IndexKind::grid2d: {
        const auto& a = std::get<Grid2D>(s);
        const auto& b = std::get<Grid2D>(t);
        const auto m = std::max({a.i, a.j, b.i, b.j}) + 1;
        return Grid2D{m, m};
    }
    case IndexKind::time: return Time{std::max(std::get<Time>(s).t, std::get<Time>(t).t)};
    case IndexKind::finite: {
        const auto& a = std::get<FiniteElem>(s);
        const auto& b = std::get<FiniteElem>(t);
        for (std::size_t w = 0; w < a.table->size(); ++w)
            if (a.table->leq(a.pos, w) && a.table->leq(b.pos, w)) return FiniteElem{a.table, w};
        // s + t always dominates both in a commutative semigroup.
        return combine(s, t);
    }
    }
    throw internal_error("common_upper_bound: unreachable");
}

/// Strict weak order across all variants (variant position first).
struct IndexLess {
    bool operator()(const Index& a, const Index& b) const {
        if (a.index() != b.index()) return a.index() < b.index();
        switch (kind_of(a)) {
        case IndexKind::grid2d: {
            const auto& x = std::get<Grid2D>(a);
            const auto& y = std::get<Grid2D>(b);
            return std::tie(x.j, x.i) < std::tie(y.j, y.i);
        }
        case IndexKind::time: return std::get<Time>(a).t < std::get<Time>(b).t;
        case IndexKind::finite: {
            const auto& x = std::get<FiniteElem>(a);
            const auto& y = std::get<FiniteElem>(b);
            if (x.table != y.table) return std::less<const FiniteSemigroup*>{}(x.table.get(), y.table.get());
            return x.pos < y.pos;
        }
        }
        return false;
    }
};

// Tail grids. limsup over the directed set is invariant under shifting the
// tail, so a cofinal block of indices stands in for it.

/// All (i, j) with horizon <= i, j <= 2 horizon, j outer.
inline std::vector<Grid2D> grid_tail(std::int64_t horizon) {
    if (horizon < 1) throw invalid_argument_error("grid tail horizon must be >= 1");
    std::vector<Grid2D> out;
    out.reserve(static_cast<std::size_t>((horizon + 1) * (horizon + 1)));
    for (std::int64_t j = horizon; j <= 2 * horizon; ++j)
        for (std::int64_t i = horizon; i <= 2 * horizon; ++i) out.push_back(Grid2D{i, j});
    return out;
}

/// Uniform grid on [horizon, 2 horizon] with ceil(10 horizon) intervals.
inline std::vector<Time> time_tail(double horizon) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw invalid_argument_error("time tail horizon must be > 0");
    const auto intervals = static_cast<std::size_t>(std::ceil(10.0 * horizon - 1e-9));
    std::vector<Time> out;
    out.reserve(intervals + 1);
    for (std::size_t k = 0; k <= intervals; ++k)
        out.push_back(Time{horizon + horizon * static_cast<double>(k) / static_cast<double>(intervals)});
    return out;
}

namespace detail {

template <class F, class Concrete>
double call_index_fn(F& f, const Concrete& s) {
    if constexpr (std::is_invocable_v<F&, const Concrete&>) return static_cast<double>(f(s));
    else if constexpr (std::is_same_v<Concrete, Time> && std::is_invocable_v<F&, double>)
        return static_cast<double>(f(s.t));
    else return static_cast<double>(f(Index{s}));
}

} // namespace detail

/// sup of f over the sampled tail; an over-tail approximation of limsup.
template <class F, class Concrete>
double tail_limsup(F&& f, std::span<const Concrete> tail) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& s : tail) best = std::max(best, detail::call_index_fn(f, s));
    return best;
}

template <class F>
double tail_limsup_grid(F&& f, std::int64_t horizon) {
    const auto tail = grid_tail(horizon);
    return tail_limsup(f, std::span<const Grid2D>(tail));
}

template <class F>
double tail_limsup_time(F&& f, double horizon) {
    const auto tail = time_tail(horizon);
    return tail_limsup(f, std::span<const Time>(tail));
}

} // namespace ergofix
