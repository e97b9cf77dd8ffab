#pragma once

// Batch experiment driver behind the `ergofix` CLI. A config is one JSON
// document describing a family, a mode and its schedule; an optional "sweep"
// section expands it into several runs. Each run writes its own trace CSV;
// summaries are JSON (newline-delimited for sweeps).
//
// Needs nlohmann/json on the include path (vendor/json.hpp).

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"

#include "ergofix/builtins.hpp"
#include "ergofix/detail/random.hpp"
#include "ergofix/error.hpp"
#include "ergofix/iterate.hpp"
#include "ergofix/mean.hpp"
#include "ergofix/oracle.hpp"

namespace ergofix::experiment {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

inline constexpr int exit_ok = 0;
inline constexpr int exit_config = 2;
inline constexpr int exit_numeric = 3;

inline constexpr const char* out_dir_env = "ERGOFIX_OUT_DIR";
inline constexpr const char* default_out_dir = "ergofix_out";

/// Bad config content; `pointer` is the JSON pointer of the offending value.
class ConfigError : public invalid_argument_error {
public:
    ConfigError(const std::string& what, std::string pointer)
        : invalid_argument_error(what), pointer_(std::move(pointer)) {}
    const std::string& pointer() const { return pointer_; }

private:
    std::string pointer_;
};

struct SourcePos {
    std::size_t line = 1;
    std::size_t column = 1;
};

namespace detail {

inline SourcePos pos_of_offset(const std::string& text, std::size_t offset) {
    SourcePos p;
    for (std::size_t k = 0; k < offset && k < text.size(); ++k) {
        if (text[k] == '\n') {
            ++p.line;
            p.column = 1;
        } else {
            ++p.column;
        }
    }
    return p;
}

inline std::string escape_pointer_token(const std::string& key) {
    std::string out;
    for (char c : key) {
        if (c == '~') out += "~0";
        else if (c == '/') out += "~1";
        else out += c;
    }
    return out;
}

// Records the start offset of every value in an (already validated) JSON
// text, keyed by JSON pointer. Lax: assumes the text parses.
class PositionScanner {
public:
    explicit PositionScanner(const std::string& text) : s_(text) {
        skip_ws();
        value("");
    }

    std::vector<std::pair<std::string, std::size_t>> take() { return std::move(found_); }

private:
    const std::string& s_;
    std::size_t i_ = 0;
    std::vector<std::pair<std::string, std::size_t>> found_;

    void skip_ws() {
        while (i_ < s_.size() && (s_[i_] == ' ' || s_[i_] == '\n' || s_[i_] == '\r' || s_[i_] == '\t')) ++i_;
    }

    std::string string_token() {
        std::string out;
        ++i_; // opening quote
        while (i_ < s_.size() && s_[i_] != '"') {
            if (s_[i_] == '\\' && i_ + 1 < s_.size()) {
                ++i_;
                out += s_[i_] == 'n' ? '\n' : s_[i_] == 't' ? '\t' : s_[i_];
            } else {
                out += s_[i_];
            }
            ++i_;
        }
        ++i_;
        return out;
    }

    void value(const std::string& ptr) {
        if (i_ >= s_.size()) return;
        found_.emplace_back(ptr, i_);
        const char c = s_[i_];
        if (c == '{') {
            ++i_;
            skip_ws();
            while (i_ < s_.size() && s_[i_] != '}') {
                const std::string key = string_token();
                skip_ws();
                ++i_; // ':'
                skip_ws();
                value(ptr + "/" + escape_pointer_token(key));
                skip_ws();
                if (i_ < s_.size() && s_[i_] == ',') ++i_;
                skip_ws();
            }
            ++i_;
        } else if (c == '[') {
            ++i_;
            skip_ws();
            std::size_t k = 0;
            while (i_ < s_.size() && s_[i_] != ']') {
                value(ptr + "/" + std::to_string(k++));
                skip_ws();
                if (i_ < s_.size() && s_[i_] == ',') ++i_;
                skip_ws();
            }
            ++i_;
        } else if (c == '"') {
            string_token();
        } else {
            while (i_ < s_.size() && std::string_view(",]} \t\r\n").find(s_[i_]) == std::string_view::npos) ++i_;
        }
    }
};

} // namespace detail

/// Position of the value at `pointer`, or of its nearest present ancestor.
inline SourcePos locate(const std::string& text, std::string pointer) {
    const auto table = detail::PositionScanner(text).take();
    for (;;) {
        for (const auto& [p, off] : table)
            if (p == pointer) return detail::pos_of_offset(text, off);
        if (pointer.empty()) return {};
        pointer.erase(pointer.rfind('/'));
    }
}

/// Typed access into a config document; failures throw ConfigError.
class ConfigReader {
public:
    explicit ConfigReader(const json& doc) : doc_(doc) {}

    const json* find(const std::string& ptr) const {
        const json::json_pointer jp(ptr);
        return doc_.contains(jp) ? &doc_.at(jp) : nullptr;
    }
    bool has(const std::string& ptr) const { return find(ptr) != nullptr; }

    const json& require(const std::string& ptr) const {
        if (const auto* v = find(ptr)) return *v;
        throw ConfigError("missing required field '" + ptr + "'", ptr);
    }

    double number(const std::string& ptr) const {
        const auto& v = require(ptr);
        if (!v.is_number()) throw ConfigError("'" + ptr + "' must be a number", ptr);
        const double x = v.get<double>();
        if (!std::isfinite(x)) throw ConfigError("'" + ptr + "' must be finite", ptr);
        return x;
    }
    double number_or(const std::string& ptr, double fallback) const { return has(ptr) ? number(ptr) : fallback; }

    std::uint64_t count(const std::string& ptr) const {
        const auto& v = require(ptr);
        if (!v.is_number_unsigned()) throw ConfigError("'" + ptr + "' must be a non-negative integer", ptr);
        return v.get<std::uint64_t>();
    }
    std::uint64_t count_or(const std::string& ptr, std::uint64_t fallback) const {
        return has(ptr) ? count(ptr) : fallback;
    }

    std::string string(const std::string& ptr) const {
        const auto& v = require(ptr);
        if (!v.is_string()) throw ConfigError("'" + ptr + "' must be a string", ptr);
        return v.get<std::string>();
    }
    std::string string_or(const std::string& ptr, const std::string& fallback) const {
        return has(ptr) ? string(ptr) : fallback;
    }

    Vector vector(const std::string& ptr) const {
        const auto& v = require(ptr);
        if (!v.is_array() || v.empty()) throw ConfigError("'" + ptr + "' must be a nonempty array of numbers", ptr);
        Vector out(static_cast<Eigen::Index>(v.size()));
        for (std::size_t k = 0; k < v.size(); ++k) out[static_cast<Eigen::Index>(k)] = number(ptr + "/" + std::to_string(k));
        return out;
    }

    Matrix matrix(const std::string& ptr) const {
        const auto& v = require(ptr);
        if (!v.is_array() || v.empty() || !v[0].is_array())
            throw ConfigError("'" + ptr + "' must be a nonempty array of rows", ptr);
        const auto rows = v.size(), cols = v[0].size();
        Matrix out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (std::size_t r = 0; r < rows; ++r) {
            const std::string row = ptr + "/" + std::to_string(r);
            if (!v[r].is_array() || v[r].size() != cols) throw ConfigError("ragged matrix row", row);
            for (std::size_t c = 0; c < cols; ++c)
                out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = number(row + "/" + std::to_string(c));
        }
        return out;
    }

    /// Rejects keys outside `allowed` in the object at `ptr` (typo guard).
    void allow_keys(const std::string& ptr, std::initializer_list<const char*> allowed) const {
        const auto* obj = find(ptr);
        if (!obj) return;
        if (!obj->is_object()) throw ConfigError("'" + (ptr.empty() ? "/" : ptr) + "' must be an object", ptr);
        for (const auto& item : obj->items()) {
            const bool ok = std::any_of(allowed.begin(), allowed.end(), [&](const char* k) { return item.key() == k; });
            if (!ok)
                throw ConfigError("unknown key '" + item.key() + "'",
                                  ptr + "/" + detail::escape_pointer_token(item.key()));
        }
    }

private:
    const json& doc_;
};

// ---- family and semigroup sections ----

namespace detail {

inline Eigen::Index map_dimension(const ConfigReader& r, const std::string& ptr) {
    if (r.has(ptr + "/rotation")) return 2;
    if (r.has(ptr + "/affine")) return r.matrix(ptr + "/affine/linear").rows();
    if (r.has(ptr + "/identity")) return static_cast<Eigen::Index>(r.count(ptr + "/identity"));
    if (r.has(ptr + "/projection/ball/center")) return r.vector(ptr + "/projection/ball/center").size();
    if (r.has(ptr + "/projection/box/lower")) return r.vector(ptr + "/projection/box/lower").size();
    if (r.has(ptr + "/projection")) throw ConfigError("projection target needs a ball center or a box", ptr + "/projection");
    throw ConfigError("map needs one of rotation, affine, projection, identity", ptr);
}

} // namespace detail

inline Domain parse_domain(const ConfigReader& r, const std::string& ptr, Eigen::Index dim) {
    if (!r.has(ptr)) return Domain::ball(Vector::Zero(dim), 2.0);
    r.allow_keys(ptr, {"ball", "box"});
    try {
        if (r.has(ptr + "/ball")) {
            r.allow_keys(ptr + "/ball", {"center", "radius"});
            const Vector c = r.has(ptr + "/ball/center") ? r.vector(ptr + "/ball/center") : Vector::Zero(dim);
            return Domain::ball(c, r.number(ptr + "/ball/radius"));
        }
        if (r.has(ptr + "/box")) {
            r.allow_keys(ptr + "/box", {"lower", "upper"});
            return Domain::box(r.vector(ptr + "/box/lower"), r.vector(ptr + "/box/upper"));
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const invalid_argument_error& e) {
        throw ConfigError(e.what(), ptr);
    }
    throw ConfigError("domain needs 'ball' or 'box'", ptr);
}

inline NonexpansiveMap parse_map(const ConfigReader& r, const std::string& ptr) {
    r.allow_keys(ptr, {"rotation", "affine", "projection", "identity"});
    if (r.has(ptr + "/rotation")) {
        r.allow_keys(ptr + "/rotation", {"angle", "center"});
        const Vector c = r.has(ptr + "/rotation/center") ? r.vector(ptr + "/rotation/center") : Vector::Zero(2);
        return NonexpansiveMap::rotation(r.number(ptr + "/rotation/angle"), c);
    }
    if (r.has(ptr + "/affine")) {
        r.allow_keys(ptr + "/affine", {"linear", "offset"});
        const Matrix a = r.matrix(ptr + "/affine/linear");
        const Vector b = r.has(ptr + "/affine/offset") ? r.vector(ptr + "/affine/offset") : Vector::Zero(a.rows());
        return NonexpansiveMap::affine(a, b);
    }
    if (r.has(ptr + "/projection")) {
        const auto dim = detail::map_dimension(r, ptr);
        return NonexpansiveMap::projection(parse_domain(r, ptr + "/projection", dim));
    }
    return NonexpansiveMap::identity(detail::map_dimension(r, ptr));
}

/// family.type: rotation_pair | contraction_pair | projection_rotation_pair |
/// pair | linear_flow | rotation_flow. The domain defaults to the centered
/// ball of radius 2.
inline OperatorFamily parse_family(const ConfigReader& r, const std::string& ptr = "/family") {
    r.require(ptr);
    const std::string type = r.string(ptr + "/type");
    try {
        if (type == "rotation_pair") {
            r.allow_keys(ptr, {"type", "theta", "phi", "domain"});
            return CommutingPair(NonexpansiveMap::rotation(r.number(ptr + "/theta")),
                                 NonexpansiveMap::rotation(r.number(ptr + "/phi")), parse_domain(r, ptr + "/domain", 2));
        }
        if (type == "contraction_pair") {
            r.allow_keys(ptr, {"type", "scale", "c", "domain"});
            Matrix u = Matrix::Identity(2, 2);
            u(1, 1) = r.number_or(ptr + "/c", 0.8);
            return CommutingPair(
                NonexpansiveMap::affine(r.number_or(ptr + "/scale", 0.5) * Matrix::Identity(2, 2), Vector::Zero(2)),
                NonexpansiveMap::affine(u, Vector::Zero(2)), parse_domain(r, ptr + "/domain", 2));
        }
        if (type == "projection_rotation_pair") {
            r.allow_keys(ptr, {"type", "theta", "inner_radius", "domain"});
            return CommutingPair(
                NonexpansiveMap::projection(Domain::ball(Vector::Zero(2), r.number_or(ptr + "/inner_radius", 1.0))),
                NonexpansiveMap::rotation(r.number(ptr + "/theta")), parse_domain(r, ptr + "/domain", 2));
        }
        if (type == "pair") {
            r.allow_keys(ptr, {"type", "t", "u", "domain"});
            const auto dim = detail::map_dimension(r, ptr + "/t");
            return CommutingPair(parse_map(r, ptr + "/t"), parse_map(r, ptr + "/u"), parse_domain(r, ptr + "/domain", dim));
        }
        if (type == "linear_flow") {
            r.allow_keys(ptr, {"type", "matrix", "domain"});
            const Matrix a = r.matrix(ptr + "/matrix");
            return LinearFlow(a, parse_domain(r, ptr + "/domain", a.rows()));
        }
        if (type == "rotation_flow") {
            r.allow_keys(ptr, {"type", "omega", "center", "domain"});
            const Vector c = r.has(ptr + "/center") ? r.vector(ptr + "/center") : Vector::Zero(2);
            return RotationFlow(r.number(ptr + "/omega"), c, parse_domain(r, ptr + "/domain", 2));
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("invalid family: ") + e.what(), ptr);
    }
    throw ConfigError("unknown family type '" + type + "'", ptr + "/type");
}

/// semigroup.type: saturating (m) | cyclic (k) | min_semilattice (m) | table (labels, table).
inline std::shared_ptr<const FiniteSemigroup> parse_semigroup(const ConfigReader& r,
                                                              const std::string& ptr = "/semigroup") {
    r.require(ptr);
    const std::string type = r.string(ptr + "/type");
    auto positive = [&](const char* key) {
        const auto v = r.count(ptr + "/" + key);
        if (v < 1 || v > 128) throw ConfigError(std::string(key) + " must be in [1, 128]", ptr + "/" + key);
        return static_cast<std::int64_t>(v);
    };
    try {
        if (type == "saturating") {
            r.allow_keys(ptr, {"type", "m"});
            return FiniteSemigroup::saturating(positive("m"));
        }
        if (type == "cyclic") {
            r.allow_keys(ptr, {"type", "k"});
            return FiniteSemigroup::cyclic(positive("k"));
        }
        if (type == "min_semilattice") {
            r.allow_keys(ptr, {"type", "m"});
            return FiniteSemigroup::min_semilattice(positive("m"));
        }
        if (type == "table") {
            r.allow_keys(ptr, {"type", "labels", "table"});
            const auto labels = r.require(ptr + "/labels").get<std::vector<std::int64_t>>();
            const auto table = r.require(ptr + "/table").get<std::vector<std::vector<std::int64_t>>>();
            return FiniteSemigroup::create(labels, table);
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("semigroup table must hold integers: ") + e.what(), ptr);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("invalid semigroup: ") + e.what(), ptr);
    }
    throw ConfigError("unknown semigroup type '" + type + "'", ptr + "/type");
}

// ---- run plans ----

struct RunPlan {
    std::string name;   ///< file stem for this run's artifacts
    json doc;           ///< config with sweep values substituted
    std::uint64_t seed = 0;
};

struct LoadedConfig {
    std::string text;
    std::string origin;
    std::string name;
    json doc;
    std::vector<RunPlan> runs;
    bool sweep = false;
};

/// Config parse or validation failure, with position when known.
class ConfigLoadError : public std::runtime_error {
public:
    ConfigLoadError(const std::string& origin, SourcePos pos, const std::string& what)
        : std::runtime_error(origin + ":" + std::to_string(pos.line) + ":" + std::to_string(pos.column) + ": " + what),
          pos_(pos) {}
    SourcePos position() const { return pos_; }

private:
    SourcePos pos_;
};

namespace detail {

inline const char* const known_modes[] = {"mann", "retraction", "characterize", "verify-means", "invariant-mean"};

inline Vector start_point(const ConfigReader& r, const std::string& ptr, const Domain& c, std::uint64_t seed) {
    const auto& v = r.require(ptr);
    if (v.is_string()) {
        if (v.get<std::string>() != "random") throw ConfigError("start must be an array or \"random\"", ptr);
        ergofix::detail::Rng rng(seed);
        return c.sample(rng);
    }
    const Vector x = r.vector(ptr);
    if (x.size() != c.dimension())
        throw ConfigError("start has dimension " + std::to_string(x.size()) + ", domain has " +
                              std::to_string(c.dimension()),
                          ptr);
    if (!c.contains(x)) throw ConfigError("start point lies outside the domain", ptr);
    return x;
}

// Checks everything a run needs before anything executes, so config errors
// surface as exit 2 without partial artifacts.
inline void validate_plan(const RunPlan& plan) {
    const ConfigReader r(plan.doc);
    r.allow_keys("", {"name", "mode", "family", "semigroup", "means", "start", "point", "schedule", "seed", "output",
                      "sweep"});
    r.allow_keys("/output", {"dir"});
    const std::string mode = r.string("/mode");
    if (std::none_of(std::begin(known_modes), std::end(known_modes), [&](const char* m) { return mode == m; }))
        throw ConfigError("unknown mode '" + mode + "'", "/mode");

    if (mode == "mann" || mode == "retraction" || mode == "characterize") {
        const auto f = parse_family(r);
        const bool is_pair = std::holds_alternative<CommutingPair>(f);
        const std::string where = mode == "characterize" ? (r.has("/point") ? "/point" : "/start") : "/start";
        start_point(r, where, domain_of(f), plan.seed);
        if (mode == "mann") {
            r.allow_keys("/schedule", {"alpha", "t_scale", "tol", "max_iter", "quad_tol", "stop_window"});
            if (const auto* a = r.find("/schedule/alpha"); a && a->is_array()) {
                const Vector t = r.vector("/schedule/alpha");
                for (Eigen::Index k = 0; k < t.size(); ++k)
                    if (!(t[k] >= 0.01 && t[k] <= 0.99))
                        throw ConfigError("alpha must lie in [0.01, 0.99]", "/schedule/alpha/" + std::to_string(k));
            } else if (const double a0 = r.number_or("/schedule/alpha", 0.5); !(a0 >= 0.01 && a0 <= 0.99)) {
                throw ConfigError("alpha must lie in [0.01, 0.99]", "/schedule/alpha");
            }
            const double ts = r.number_or("/schedule/t_scale", 1.0);
            if (!(ts > 0.0)) throw ConfigError("t_scale must be > 0", "/schedule/t_scale");
            if (!(r.number_or("/schedule/tol", 1e-8) > 0.0)) throw ConfigError("tol must be > 0", "/schedule/tol");
            if (r.count_or("/schedule/max_iter", 10000) < 1) throw ConfigError("max_iter must be >= 1", "/schedule/max_iter");
            if (r.count_or("/schedule/stop_window", 5) < 1)
                throw ConfigError("stop_window must be >= 1", "/schedule/stop_window");
            if (!(r.number_or("/schedule/quad_tol", default_quad_tol) > 0.0))
                throw ConfigError("quad_tol must be > 0", "/schedule/quad_tol");
        } else if (mode == "retraction") {
            r.allow_keys("/schedule", {"mean_index", "inner_tol", "max_inner", "quad_tol", "check_doubling"});
            const double idx = r.number("/schedule/mean_index");
            if (!(idx > 0.0)) throw ConfigError("mean_index must be > 0", "/schedule/mean_index");
            if (is_pair && idx != std::floor(idx))
                throw ConfigError("mean_index must be an integer for a commuting pair", "/schedule/mean_index");
            if (!(r.number_or("/schedule/inner_tol", 1e-12) > 0.0))
                throw ConfigError("inner_tol must be > 0", "/schedule/inner_tol");
            if (r.count_or("/schedule/max_inner", 100000) < 1)
                throw ConfigError("max_inner must be >= 1", "/schedule/max_inner");
            if (const auto* c = r.find("/schedule/check_doubling"); c && !c->is_boolean())
                throw ConfigError("check_doubling must be a boolean", "/schedule/check_doubling");
        } else {
            r.allow_keys("/schedule", {"n_max", "tol", "horizon", "quad_tol", "window"});
            if (r.count_or("/schedule/n_max", 300) < 1) throw ConfigError("n_max must be >= 1", "/schedule/n_max");
            if (!(r.number_or("/schedule/tol", 1e-6) > 0.0)) throw ConfigError("tol must be > 0", "/schedule/tol");
            if (!(r.number_or("/schedule/horizon", 20.0) >= 1.0))
                throw ConfigError("horizon must be >= 1", "/schedule/horizon");
        }
    } else if (mode == "verify-means") {
        r.allow_keys("/means", {"family", "n_max", "t_scale", "tol"});
        const std::string fam = r.string("/means/family");
        if (fam != "cesaro" && fam != "time") throw ConfigError("means.family must be cesaro or time", "/means/family");
        const auto n = r.count_or("/means/n_max", 100);
        if (n < 1 || (fam == "cesaro" && n > 2000)) throw ConfigError("n_max out of range", "/means/n_max");
        if (!(r.number_or("/means/t_scale", 1.0) > 0.0)) throw ConfigError("t_scale must be > 0", "/means/t_scale");
    } else {
        parse_semigroup(r);
    }
}

inline void set_pointer(json& doc, const std::string& ptr, const json& value) { doc[json::json_pointer(ptr)] = value; }

} // namespace detail

/// Parses a config text and expands its sweep. Throws ConfigLoadError.
inline LoadedConfig load_config(const std::string& text, const std::string& origin,
                                std::optional<std::uint64_t> seed_override = std::nullopt) {
    LoadedConfig cfg;
    cfg.text = text;
    cfg.origin = origin;
    try {
        cfg.doc = json::parse(text);
    } catch (const json::parse_error& e) {
        const std::size_t off = e.byte > 0 ? e.byte - 1 : 0;
        throw ConfigLoadError(origin, detail::pos_of_offset(text, off), e.what());
    }
    try {
        const ConfigReader r(cfg.doc);
        if (!cfg.doc.is_object()) throw ConfigError("config must be a JSON object", "");
        cfg.name = r.string_or("/name", std::filesystem::path(origin).stem().string());
        if (cfg.name.empty() || cfg.name.find_first_of("/\\") != std::string::npos)
            throw ConfigError("name must be a plain file stem", "/name");
        if (seed_override) cfg.doc["seed"] = *seed_override;
        r.count_or("/seed", 0);

        std::vector<json> docs{cfg.doc};
        if (const auto* sweep = r.find("/sweep")) {
            cfg.sweep = true;
            if (!sweep->is_object() || sweep->empty()) throw ConfigError("sweep must be a nonempty object", "/sweep");
            // cartesian product over pointers, in key order
            for (const auto& item : sweep->items()) {
                const std::string where = "/sweep/" + detail::escape_pointer_token(item.key());
                if (item.key().empty() || item.key()[0] != '/')
                    throw ConfigError("sweep keys are JSON pointers like \"/family/theta\"", where);
                if (item.key().rfind("/sweep", 0) == 0 || item.key() == "/name")
                    throw ConfigError("cannot sweep over this key", where);
                if (!item.value().is_array() || item.value().empty())
                    throw ConfigError("sweep values must be a nonempty array", where);
                std::vector<json> next;
                for (const auto& d : docs)
                    for (const auto& v : item.value()) {
                        json copy = d;
                        try {
                            detail::set_pointer(copy, item.key(), v);
                        } catch (const json::exception& e) {
                            throw ConfigError(std::string("bad sweep pointer: ") + e.what(), where);
                        }
                        next.push_back(std::move(copy));
                    }
                docs = std::move(next);
            }
        }
        for (std::size_t k = 0; k < docs.size(); ++k) {
            RunPlan plan;
            char suffix[32];
            std::snprintf(suffix, sizeof suffix, "-%03zu", k);
            plan.name = cfg.sweep ? cfg.name + suffix : cfg.name;
            plan.doc = std::move(docs[k]);
            plan.doc.erase("sweep");
            plan.seed = ConfigReader(plan.doc).count_or("/seed", 0);
            try {
                detail::validate_plan(plan);
            } catch (const ConfigError& e) {
                // report sweep runs by their index as well
                throw ConfigError(cfg.sweep ? "run " + plan.name + ": " + e.what() : e.what(), e.pointer());
            }
            cfg.runs.push_back(std::move(plan));
        }
    } catch (const ConfigError& e) {
        throw ConfigLoadError(origin, locate(text, e.pointer()), e.what());
    }
    return cfg;
}

// ---- execution ----

inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// Trace CSV accumulated in memory and written once, so reruns are byte-identical.
class TraceWriter {
public:
    explicit TraceWriter(std::vector<std::string> header) {
        for (std::size_t k = 0; k < header.size(); ++k) out_ << (k ? "," : "") << header[k];
        out_ << '\n';
    }

    void row(const std::vector<double>& values) {
        for (std::size_t k = 0; k < values.size(); ++k) out_ << (k ? "," : "") << format_double(values[k]);
        out_ << '\n';
    }

    void write(const std::filesystem::path& path) const {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write " + path.string());
        f << out_.str();
    }

private:
    std::ostringstream out_;
};

inline std::vector<std::string> iteration_header(Eigen::Index dim) {
    std::vector<std::string> h{"n"};
    for (Eigen::Index k = 0; k < dim; ++k) h.push_back("x" + std::to_string(k));
    h.insert(h.end(), {"residual", "step_norm", "mean_gap"});
    return h;
}

inline std::vector<double> iteration_row(std::size_t n, const Vector& x, double residual, double step, double gap) {
    std::vector<double> row{static_cast<double>(n)};
    for (Eigen::Index k = 0; k < x.size(); ++k) row.push_back(x[k]);
    row.insert(row.end(), {residual, step, gap});
    return row;
}

inline json point_json(const Vector& x) {
    json a = json::array();
    for (Eigen::Index k = 0; k < x.size(); ++k) a.push_back(x[k]);
    return a;
}

inline double max_of_last(const std::vector<double>& v, std::size_t window) {
    double m = 0.0;
    for (std::size_t k = v.size() > window ? v.size() - window : 0; k < v.size(); ++k) m = std::max(m, v[k]);
    return m;
}

struct RunResult {
    std::string name;
    ordered_json summary;
    bool numeric_failure = false;
};

namespace detail {

struct ModeOutput {
    bool converged = false;
    Vector final_point;
    std::size_t iterations = 0;
    double max_residual_last5 = 0.0;
    json tolerances = json::object();
    json extra = json::object();
};

inline ModeOutput run_mann(const ConfigReader& r, const RunPlan& plan, TraceWriter*& trace,
                           std::optional<TraceWriter>& storage) {
    const auto f = parse_family(r);
    const Vector x1 = start_point(r, "/start", domain_of(f), plan.seed);
    MannConfig cfg;
    if (const auto* a = r.find("/schedule/alpha"); a && a->is_array()) {
        const Vector table = r.vector("/schedule/alpha");
        cfg.alpha = [table](std::size_t n) {
            return table[static_cast<Eigen::Index>(std::min<std::size_t>(n, static_cast<std::size_t>(table.size())) - 1)];
        };
    } else {
        cfg.alpha = constant_alpha(r.number_or("/schedule/alpha", 0.5));
    }
    cfg.means = default_mean_schedule(f, r.number_or("/schedule/t_scale", 1.0));
    cfg.tol = r.number_or("/schedule/tol", 1e-8);
    cfg.max_iter = r.count_or("/schedule/max_iter", 10000);
    cfg.quad_tol = r.number_or("/schedule/quad_tol", default_quad_tol);
    cfg.stop_window = r.count_or("/schedule/stop_window", 5);

    storage.emplace(iteration_header(x1.size()));
    trace = &*storage;
    auto emit = [&](const Trace& t) {
        for (const auto& s : t.steps) trace->row(iteration_row(s.n, s.x, s.residual, s.step_norm, s.mean_gap));
    };
    Trace t;
    try {
        t = mann_iterate(f, cfg, x1);
    } catch (const MannNumericError& e) {
        emit(e.trace());
        throw;
    }
    emit(t);

    ModeOutput out;
    out.converged = t.converged;
    out.final_point = t.final_point;
    out.iterations = t.steps.size();
    std::vector<double> res;
    for (const auto& s : t.steps) res.push_back(s.residual);
    out.max_residual_last5 = max_of_last(res, 5);
    out.tolerances = {{"tol", cfg.tol}, {"quad_tol", cfg.quad_tol}, {"stop_window", cfg.stop_window}};
    out.extra["start"] = point_json(x1);
    out.extra["gap_min"] = mann_gap_diagnostic(t).back();
    return out;
}

inline ModeOutput run_retraction(const ConfigReader& r, const RunPlan& plan, TraceWriter*& trace,
                                 std::optional<TraceWriter>& storage) {
    const auto f = parse_family(r);
    const Vector x = start_point(r, "/start", domain_of(f), plan.seed);
    const double tau = r.number("/schedule/mean_index");
    RetractionOptions opts;
    opts.inner_tol = r.number_or("/schedule/inner_tol", 1e-12);
    opts.max_inner = r.count_or("/schedule/max_inner", 100000);
    opts.quad_tol = r.number_or("/schedule/quad_tol", default_quad_tol);

    storage.emplace(iteration_header(x.size()));
    trace = &*storage;
    // row k: z_k, ||T_mu z_k - z_k|| = 2 ||z_{k+1} - z_k||, step to z_{k+1}
    const Mean mu = surrogate_mean(f, tau);
    Vector prev = apply_mean_operator(f, mu, x, opts.quad_tol).point;
    std::vector<double> residuals;
    opts.on_step = [&](std::size_t k, const Vector& z, double step) {
        trace->row(iteration_row(k - 1, prev, 2.0 * step, step, 0.0));
        residuals.push_back(2.0 * step);
        prev = z;
    };
    const Vector q = retraction_apply(f, tau, x, opts);

    ModeOutput out;
    out.converged = true;
    out.final_point = q;
    out.iterations = residuals.size();
    out.max_residual_last5 = max_of_last(residuals, 5);
    out.tolerances = {{"inner_tol", opts.inner_tol}, {"quad_tol", opts.quad_tol}};
    out.extra["start"] = point_json(x);
    out.extra["mean_index"] = tau;
    out.extra["fixed_residual"] = (apply_mean_operator(f, mu, domain_of(f).project(q), opts.quad_tol).point - q).norm();
    if (r.has("/schedule/check_doubling") && r.require("/schedule/check_doubling").get<bool>()) {
        RetractionOptions plain = opts;
        plain.on_step = nullptr;
        out.extra["doubling_discrepancy"] = (retraction_apply(f, 2.0 * tau, x, plain) - q).norm();
    }
    try {
        out.extra["distance_to_fixed_set"] = oracle::fixed_set_of(f).distance(q);
    } catch (const invalid_argument_error&) {
        // no analytic fixed set for this family
    }
    return out;
}

inline ModeOutput run_characterize(const ConfigReader& r, const RunPlan& plan, TraceWriter*& trace,
                                   std::optional<TraceWriter>& storage) {
    const auto f = parse_family(r);
    const Vector z = start_point(r, r.has("/point") ? "/point" : "/start", domain_of(f), plan.seed);
    CharacterizeOptions opts;
    opts.n_max = r.count_or("/schedule/n_max", 300);
    opts.tol = r.number_or("/schedule/tol", 1e-6);
    opts.horizon = r.number_or("/schedule/horizon", 20.0);
    opts.quad_tol = r.number_or("/schedule/quad_tol", default_quad_tol);
    opts.window = r.count_or("/schedule/window", 5);

    storage.emplace(iteration_header(z.size()));
    trace = &*storage;
    const auto rep = characterize(f, z, opts);
    const bool pair = std::holds_alternative<CommutingPair>(f);
    for (std::size_t n = 1; n <= rep.residual_sequence.size(); ++n) {
        // consecutive mean distance; closed forms of the TV identities
        const double dn = static_cast<double>(n);
        const double gap = pair ? 2.0 * (2.0 * dn + 1.0) / ((dn + 1.0) * (dn + 1.0)) : 2.0 / (dn + 1.0);
        trace->row(iteration_row(n, z, rep.residual_sequence[n - 1], 0.0, gap));
    }

    ModeOutput out;
    out.converged = rep.verdict;
    out.final_point = z;
    out.iterations = rep.residual_sequence.size();
    out.max_residual_last5 = max_of_last(rep.residual_sequence, 5);
    out.tolerances = {{"tol", opts.tol}, {"quad_tol", opts.quad_tol}, {"horizon", opts.horizon}};
    out.extra["verdict"] = rep.verdict;
    out.extra["lambda_estimate"] = rep.lambda_estimate;
    out.extra["orbit_bound_excess"] = rep.orbit_bound_excess;
    try {
        out.extra["distance_to_fixed_set"] = oracle::fixed_set_of(f).distance(z);
    } catch (const invalid_argument_error&) {
        // no analytic fixed set for this family
    }
    return out;
}

inline ModeOutput run_verify_means(const ConfigReader& r, TraceWriter*& trace, std::optional<TraceWriter>& storage) {
    const std::string fam = r.string("/means/family");
    const auto n_max = r.count_or("/means/n_max", 100);
    const double scale = r.number_or("/means/t_scale", 1.0);
    const double tol = r.number_or("/means/tol", 1e-12);
    storage.emplace(std::vector<std::string>{"n", "tv", "expected", "deviation"});
    trace = &*storage;
    std::vector<double> dev;
    for (std::uint64_t n = 1; n <= n_max; ++n) {
        const double dn = static_cast<double>(n);
        double tv, expected;
        if (fam == "cesaro") {
            tv = tv_distance(cesaro2d(static_cast<std::int64_t>(n)), cesaro2d(static_cast<std::int64_t>(n + 1)));
            expected = 2.0 * (2.0 * dn + 1.0) / ((dn + 1.0) * (dn + 1.0));
        } else {
            tv = tv_distance(TimeMean(scale * dn), TimeMean(scale * (dn + 1.0)));
            expected = 2.0 / (dn + 1.0);
        }
        dev.push_back(std::abs(tv - expected));
        trace->row({dn, tv, expected, dev.back()});
    }
    ModeOutput out;
    const double worst = *std::max_element(dev.begin(), dev.end());
    out.converged = worst <= tol;
    out.final_point = Vector(0);
    out.iterations = n_max;
    out.max_residual_last5 = max_of_last(dev, 5);
    out.tolerances = {{"tol", tol}};
    out.extra["family"] = fam;
    out.extra["max_deviation"] = worst;
    return out;
}

inline ModeOutput run_invariant_mean(const ConfigReader& r, TraceWriter*& trace, std::optional<TraceWriter>& storage) {
    const auto sg = parse_semigroup(r);
    const FiniteMean mu = solve_invariant_mean(*sg);
    const double defect = oracle::verify_invariant_mean(*sg, mu);
    storage.emplace(std::vector<std::string>{"label", "weight"});
    trace = &*storage;
    Vector w(static_cast<Eigen::Index>(mu.support().size()));
    json labels = json::array();
    for (std::size_t k = 0; k < mu.support().size(); ++k) {
        const auto& e = std::get<FiniteElem>(mu.support()[k].first);
        w[static_cast<Eigen::Index>(k)] = mu.support()[k].second;
        labels.push_back(e.label());
        trace->row({static_cast<double>(e.label()), mu.support()[k].second});
    }
    ModeOutput out;
    out.converged = defect <= 1e-9;
    out.final_point = w;
    out.iterations = 1;
    out.max_residual_last5 = defect;
    out.tolerances = {{"defect_tol", 1e-9}};
    out.extra["labels"] = labels;
    out.extra["defect"] = defect;
    return out;
}

} // namespace detail

/// Runs one plan and writes its trace; returns the summary. Never throws.
inline RunResult execute_run(const RunPlan& plan, const std::filesystem::path& out_dir) {
    RunResult res;
    res.name = plan.name;
    const auto started = std::chrono::steady_clock::now();
    const ConfigReader r(plan.doc);
    const std::string mode = r.string("/mode");
    TraceWriter* trace = nullptr;
    std::optional<TraceWriter> storage;
    detail::ModeOutput out;
    std::string error;
    try {
        if (mode == "mann") out = detail::run_mann(r, plan, trace, storage);
        else if (mode == "retraction") out = detail::run_retraction(r, plan, trace, storage);
        else if (mode == "characterize") out = detail::run_characterize(r, plan, trace, storage);
        else if (mode == "verify-means") out = detail::run_verify_means(r, trace, storage);
        else out = detail::run_invariant_mean(r, trace, storage);
    } catch (const MannNumericError& e) {
        res.numeric_failure = true;
        error = e.what();
        out.final_point = e.trace().final_point;
        out.iterations = e.trace().steps.size();
    } catch (const IterationLimitError& e) {
        res.numeric_failure = true;
        error = e.what();
        out.final_point = e.last_iterate();
    } catch (const std::exception& e) {
        res.numeric_failure = true;
        error = e.what();
    }
    const auto trace_path = out_dir / (plan.name + ".trace.csv");
    if (trace) {
        try {
            trace->write(trace_path);
        } catch (const std::exception& e) {
            res.numeric_failure = true;
            if (error.empty()) error = e.what();
        }
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    ordered_json s;
    s["name"] = plan.name;
    s["mode"] = mode;
    s["converged"] = res.numeric_failure ? false : out.converged;
    s["final_point"] = point_json(out.final_point);
    s["iterations"] = out.iterations;
    s["max_residual_last5"] = out.max_residual_last5;
    s["tolerances"] = out.tolerances;
    s["seed"] = plan.seed;
    s["wall_time"] = wall;
    s["trace"] = trace ? trace_path.filename().string() : "";
    for (const auto& item : out.extra.items()) s[item.key()] = item.value();
    if (!error.empty()) s["error"] = error;
    res.summary = std::move(s);
    return res;
}

struct RunOptions {
    std::size_t jobs = 1;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
};

/// Output directory precedence: --out, then the config's output.dir, then
/// $ERGOFIX_OUT_DIR, then ./ergofix_out.
inline std::filesystem::path resolve_out_dir(const LoadedConfig& cfg, const RunOptions& opt) {
    if (opt.out_dir) return *opt.out_dir;
    if (const auto* d = ConfigReader(cfg.doc).find("/output/dir")) {
        if (!d->is_string()) throw ConfigLoadError(cfg.origin, locate(cfg.text, "/output/dir"), "output.dir must be a string");
        return d->get<std::string>();
    }
    if (const char* env = std::getenv(out_dir_env); env && *env) return env;
    return default_out_dir;
}

/// Loads, validates and runs a config; returns the process exit code.
inline int run_config_text(const std::string& text, const std::string& origin, const RunOptions& opt,
                           std::ostream& log = std::cerr) {
    LoadedConfig cfg;
    std::filesystem::path out_dir;
    try {
        cfg = load_config(text, origin, opt.seed);
        out_dir = resolve_out_dir(cfg, opt);
        std::error_code ec;
        std::filesystem::create_directories(out_dir, ec);
        const auto probe = out_dir / ".ergofix_write_probe";
        std::ofstream(probe).put('x');
        if (ec || !std::filesystem::exists(probe))
            throw ConfigLoadError(cfg.origin, locate(text, "/output/dir"),
                                  "output directory '" + out_dir.string() + "' is not writable");
        std::filesystem::remove(probe, ec);
    } catch (const ConfigLoadError& e) {
        log << "error: " << e.what() << '\n';
        return exit_config;
    }

    std::vector<RunResult> results(cfg.runs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k; (k = next.fetch_add(1)) < cfg.runs.size();) results[k] = execute_run(cfg.runs[k], out_dir);
    };
    const std::size_t jobs = std::max<std::size_t>(1, std::min(opt.jobs, cfg.runs.size()));
    std::vector<std::thread> pool;
    for (std::size_t k = 1; k < jobs; ++k) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    bool failed = false;
    try {
        if (cfg.sweep) {
            std::ofstream f(out_dir / (cfg.name + ".summary.jsonl"), std::ios::binary | std::ios::trunc);
            for (const auto& r : results) f << r.summary.dump() << '\n';
            if (!f) throw std::runtime_error("cannot write summary");
        } else {
            std::ofstream f(out_dir / (cfg.name + ".summary.json"), std::ios::binary | std::ios::trunc);
            f << results.front().summary.dump(2) << '\n';
            if (!f) throw std::runtime_error("cannot write summary");
        }
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        failed = true;
    }
    for (const auto& r : results) {
        log << r.name << ": " << r.summary["mode"].get<std::string>()
            << (r.numeric_failure ? " FAILED (" + r.summary["error"].get<std::string>() + ")"
                                  : r.summary["converged"].get<bool>() ? " converged" : " not converged")
            << '\n';
        failed = failed || r.numeric_failure;
    }
    return failed ? exit_numeric : exit_ok;
}

inline int run_config_file(const std::string& path, const RunOptions& opt, std::ostream& log = std::cerr) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        log << "error: " << path << ":1:1: cannot open config\n";
        return exit_config;
    }
    std::ostringstream buf;
    buf << f.rdbuf();
    return run_config_text(buf.str(), path, opt, log);
}

} // namespace ergofix::experiment
