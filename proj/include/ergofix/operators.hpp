#pragma once

// Compact convex domains in Euclidean space and the built-in commutative
// nonexpansive semigroup actions:
//   CommutingPair  S = N x N,   T(i, j) = T^i U^j
//   LinearFlow     S = [0,inf), T(t) = exp(-t A), A symmetric PSD
//   RotationFlow   S = [0,inf), planar rotation by omega t about a center

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "ergofix/detail/random.hpp"
#include "ergofix/error.hpp"
#include "ergofix/semigroup.hpp"

namespace ergofix {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double domain_tol = 1e-9;

struct Ball {
    Vector center;
    double radius = 1.0;
};

struct Box {
    Vector lower;
    Vector upper;
};

/// Compact convex C with its metric projection.
class Domain {
public:
    Domain(Ball b) : shape_(std::move(b)) {
        const auto& ball = std::get<Ball>(shape_);
        if (!(ball.radius > 0.0) || !std::isfinite(ball.radius)) throw invalid_argument_error("ball radius must be > 0");
        if (ball.center.size() == 0 || !ball.center.allFinite()) throw invalid_argument_error("ball center must be finite");
    }
    Domain(Box b) : shape_(std::move(b)) {
        const auto& box = std::get<Box>(shape_);
        if (box.lower.size() == 0 || box.lower.size() != box.upper.size())
            throw invalid_argument_error("box bounds must have equal nonzero dimension");
        if (!box.lower.allFinite() || !box.upper.allFinite()) throw invalid_argument_error("box bounds must be finite");
        if ((box.lower.array() >= box.upper.array()).any()) throw invalid_argument_error("box needs lower < upper");
    }

    static Domain ball(Vector center, double radius) { return Domain(Ball{std::move(center), radius}); }
    static Domain box(Vector lower, Vector upper) { return Domain(Box{std::move(lower), std::move(upper)}); }

    const std::variant<Ball, Box>& shape() const { return shape_; }
    bool is_ball() const { return std::holds_alternative<Ball>(shape_); }

    Eigen::Index dimension() const {
        return is_ball() ? std::get<Ball>(shape_).center.size() : std::get<Box>(shape_).lower.size();
    }

    Vector project(const Vector& x) const {
        check_dim(x);
        if (const auto* b = std::get_if<Ball>(&shape_)) {
            const Vector d = x - b->center;
            const double r = d.norm();
            if (r <= b->radius) return x;
            return b->center + (b->radius / r) * d;
        }
        const auto& box = std::get<Box>(shape_);
        return x.cwiseMax(box.lower).cwiseMin(box.upper);
    }

    double distance(const Vector& x) const { return (project(x) - x).norm(); }
    bool contains(const Vector& x, double tol = domain_tol) const { return distance(x) <= tol; }

    /// Uniform sample (rejection from the bounding box for balls).
    Vector sample(detail::Rng& rng) const {
        if (const auto* b = std::get_if<Ball>(&shape_)) {
            const auto d = b->center.size();
            Vector v(d);
            do {
                for (Eigen::Index k = 0; k < d; ++k) v[k] = rng.uniform(-1.0, 1.0);
            } while (v.squaredNorm() > 1.0);
            return b->center + b->radius * v;
        }
        const auto& box = std::get<Box>(shape_);
        Vector v(box.lower.size());
        for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = rng.uniform(box.lower[k], box.upper[k]);
        return v;
    }

    /// sup over C of ||x||.
    double max_norm() const {
        if (const auto* b = std::get_if<Ball>(&shape_)) return b->center.norm() + b->radius;
        const auto& box = std::get<Box>(shape_);
        return box.lower.cwiseAbs().cwiseMax(box.upper.cwiseAbs()).norm();
    }

private:
    void check_dim(const Vector& x) const {
        if (x.size() != dimension())
            throw invalid_argument_error("point has dimension " + std::to_string(x.size()) + ", domain has " +
                                         std::to_string(dimension()));
    }

    std::variant<Ball, Box> shape_;
};

inline Matrix rotation_matrix(double angle) {
    Matrix r(2, 2);
    const double c = std::cos(angle), s = std::sin(angle);
    r << c, -s, s, c;
    return r;
}

struct Rotation {
    double theta = 0.0;
    Vector center = Vector::Zero(2);
};

struct AffineContraction {
    Matrix linear;
    Vector offset;
};

struct MetricProjection {
    Domain target;
};

/// A single nonexpansive self-map of Euclidean space.
class NonexpansiveMap {
public:
    NonexpansiveMap(Rotation r) : kind_(std::move(r)) {
        const auto& rot = std::get<Rotation>(kind_);
        if (rot.center.size() != 2) throw invalid_argument_error("rotation is planar: center must have dimension 2");
        if (!std::isfinite(rot.theta) || !rot.center.allFinite()) throw invalid_argument_error("rotation parameters must be finite");
        matrix_ = rotation_matrix(rot.theta);
    }
    NonexpansiveMap(AffineContraction a) : kind_(std::move(a)) {
        const auto& aff = std::get<AffineContraction>(kind_);
        if (aff.linear.rows() != aff.linear.cols() || aff.linear.rows() != aff.offset.size() || aff.offset.size() == 0)
            throw invalid_argument_error("affine map needs a square matrix matching the offset dimension");
        if (!aff.linear.allFinite() || !aff.offset.allFinite()) throw invalid_argument_error("affine map entries must be finite");
        Eigen::JacobiSVD<Matrix> svd(aff.linear);
        if (svd.singularValues()(0) > 1.0 + 1e-12)
            throw invalid_argument_error("affine map operator norm " + std::to_string(svd.singularValues()(0)) +
                                         " exceeds 1");
    }
    NonexpansiveMap(MetricProjection p) : kind_(std::move(p)) {}

    static NonexpansiveMap rotation(double theta, Vector center = Vector::Zero(2)) {
        return NonexpansiveMap(Rotation{theta, std::move(center)});
    }
    static NonexpansiveMap affine(Matrix linear, Vector offset) {
        return NonexpansiveMap(AffineContraction{std::move(linear), std::move(offset)});
    }
    static NonexpansiveMap projection(Domain target) { return NonexpansiveMap(MetricProjection{std::move(target)}); }
    static NonexpansiveMap identity(Eigen::Index dim) { return affine(Matrix::Identity(dim, dim), Vector::Zero(dim)); }

    const std::variant<Rotation, AffineContraction, MetricProjection>& kind() const { return kind_; }

    Eigen::Index dimension() const {
        if (const auto* r = std::get_if<Rotation>(&kind_)) return r->center.size();
        if (const auto* a = std::get_if<AffineContraction>(&kind_)) return a->offset.size();
        return std::get<MetricProjection>(kind_).target.dimension();
    }

    Vector operator()(const Vector& x) const {
        if (const auto* r = std::get_if<Rotation>(&kind_)) return r->center + matrix_ * (x - r->center);
        if (const auto* a = std::get_if<AffineContraction>(&kind_)) return a->linear * x + a->offset;
        return std::get<MetricProjection>(kind_).target.project(x);
    }

private:
    std::variant<Rotation, AffineContraction, MetricProjection> kind_;
    Matrix matrix_;
};

namespace detail {

inline void require_dim(const Domain& c, Eigen::Index d, const char* what) {
    if (c.dimension() != d)
        throw invalid_argument_error(std::string(what) + ": domain dimension " + std::to_string(c.dimension()) +
                                     " does not match map dimension " + std::to_string(d));
}

} // namespace detail

inline constexpr std::uint64_t construction_seed = 0x5eed'c0de'2024ULL;
inline constexpr int construction_samples = 1000;

/// T(i, j) = T^i U^j for commuting nonexpansive T, U on C. Commutation and
/// domain preservation are checked by sampling at construction.
class CommutingPair {
public:
    CommutingPair(NonexpansiveMap t, NonexpansiveMap u, Domain domain)
        : t_(std::move(t)), u_(std::move(u)), domain_(std::move(domain)) {
        detail::require_dim(domain_, t_.dimension(), "commuting pair");
        detail::require_dim(domain_, u_.dimension(), "commuting pair");
        detail::Rng rng(construction_seed);
        double worst = 0.0;
        for (int k = 0; k < construction_samples; ++k) {
            const Vector x = domain_.sample(rng);
            const Vector tu = t_(u_(x));
            worst = std::max(worst, (tu - u_(t_(x))).norm());
            if (!domain_.contains(t_(x)) || !domain_.contains(u_(x)))
                throw invalid_argument_error("commuting pair: a map leaves the domain");
        }
        if (worst > 1e-10)
            throw invalid_argument_error("commuting pair: T U != U T (max defect " + std::to_string(worst) + ")");
    }

    const NonexpansiveMap& t() const { return t_; }
    const NonexpansiveMap& u() const { return u_; }
    const Domain& domain() const { return domain_; }
    Eigen::Index dimension() const { return domain_.dimension(); }

    /// U^j then T^i by repeated application.
    Vector power(std::int64_t i, std::int64_t j, Vector x) const {
        for (std::int64_t k = 0; k < j; ++k) x = u_(x);
        for (std::int64_t k = 0; k < i; ++k) x = t_(x);
        return x;
    }

private:
    NonexpansiveMap t_;
    NonexpansiveMap u_;
    Domain domain_;
};

/// exp(-t A) for symmetric positive-semidefinite A, via eigendecomposition.
class LinearFlow {
public:
    LinearFlow(Matrix a, Domain domain) : a_(std::move(a)), domain_(std::move(domain)) {
        if (a_.rows() != a_.cols() || a_.rows() == 0) throw invalid_argument_error("linear flow needs a square matrix");
        if (!a_.allFinite()) throw invalid_argument_error("linear flow matrix must be finite");
        if ((a_ - a_.transpose()).cwiseAbs().maxCoeff() > 1e-10) throw invalid_argument_error("linear flow matrix must be symmetric");
        detail::require_dim(domain_, a_.rows(), "linear flow");
        Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (a_ + a_.transpose()));
        eigenvalues_ = eig.eigenvalues();
        eigenvectors_ = eig.eigenvectors();
        if (eigenvalues_.minCoeff() < -1e-10) throw invalid_argument_error("linear flow matrix must be positive semidefinite");
        eigenvalues_ = eigenvalues_.cwiseMax(0.0);
        detail::Rng rng(construction_seed);
        for (int k = 0; k < 64; ++k) {
            const Vector x = domain_.sample(rng);
            if (!domain_.contains(apply(rng.uniform(0.0, 10.0), x)))
                throw invalid_argument_error("linear flow leaves the domain");
        }
    }

    const Matrix& matrix() const { return a_; }
    const Vector& eigenvalues() const { return eigenvalues_; }
    const Matrix& eigenvectors() const { return eigenvectors_; }
    const Domain& domain() const { return domain_; }
    Eigen::Index dimension() const { return a_.rows(); }
    double operator_norm() const { return eigenvalues_.maxCoeff(); }

    Vector apply(double t, const Vector& x) const {
        const Vector coeffs = eigenvectors_.transpose() * x;
        const Vector scaled = (-t * eigenvalues_).array().exp().matrix().cwiseProduct(coeffs);
        return eigenvectors_ * scaled;
    }

private:
    Matrix a_;
    Vector eigenvalues_;
    Matrix eigenvectors_;
    Domain domain_;
};

/// Rotation by omega t about center, in the plane.
class RotationFlow {
public:
    RotationFlow(double omega, Vector center, Domain domain)
        : omega_(omega), center_(std::move(center)), domain_(std::move(domain)) {
        if (!std::isfinite(omega_)) throw invalid_argument_error("rotation flow rate must be finite");
        if (center_.size() != 2) throw invalid_argument_error("rotation flow is planar");
        detail::require_dim(domain_, 2, "rotation flow");
        detail::Rng rng(construction_seed);
        for (int k = 0; k < 64; ++k) {
            const Vector x = domain_.sample(rng);
            if (!domain_.contains(apply(rng.uniform(0.0, 10.0), x)))
                throw invalid_argument_error("rotation flow leaves the domain");
        }
    }

    double omega() const { return omega_; }
    const Vector& center() const { return center_; }
    const Domain& domain() const { return domain_; }
    Eigen::Index dimension() const { return 2; }

    Vector apply(double t, const Vector& x) const { return center_ + rotation_matrix(omega_ * t) * (x - center_); }

private:
    double omega_;
    Vector center_;
    Domain domain_;
};

using OperatorFamily = std::variant<CommutingPair, LinearFlow, RotationFlow>;

inline const Domain& domain_of(const OperatorFamily& f) {
    return std::visit([](const auto& v) -> const Domain& { return v.domain(); }, f);
}

inline IndexKind index_kind(const OperatorFamily& f) {
    return std::holds_alternative<CommutingPair>(f) ? IndexKind::grid2d : IndexKind::time;
}

inline Eigen::Index dimension_of(const OperatorFamily& f) { return domain_of(f).dimension(); }

namespace detail {

inline void require_in_domain(const OperatorFamily& f, const Vector& x) {
    const auto& c = domain_of(f);
    if (x.size() != c.dimension())
        throw invalid_argument_error("point dimension " + std::to_string(x.size()) + " does not match family dimension " +
                                     std::to_string(c.dimension()));
    if (!x.allFinite()) throw numeric_error("point has non-finite coordinates");
    const double d = c.distance(x);
    if (d > domain_tol) throw domain_error("point lies outside the domain (distance " + std::to_string(d) + ")");
}

/// T(s)x without the domain check.
inline Vector act_unchecked(const OperatorFamily& f, const Index& s, const Vector& x) {
    if (const auto* pair = std::get_if<CommutingPair>(&f)) {
        const auto* g = std::get_if<Grid2D>(&s);
        if (!g) throw invalid_argument_error("commuting pair is indexed by Grid2D");
        if (g->i < 1 || g->j < 1) throw invalid_argument_error("Grid2D components must be >= 1");
        return pair->power(g->i, g->j, x);
    }
    const auto* tm = std::get_if<Time>(&s);
    if (!tm) throw invalid_argument_error("flows are indexed by Time");
    if (!(tm->t >= 0.0) || !std::isfinite(tm->t)) throw invalid_argument_error("Time index must be finite and >= 0");
    if (const auto* lin = std::get_if<LinearFlow>(&f)) return lin->apply(tm->t, x);
    return std::get<RotationFlow>(f).apply(tm->t, x);
}

} // namespace detail

/// T(s)x for x in C.
inline Vector act(const OperatorFamily& f, const Index& s, const Vector& x) {
    detail::require_in_domain(f, x);
    return detail::act_unchecked(f, s, x);
}

/// max over sampled pairs of ||T(s)x - T(s)y|| - ||x - y||.
inline double check_nonexpansive(const OperatorFamily& f, const Index& s, int samples, std::uint64_t seed) {
    if (samples < 1) throw invalid_argument_error("samples must be >= 1");
    detail::Rng rng(seed);
    const auto& c = domain_of(f);
    double worst = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < samples; ++k) {
        const Vector x = c.sample(rng);
        const Vector y = c.sample(rng);
        const double v = (act(f, s, x) - act(f, s, y)).norm() - (x - y).norm();
        worst = std::max(worst, v);
    }
    return worst;
}

/// max over sampled x of ||T(s + t)x - T(s)T(t)x||.
inline double check_semigroup_law(const OperatorFamily& f, const Index& s, const Index& t, int samples,
                                  std::uint64_t seed) {
    if (samples < 1) throw invalid_argument_error("samples must be >= 1");
    detail::Rng rng(seed);
    const auto& c = domain_of(f);
    const Index st = combine(s, t);
    double worst = 0.0;
    for (int k = 0; k < samples; ++k) {
        const Vector x = c.sample(rng);
        worst = std::max(worst, (act(f, st, x) - act(f, s, act(f, t, x))).norm());
    }
    return worst;
}

/// Memoized table P(i, j) = T^i U^j x for 1 <= i <= imax, 1 <= j <= jmax,
/// built with the same operation sequence as CommutingPair::power.
class PowerTable {
public:
    PowerTable(const CommutingPair& pair, std::int64_t imax, std::int64_t jmax, const Vector& x)
        : imax_(imax), jmax_(jmax) {
        if (imax < 1 || jmax < 1) throw invalid_argument_error("power table needs imax, jmax >= 1");
        cells_.reserve(static_cast<std::size_t>(imax * jmax));
        Vector col = x;
        for (std::int64_t j = 1; j <= jmax; ++j) {
            col = pair.u()(col);
            Vector y = col;
            for (std::int64_t i = 1; i <= imax; ++i) {
                y = pair.t()(y);
                cells_.push_back(y);
            }
        }
    }

    const Vector& at(std::int64_t i, std::int64_t j) const {
        if (i < 1 || i > imax_ || j < 1 || j > jmax_) throw invalid_argument_error("power table index out of range");
        return cells_[static_cast<std::size_t>((j - 1) * imax_ + (i - 1))];
    }

private:
    std::int64_t imax_;
    std::int64_t jmax_;
    std::vector<Vector> cells_;
};

} // namespace ergofix
