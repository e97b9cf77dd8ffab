#pragma once

// Closed-form references for the built-in families. Nothing here calls the
// quadrature, the power tables, or the LP solver: these are the independent
// side of every implementation-vs-reference check.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "ergofix/error.hpp"
#include "ergofix/mean.hpp"
#include "ergofix/operators.hpp"
#include "ergofix/semigroup.hpp"

namespace ergofix::oracle {

inline constexpr double kernel_threshold = 1e-12;

namespace detail {

/// (1/n) sum_{k=1}^n e^{i k angle} by the geometric-sum formula.
inline std::complex<double> mean_phase(double angle, std::int64_t n) {
    const double reduced = std::remainder(angle, 2.0 * std::numbers::pi);
    if (std::abs(reduced) < 1e-15) return {1.0, 0.0};
    const std::complex<double> q = std::polar(1.0, angle);
    const std::complex<double> qn = std::polar(1.0, static_cast<double>(n) * angle);
    return q * (1.0 - qn) / ((1.0 - q) * static_cast<double>(n));
}

inline void require_symmetric_psd(const Matrix& a) {
    if (a.rows() != a.cols() || a.rows() == 0) throw invalid_argument_error("matrix must be square");
    if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-10) throw invalid_argument_error("matrix must be symmetric");
}

inline Eigen::SelfAdjointEigenSolver<Matrix> psd_eigen(const Matrix& a) {
    require_symmetric_psd(a);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (a + a.transpose()));
    if (eig.eigenvalues().minCoeff() < -1e-10) throw invalid_argument_error("matrix must be positive semidefinite");
    return eig;
}

} // namespace detail

/// center + c_T c_U (x - center) as complex multiplication, with
/// c = (1/n) sum_{k=1}^n e^{i k angle}.
inline Vector rotation_cesaro_closed_form(double theta, double phi, std::int64_t n, const Vector& x,
                                          const Vector& center) {
    if (n < 1) throw invalid_argument_error("n must be >= 1");
    if (x.size() != 2 || center.size() != 2) throw invalid_argument_error("rotation closed form is planar");
    const std::complex<double> factor = detail::mean_phase(theta, n) * detail::mean_phase(phi, n);
    const std::complex<double> v = factor * std::complex<double>(x[0] - center[0], x[1] - center[1]);
    Vector out(2);
    out << center[0] + v.real(), center[1] + v.imag();
    return out;
}

/// (1/tau) integral_0^tau exp(-tA) x dt = V diag((1 - e^{-l tau}) / (l tau)) V^T x.
inline Vector linear_flow_mean_closed_form(const Matrix& a, double tau, const Vector& x) {
    if (!(tau > 0.0)) throw invalid_argument_error("tau must be > 0");
    const auto eig = detail::psd_eigen(a);
    if (x.size() != a.rows()) throw invalid_argument_error("dimension mismatch");
    const Vector& lambda = eig.eigenvalues();
    Vector factors(lambda.size());
    for (Eigen::Index k = 0; k < lambda.size(); ++k) {
        const double lt = std::max(0.0, lambda[k]) * tau;
        factors[k] = lt == 0.0 ? 1.0 : -std::expm1(-lt) / lt;
    }
    return eig.eigenvectors() * factors.cwiseProduct(eig.eigenvectors().transpose() * x);
}

/// exp(-tA) x.
inline Vector linear_flow_closed_form(const Matrix& a, double t, const Vector& x) {
    const auto eig = detail::psd_eigen(a);
    const Vector f = (-t * eig.eigenvalues().cwiseMax(0.0)).array().exp().matrix();
    return eig.eigenvectors() * f.cwiseProduct(eig.eigenvectors().transpose() * x);
}

/// Orthogonal projection onto null(A) (eigenvalues <= 1e-12).
inline Vector kernel_projection(const Matrix& a, const Vector& x) {
    const auto eig = detail::psd_eigen(a);
    if (x.size() != a.rows()) throw invalid_argument_error("dimension mismatch");
    Vector out = Vector::Zero(x.size());
    for (Eigen::Index k = 0; k < a.rows(); ++k) {
        if (eig.eigenvalues()[k] > kernel_threshold) continue;
        const Vector v = eig.eigenvectors().col(k);
        out += v.dot(x) * v;
    }
    return out;
}

/// Max over s and indicator functions I_{e} of |mu(a) - mu(a(s + .))|, by
/// enumerating the table directly.
inline double verify_invariant_mean(const FiniteSemigroup& sg, const FiniteMean& mu) {
    std::vector<double> w(sg.size(), 0.0);
    for (const auto& [s, weight] : mu.support()) {
        const auto* e = std::get_if<FiniteElem>(&s);
        if (!e || e->table.get() != &sg) throw invalid_argument_error("mean is not supported on this semigroup");
        w[e->pos] += weight;
    }
    double worst = 0.0;
    for (std::size_t s = 0; s < sg.size(); ++s) {
        for (std::size_t e = 0; e < sg.size(); ++e) {
            double plain = 0.0, shifted = 0.0;
            for (std::size_t t = 0; t < sg.size(); ++t) {
                if (t == e) plain += w[t];
                if (sg.op(s, t) == e) shifted += w[t];
            }
            worst = std::max(worst, std::abs(plain - shifted));
        }
    }
    return worst;
}

struct SinglePoint {
    Vector p;
};

struct AffineSubspaceCapDomain {
    std::vector<Vector> basis; ///< orthonormal
    Vector offset;
    Domain domain;
};

/// F(S), the common fixed point set, known analytically for built-ins.
class AnalyticFixedSet {
public:
    AnalyticFixedSet(SinglePoint p) : set_(std::move(p)) {}
    AnalyticFixedSet(AffineSubspaceCapDomain a) : set_(std::move(a)) {}

    const std::variant<SinglePoint, AffineSubspaceCapDomain>& set() const { return set_; }

    /// Nearest point of the set. For the subspace case this is exact when the
    /// domain is a ball centered on the subspace (the built-in setting);
    /// otherwise alternating projections approximate it.
    Vector nearest(const Vector& z) const {
        if (const auto* p = std::get_if<SinglePoint>(&set_)) return p->p;
        const auto& a = std::get<AffineSubspaceCapDomain>(set_);
        auto onto_subspace = [&](const Vector& y) {
            Vector out = a.offset;
            for (const auto& b : a.basis) out += b.dot(y - a.offset) * b;
            return out;
        };
        Vector y = onto_subspace(z);
        for (int k = 0; k < 1000 && !a.domain.contains(y, 1e-14); ++k) y = onto_subspace(a.domain.project(y));
        return y;
    }

    double distance(const Vector& z) const { return (nearest(z) - z).norm(); }

private:
    std::variant<SinglePoint, AffineSubspaceCapDomain> set_;
};

/// F(S) for a built-in family. Rotation pairs with a nontrivial angle fix only
/// the center; affine pairs are out of scope for closed forms.
inline AnalyticFixedSet fixed_set_of(const OperatorFamily& family) {
    if (const auto* lin = std::get_if<LinearFlow>(&family)) {
        const auto eig = detail::psd_eigen(lin->matrix());
        std::vector<Vector> basis;
        for (Eigen::Index k = 0; k < lin->matrix().rows(); ++k)
            if (eig.eigenvalues()[k] <= kernel_threshold) basis.push_back(eig.eigenvectors().col(k));
        return AffineSubspaceCapDomain{std::move(basis), Vector::Zero(lin->dimension()), lin->domain()};
    }
    if (const auto* rot = std::get_if<RotationFlow>(&family)) {
        if (rot->omega() == 0.0)
            return AffineSubspaceCapDomain{{Vector::Unit(2, 0), Vector::Unit(2, 1)}, Vector::Zero(2), rot->domain()};
        return SinglePoint{rot->center()};
    }
    const auto& pair = std::get<CommutingPair>(family);
    const auto* t = std::get_if<Rotation>(&pair.t().kind());
    const auto* u = std::get_if<Rotation>(&pair.u().kind());
    if (!t || !u) throw invalid_argument_error("closed-form fixed set is only known for rotation pairs");
    auto trivial = [](double a) { return std::abs(std::remainder(a, 2.0 * std::numbers::pi)) < 1e-15; };
    if (trivial(t->theta) && trivial(u->theta))
        return AffineSubspaceCapDomain{{Vector::Unit(2, 0), Vector::Unit(2, 1)}, Vector::Zero(2), pair.domain()};
    return SinglePoint{trivial(t->theta) ? u->center : t->center};
}

} // namespace ergofix::oracle
