#pragma once

// Ready-made families used by the CLI, the tests and the acceptance suite.

#include <cmath>
#include <initializer_list>
#include <numbers>

#include "ergofix/operators.hpp"

namespace ergofix::builtins {

/// 2 pi (1 - 1/phi) = pi (3 - sqrt 5).
inline const double golden_angle = std::numbers::pi * (3.0 - std::sqrt(5.0));

inline Vector vec(std::initializer_list<double> xs) {
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index k = 0;
    for (double x : xs) v[k++] = x;
    return v;
}

/// Two rotations about the origin on the ball of the given radius.
inline OperatorFamily rotation_pair(double theta, double phi, double radius = 2.0) {
    return CommutingPair(NonexpansiveMap::rotation(theta), NonexpansiveMap::rotation(phi),
                         Domain::ball(Vector::Zero(2), radius));
}

/// exp(-tA) on the centered ball.
inline OperatorFamily linear_flow(const Matrix& a, double radius = 2.0) {
    return LinearFlow(a, Domain::ball(Vector::Zero(a.rows()), radius));
}

inline OperatorFamily diag_flow(std::initializer_list<double> diag, double radius = 2.0) {
    return linear_flow(vec(diag).asDiagonal().toDenseMatrix(), radius);
}

/// e^{-t} on [-1, 1].
inline OperatorFamily scalar_decay_flow() {
    return LinearFlow(Matrix::Identity(1, 1), Domain::ball(Vector::Zero(1), 1.0));
}

inline OperatorFamily rotation_flow(double omega, double radius = 2.0) {
    return RotationFlow(omega, Vector::Zero(2), Domain::ball(Vector::Zero(2), radius));
}

/// T = s I, U = diag(1, c): commuting linear contractions.
inline OperatorFamily contraction_pair(double scale = 0.5, double c = 0.8, double radius = 2.0) {
    Matrix u = Matrix::Identity(2, 2);
    u(1, 1) = c;
    return CommutingPair(NonexpansiveMap::affine(scale * Matrix::Identity(2, 2), Vector::Zero(2)),
                         NonexpansiveMap::affine(u, Vector::Zero(2)), Domain::ball(Vector::Zero(2), radius));
}

/// Projection onto a smaller centered ball, paired with a rotation about the
/// same center (they commute).
inline OperatorFamily projection_rotation_pair(double theta, double inner_radius = 1.0, double radius = 2.0) {
    return CommutingPair(NonexpansiveMap::projection(Domain::ball(Vector::Zero(2), inner_radius)),
                         NonexpansiveMap::rotation(theta), Domain::ball(Vector::Zero(2), radius));
}

} // namespace ergofix::builtins
