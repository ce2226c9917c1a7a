#pragma once

#include <cmath>

#include <Eigen/Dense>

#include "saml/error.hpp"

namespace saml {

// Plain value of a scalar, so templated dynamics can branch on AutoDiff types.
inline double scalar_value(double s) { return s; }
template <class S>
auto scalar_value(const S& s) -> decltype(s.value(), double()) {
  return scalar_value(s.value());
}

// Hamilton quaternion (w, x, y, z).
template <class S>
struct Quat {
  S w{1}, x{0}, y{0}, z{0};

  static Quat identity() { return {S(1), S(0), S(0), S(0)}; }
  static Quat pure(const Eigen::Matrix<S, 3, 1>& v) { return {S(0), v.x(), v.y(), v.z()}; }

  Eigen::Matrix<S, 3, 1> vec() const { return {x, y, z}; }
  Quat conjugate() const { return {w, -x, -y, -z}; }
  S squared_norm() const { return w * w + x * x + y * y + z * z; }
  S norm() const {
    using std::sqrt;
    return sqrt(squared_norm());
  }
};

template <class S>
Quat<S> operator*(const Quat<S>& a, const Quat<S>& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

template <class S>
Quat<S> quat_multiply(const Quat<S>& a, const Quat<S>& b) {
  return a * b;
}

template <class S>
Quat<S> quat_normalize(const Quat<S>& q) {
  const S n = q.norm();
  if (!(scalar_value(n) >= 1e-12)) throw NumericError("cannot normalize a quaternion with norm below 1e-12");
  return {q.w / n, q.x / n, q.y / n, q.z / n};
}

// q (x) [0, v] (x) q^-1 for a unit quaternion (q^-1 = conjugate).
template <class S>
Eigen::Matrix<S, 3, 1> quat_rotate(const Quat<S>& q, const Eigen::Matrix<S, 3, 1>& v) {
  return (q * Quat<S>::pure(v) * q.conjugate()).vec();
}

// Checked variant for callers outside the dynamics inner loop.
inline Eigen::Vector3d quat_rotate_checked(const Quat<double>& q, const Eigen::Vector3d& v) {
  detail::require(std::abs(q.norm() - 1.0) <= 1e-6, "quat_rotate needs a unit quaternion");
  return quat_rotate(q, v);
}

inline Quat<double> quat_from_axis_angle(const Eigen::Vector3d& axis, double angle) {
  const double n = axis.norm();
  detail::require(n > 0.0, "rotation axis must be nonzero");
  const Eigen::Vector3d a = axis / n;
  const double s = std::sin(0.5 * angle);
  return {std::cos(0.5 * angle), a.x() * s, a.y() * s, a.z() * s};
}

}  // namespace saml
