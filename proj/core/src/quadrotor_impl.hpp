#pragma once

// Scalar-templated quadrotor update shared by the double evaluation and the
// forward-mode Jacobian of the base model.

#include <Eigen/Dense>

#include "saml/quaternion.hpp"
#include "saml/systems.hpp"

namespace saml {

inline constexpr double kQuadQuaternionTolerance = 0.25;

Eigen::VectorXd quad_base_linearize(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                    const QuadrotorParams& params, Eigen::MatrixXd& dx, Eigen::MatrixXd& du);

namespace detail {

template <class S>
Eigen::Matrix<S, 3, 1> quad_torque_t(const Eigen::Matrix<S, 4, 1>& u) {
  return {u[3] - u[1], u[2] - u[0], (u[0] + u[2]) - (u[1] + u[3])};
}

template <class S>
Eigen::Matrix<S, 3, 1> cross3(const Eigen::Matrix<S, 3, 1>& a, const Eigen::Matrix<S, 3, 1>& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

// One explicit-Euler step with the motor forces already mapped through any
// disturbance. The incoming quaternion is normalized first.
template <class S>
Eigen::Matrix<S, 13, 1> quad_step_t(const Eigen::Matrix<S, 13, 1>& x, const Eigen::Matrix<S, 4, 1>& thrust,
                                    const QuadrotorParams& params) {
  using Vec3 = Eigen::Matrix<S, 3, 1>;
  const Vec3 p = x.template segment<3>(0);
  const Vec3 v = x.template segment<3>(3);
  const Vec3 w = x.template segment<3>(10);
  const Quat<S> q = quat_normalize(Quat<S>{x[6], x[7], x[8], x[9]});
  const S dt(params.dt);

  const S total = (thrust[0] + thrust[1] + thrust[2] + thrust[3]) / S(params.mass);
  const Vec3 acc = quat_rotate(q, Vec3(S(0), S(0), total)) - Vec3(S(0), S(0), S(params.gravity));

  const Quat<S> wq = Quat<S>::pure(w) * q;
  const Quat<S> q_next = quat_normalize(Quat<S>{q.w + S(0.5) * wq.w * dt, q.x + S(0.5) * wq.x * dt,
                                                q.y + S(0.5) * wq.y * dt, q.z + S(0.5) * wq.z * dt});

  const Eigen::Matrix<S, 3, 3> inertia = params.inertia.template cast<S>();
  const Eigen::Matrix<S, 3, 3> inertia_inv = params.inertia.inverse().template cast<S>();
  const Vec3 w_dot = inertia_inv * (quad_torque_t<S>(thrust) - cross3<S>(w, inertia * w));

  Eigen::Matrix<S, 13, 1> out;
  out.template segment<3>(0) = p + v * dt;
  out.template segment<3>(3) = v + acc * dt;
  out[6] = q_next.w;
  out[7] = q_next.x;
  out[8] = q_next.y;
  out[9] = q_next.z;
  out.template segment<3>(10) = w + w_dot * dt;
  return out;
}

}  // namespace detail
}  // namespace saml
