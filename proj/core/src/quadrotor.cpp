#include <cmath>
#include <numbers>

#include <Eigen/Dense>
#include <unsupported/Eigen/AutoDiff>

#include "quadrotor_impl.hpp"
#include "saml/error.hpp"
#include "saml/json_io.hpp"
#include "saml/systems.hpp"

namespace saml {

void QuadrotorParams::validate() const {
  if (!(mass > 0.0)) throw ConfigError("mass must be positive");
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(h_max > 0.0)) throw ConfigError("hMax must be positive");
  if (!(ground_alpha >= 0.0 && ground_alpha <= 1.0)) throw ConfigError("ground-effect alpha must lie in [0, 1]");
  if (!(arm_length >= 0.0)) throw ConfigError("armLength must be nonnegative");
  Eigen::LLT<Eigen::Matrix3d> llt(inertia);
  if (llt.info() != Eigen::Success || !inertia.isApprox(inertia.transpose()))
    throw ConfigError("inertia must be symmetric positive definite");
}

nlohmann::json QuadrotorParams::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) rows.push_back({inertia(r, 0), inertia(r, 1), inertia(r, 2)});
  return {{"mass", mass},       {"inertia", rows},   {"dt", dt},
          {"gravity", gravity}, {"armLength", arm_length}, {"hMax", h_max},
          {"alpha", ground_alpha}, {"invertTheta", invert_theta}};
}

QuadrotorParams QuadrotorParams::from_json(const nlohmann::json& j) {
  QuadrotorParams p;
  p.mass = value_or(j, "mass", p.mass);
  p.dt = value_or(j, "dt", p.dt);
  p.gravity = value_or(j, "gravity", p.gravity);
  p.arm_length = value_or(j, "armLength", p.arm_length);
  p.h_max = value_or(j, "hMax", p.h_max);
  p.ground_alpha = value_or(j, "alpha", p.ground_alpha);
  p.invert_theta = value_or(j, "invertTheta", p.invert_theta);
  if (j.is_object() && j.contains("inertia")) {
    const auto rows = value_or<std::vector<std::vector<double>>>(j, "inertia", {});
    if (rows.size() != 3) throw ConfigError("inertia must be a 3x3 matrix");
    for (int r = 0; r < 3; ++r) {
      if (rows[r].size() != 3) throw ConfigError("inertia must be a 3x3 matrix");
      for (int c = 0; c < 3; ++c) p.inertia(r, c) = rows[r][c];
    }
  }
  p.validate();
  return p;
}

Eigen::Vector3d propeller_arm(int i, double arm_length) {
  switch (i) {
    case 0:
      return {arm_length, 0.0, 0.0};
    case 1:
      return {0.0, -arm_length, 0.0};
    case 2:
      return {-arm_length, 0.0, 0.0};
    case 3:
      return {0.0, arm_length, 0.0};
  }
  throw ContractViolation("propeller index must be 0..3");
}

double tilt_angle(const Quat<double>& q) {
  // For a unit quaternion the world z component of the body z axis is
  // 1 - 2 (x^2 + y^2) = cos(theta); this form stays accurate near 0 and pi.
  return 2.0 * std::atan2(std::hypot(q.x, q.y), std::hypot(q.w, q.z));
}

namespace {

Quat<double> state_quaternion(const Eigen::VectorXd& x) {
  detail::require(x.size() == kQuadStateDim, "quadrotor state must have 13 entries");
  const Quat<double> q{x[6], x[7], x[8], x[9]};
  detail::require(std::abs(q.norm() - 1.0) <= kQuadQuaternionTolerance, "quadrotor quaternion is not unit");
  return quat_normalize(q);
}

}  // namespace

GroundEffect ground_effect(const Eigen::VectorXd& x, const Eigen::VectorXd& u, int propeller,
                           const QuadrotorParams& params) {
  detail::require(u.size() == kQuadControlDim, "quadrotor control must have 4 entries");
  const Quat<double> q = state_quaternion(x);
  GroundEffect g;
  g.prop_height = x[2] + quat_rotate(q, propeller_arm(propeller, params.arm_length)).z();
  const double theta = tilt_angle(q);
  g.theta = params.invert_theta ? std::numbers::pi - theta : theta;
  // A propeller cannot be below the ground plane; heights below zero count as
  // zero so the height factor stays in [0, 1].
  const double height_factor = std::max(0.0, 1.0 - std::max(g.prop_height, 0.0) / params.h_max);
  const double over = std::max(g.theta - 0.5 * std::numbers::pi, 0.0);
  const double angle_factor = 4.0 * over * over / (std::numbers::pi * std::numbers::pi);
  g.gain = height_factor * angle_factor * params.ground_alpha;
  g.thrust = u[propeller] * (1.0 + g.gain);
  return g;
}

Eigen::Vector4d ground_effect_thrust(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                     const QuadrotorParams& params) {
  Eigen::Vector4d h;
  for (int i = 0; i < 4; ++i) h[i] = ground_effect(x, u, i, params).thrust;
  return h;
}

Eigen::Vector3d quad_torque(const Eigen::Vector4d& u) { return detail::quad_torque_t<double>(u); }

Eigen::VectorXd quad_step(const Eigen::VectorXd& x, const Eigen::VectorXd& u, const QuadrotorParams& params,
                          bool with_ground_effect) {
  detail::require(u.size() == kQuadControlDim, "quadrotor control must have 4 entries");
  state_quaternion(x);
  const Eigen::Vector4d thrust = with_ground_effect ? ground_effect_thrust(x, u, params) : Eigen::Vector4d(u);
  const Eigen::Matrix<double, 13, 1> xs = x;
  return detail::quad_step_t<double>(xs, thrust, params);
}

Eigen::VectorXd quad_base_linearize(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                    const QuadrotorParams& params, Eigen::MatrixXd& dx, Eigen::MatrixXd& du) {
  using Ad = Eigen::AutoDiffScalar<Eigen::Matrix<double, 17, 1>>;
  detail::require(u.size() == kQuadControlDim, "quadrotor control must have 4 entries");
  state_quaternion(x);
  Eigen::Matrix<Ad, 13, 1> xa;
  Eigen::Matrix<Ad, 4, 1> ua;
  for (int i = 0; i < 13; ++i) xa[i] = Ad(x[i], 17, i);
  for (int i = 0; i < 4; ++i) ua[i] = Ad(u[i], 17, 13 + i);
  const Eigen::Matrix<Ad, 13, 1> next = detail::quad_step_t<Ad>(xa, ua, params);
  Eigen::VectorXd value(13);
  dx.resize(13, 13);
  du.resize(13, 4);
  for (int r = 0; r < 13; ++r) {
    value[r] = next[r].value();
    dx.row(r) = next[r].derivatives().head<13>().transpose();
    du.row(r) = next[r].derivatives().tail<4>().transpose();
  }
  return value;
}

}  // namespace saml
