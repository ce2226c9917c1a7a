#include <cmath>

#include "saml/error.hpp"
#include "saml/json_io.hpp"
#include "saml/systems.hpp"

namespace saml {

void BallPaddleParams::validate() const {
  if (!(restitution > 0.0 && restitution <= 1.0)) throw ConfigError("restitution must lie in (0, 1]");
  if (!(base_restitution > 0.0 && base_restitution <= 1.0))
    throw ConfigError("baseRestitution must lie in (0, 1]");
  if (!(gravity > 0.0)) throw ConfigError("gravity must be positive");
}

nlohmann::json BallPaddleParams::to_json() const {
  return {{"restitution", restitution},
          {"baseRestitution", base_restitution},
          {"normalBias", normal_bias},
          {"gravity", gravity}};
}

BallPaddleParams BallPaddleParams::from_json(const nlohmann::json& j) {
  BallPaddleParams p;
  p.restitution = value_or(j, "restitution", p.restitution);
  p.base_restitution = value_or(j, "baseRestitution", p.base_restitution);
  p.normal_bias = value_or(j, "normalBias", p.normal_bias);
  p.gravity = value_or(j, "gravity", p.gravity);
  p.validate();
  return p;
}

Eigen::Vector3d ball_bounce(const Eigen::Vector3d& v_ball, const Eigen::Vector3d& v_paddle,
                            const Eigen::Vector3d& n, double restitution) {
  detail::require(std::abs(n.norm() - 1.0) <= 1e-9, "paddle normal must be a unit vector");
  const Eigen::Vector3d rel = v_ball - v_paddle;
  return restitution * (rel - 2.0 * n * n.dot(rel)) + v_paddle;
}

Eigen::Vector3d rotate_about_y(const Eigen::Vector3d& v, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * v.x() + s * v.z(), v.y(), -s * v.x() + c * v.z()};
}

Eigen::Vector3d ball_base_bounce(const Eigen::Vector3d& v_ball, const Eigen::Vector3d& v_paddle,
                                 const Eigen::Vector3d& n_commanded, const BallPaddleParams& params) {
  detail::require(std::abs(n_commanded.norm() - 1.0) <= 1e-9, "paddle normal must be a unit vector");
  // Rotation preserves the norm up to rounding; renormalize so the contract of
  // ball_bounce holds exactly.
  const Eigen::Vector3d n = rotate_about_y(n_commanded, params.normal_bias).normalized();
  return ball_bounce(v_ball, v_paddle, n, params.base_restitution);
}

Eigen::Vector3d paddle_normal(double roll, double pitch) {
  // Ry(pitch) Rx(roll) e_z
  const Eigen::Vector3d rx(0.0, -std::sin(roll), std::cos(roll));
  return rotate_about_y(rx, pitch);
}

Eigen::VectorXd paddle_control(const Eigen::Vector3d& v_ball, double roll, double pitch, double speed) {
  const Eigen::Vector3d n = paddle_normal(roll, pitch);
  Eigen::VectorXd u(6);
  u << v_ball + speed * n, n;
  return u;
}

}  // namespace saml
