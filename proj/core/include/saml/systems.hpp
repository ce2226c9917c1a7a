#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "saml/dataset.hpp"
#include "saml/dynamics.hpp"
#include "saml/quaternion.hpp"
#include "saml/rng.hpp"

namespace saml {

// ---------------------------------------------------------------------------
// Double integrator with position-varying kinetic friction. State (p, v),
// control u.

// b(p) = base + peak * exp(-(p / width)^2): the per-step velocity loss to
// friction. "constant" drops the bump and uses `base` everywhere.
struct FrictionProfile {
  std::string kind = "bump";
  double base = 0.05;
  double peak = 0.15;
  double width = 0.8;

  double operator()(double p) const;
  nlohmann::json to_json() const;
  static FrictionProfile from_json(const nlohmann::json& j);
};

struct DoubleIntegratorParams {
  double dt = 0.1;
  FrictionProfile friction;
  double noise_sigma = 0.0;  // on v_{t+1}, dataset generation only

  void validate() const;
  nlohmann::json to_json() const;
  static DoubleIntegratorParams from_json(const nlohmann::json& j);
};

Eigen::Vector2d di_base_step(double p, double v, double u, const DoubleIntegratorParams& params);

// The quantity c subtracted from v + u dt. With w = v + u dt and the friction
// impulse phi = sign(w) b: returns w when w - phi has a different sign than w
// (the step stops the mass), else phi.
double friction_clamp(double v, double u, double b, double dt);

// With `noise` non-null, adds N(0, noise_sigma^2) to v_{t+1}.
Eigen::Vector2d di_true_step(double p, double v, double u, const DoubleIntegratorParams& params,
                             Pcg32* noise = nullptr);

// ---------------------------------------------------------------------------
// Ball-paddle impact. State is the ball velocity before impact; control is
// (v_paddle, n); the next state is the ball velocity after impact.

struct BallPaddleParams {
  double restitution = 0.8;
  double base_restitution = 0.65;
  double normal_bias = 0.2;  // rotation of n about the y axis assumed by the base model
  double gravity = 9.81;

  void validate() const;
  nlohmann::json to_json() const;
  static BallPaddleParams from_json(const nlohmann::json& j);
};

// v+ = a (v_rel - 2 n (n . v_rel)) + v_paddle with v_rel = v- - v_paddle.
Eigen::Vector3d ball_bounce(const Eigen::Vector3d& v_ball, const Eigen::Vector3d& v_paddle,
                            const Eigen::Vector3d& n, double restitution);
Eigen::Vector3d ball_base_bounce(const Eigen::Vector3d& v_ball, const Eigen::Vector3d& v_paddle,
                                 const Eigen::Vector3d& n_commanded, const BallPaddleParams& params);
Eigen::Vector3d rotate_about_y(const Eigen::Vector3d& v, double angle);

// ---------------------------------------------------------------------------
// Quadrotor. State (p[3], v[3], q[4] = (w, x, y, z), omega[3]); control is the
// four motor forces.

struct QuadrotorParams {
  double mass = 1.0;
  Eigen::Matrix3d inertia = Eigen::Matrix3d::Identity();
  double dt = 0.1;
  double gravity = 9.81;
  double arm_length = 0.2;
  double h_max = 1.5;
  double ground_alpha = 0.5;
  bool invert_theta = false;  // use pi - theta_ground in the ground-effect gain

  void validate() const;
  nlohmann::json to_json() const;
  static QuadrotorParams from_json(const nlohmann::json& j);
};

inline constexpr int kQuadStateDim = 13;
inline constexpr int kQuadControlDim = 4;

// Body-frame arm vector of propeller i (0-based): +x, -y, -x, +y.
Eigen::Vector3d propeller_arm(int i, double arm_length);

// Tilt between the body z axis and the world z axis, in [0, pi].
double tilt_angle(const Quat<double>& q);

struct GroundEffect {
  double gain = 0.0;        // K_ground
  double thrust = 0.0;      // h_i(x, u) = u_i (1 + K_ground)
  double prop_height = 0.0;
  double theta = 0.0;       // theta_ground as used in the gain
};
GroundEffect ground_effect(const Eigen::VectorXd& x, const Eigen::VectorXd& u, int propeller,
                           const QuadrotorParams& params);
Eigen::Vector4d ground_effect_thrust(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                     const QuadrotorParams& params);

Eigen::Vector3d quad_torque(const Eigen::Vector4d& u);

Eigen::VectorXd quad_step(const Eigen::VectorXd& x, const Eigen::VectorXd& u, const QuadrotorParams& params,
                          bool with_ground_effect);

// ---------------------------------------------------------------------------
// Dynamics models and dataset sampling.

struct SystemSpec {
  std::string name;  // doubleIntegrator | ball | quadrotor
  DoubleIntegratorParams di;
  BallPaddleParams ball;
  QuadrotorParams quad;

  Eigen::Index state_dim() const;
  Eigen::Index control_dim() const;
  nlohmann::json params_json() const;
  nlohmann::json to_json() const;
  // {"name": ..., "params": {...}}
  static SystemSpec from_json(const nlohmann::json& j);
};

std::unique_ptr<DynamicsModel> make_true_model(const SystemSpec& spec);
std::unique_ptr<DynamicsModel> make_base_model(const SystemSpec& spec);

// Sampling ranges with every key filled in; `overrides` replaces defaults key
// by key.
nlohmann::json resolve_ranges(const std::string& system, const nlohmann::json& overrides);

// i.i.d. uniform draws over the ranges; next states from the true model.
// noise_sigma perturbs v_{t+1} for the double integrator and every
// next-state entry for the other systems.
Dataset sample_dataset(const SystemSpec& spec, std::size_t count, const nlohmann::json& ranges,
                       std::uint64_t seed, double noise_sigma);

// Ball controls are generated from (roll, pitch, relative speed): the paddle
// normal is Ry(pitch) Rx(roll) e_z and v_paddle = v_ball + speed * n.
Eigen::Vector3d paddle_normal(double roll, double pitch);
Eigen::VectorXd paddle_control(const Eigen::Vector3d& v_ball, double roll, double pitch, double speed);

}  // namespace saml
