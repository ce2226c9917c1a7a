#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "saml/dynamics.hpp"
#include "saml/nnet.hpp"

namespace saml {

// f_base(x, u) + phi(x, u) in residual mode (base non-null), phi(x, u) alone
// otherwise. Jacobians combine the base model's with the network's input
// Jacobian. Holds a scratch evaluator, so one instance must not be shared
// between threads.
class LearnedModel final : public DynamicsModel {
 public:
  LearnedModel(const DynamicsModel* base, Mlp net, Eigen::Index state_dim, Eigen::Index control_dim);

  Eigen::Index state_dim() const override { return n_; }
  Eigen::Index control_dim() const override { return p_; }
  Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const override;
  Eigen::VectorXd linearize(const Eigen::VectorXd& x, const Eigen::VectorXd& u, Eigen::MatrixXd& dx,
                            Eigen::MatrixXd& du) const override;

  const Mlp& network() const { return *net_; }
  bool residual() const { return base_ != nullptr; }

 private:
  const DynamicsModel* base_;
  std::unique_ptr<Mlp> net_;
  std::unique_ptr<MlpEvaluator> eval_;
  Eigen::Index n_;
  Eigen::Index p_;
  mutable Eigen::VectorXd input_;
};

// ---------------------------------------------------------------------------
// Trajectory optimization by single shooting.

enum class StageCost { AbsSum, PositionDistance };

struct MpcConfig {
  int horizon = 10;
  Eigen::VectorXd control_lo;
  Eigen::VectorXd control_hi;
  StageCost stage_cost = StageCost::AbsSum;
  // absSum sums |x_i| over these state entries; positionDistance uses the
  // first three entries against `target`.
  std::vector<int> cost_indices{0};
  Eigen::Vector3d target = Eigen::Vector3d::Zero();

  bool min_height_enabled = false;
  double min_height = 0.2;
  int height_index = 2;
  bool terminal_upright_enabled = false;
  double upright_tolerance = 0.05;
  int quaternion_w_index = 6;

  int restarts = 8;
  int iterations = 100;  // Adam iterations per penalty stage
  double learning_rate = 0.5;
  std::vector<double> penalty_weights{1e1, 1e2, 1e3, 1e4};
  double feasibility_tolerance = 1e-3;
  double stall_tolerance = 1e-7;  // stop a stage once no control moves more than this

  bool has_state_constraints() const { return min_height_enabled || terminal_upright_enabled; }
  void validate(Eigen::Index control_dim) const;
  nlohmann::json to_json() const;
  static MpcConfig from_json(const nlohmann::json& j);
};

struct MpcSolution {
  Eigen::MatrixXd controls;  // p x T
  Eigen::MatrixXd states;    // n x (T + 1), predicted under the model; column 0 is x0
  double cost = 0.0;         // stage costs of states 1..T
  double violation = 0.0;    // largest state-constraint violation
  bool feasible = true;
  int restart = 0;
};

// Stage cost of a single state and its gradient.
double stage_cost(const MpcConfig& config, const Eigen::VectorXd& x, Eigen::VectorXd* grad = nullptr);

// Cost and constraint violation of a control sequence under `model`.
MpcSolution evaluate_controls(const MpcConfig& config, const DynamicsModel& model, const Eigen::VectorXd& x0,
                              const Eigen::MatrixXd& controls);

MpcSolution mpc_solve(const MpcConfig& config, const DynamicsModel& model, const Eigen::VectorXd& x0,
                      std::uint64_t seed);

struct RolloutResult {
  Eigen::MatrixXd states;       // n x (steps + 1), realized on the true system
  Eigen::MatrixXd controls;     // p x steps
  Eigen::MatrixXd predictions;  // n x steps, the model's one-step prediction of each realized state
  double cost = 0.0;            // stage costs of states 0..steps
  double max_violation = 0.0;   // worst planned violation over all solves
  int infeasible_solves = 0;
};

// Receding horizon: solve, apply the first control to `truth`, repeat.
RolloutResult mpc_rollout(const MpcConfig& config, const DynamicsModel& model, const DynamicsModel& truth,
                          const Eigen::VectorXd& x0, int steps, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Single-shot paddle command.

// Where a ball leaving the paddle with velocity v comes back down to the
// impact height, relative to the impact point.
Eigen::Vector2d landing_offset(const Eigen::Vector3d& v, double gravity);

struct PaddleProblem {
  Eigen::Vector2d target = Eigen::Vector2d::Zero();
  Eigen::Vector3d v_ball = Eigen::Vector3d::Zero();
  double roll_lo = -0.5, roll_hi = 0.5;
  double pitch_lo = -0.5, pitch_hi = 0.5;
  double speed_lo = 3.0, speed_hi = 5.0;
  double gravity = 9.81;

  void validate() const;
};

struct PaddleConfig {
  int samples = 512;
  int refine = 4;
  int iterations = 60;
  double learning_rate = 0.01;
  double fd_step = 1e-5;

  nlohmann::json to_json() const;
  static PaddleConfig from_json(const nlohmann::json& j);
};

struct PaddleSolution {
  double roll = 0.0;
  double pitch = 0.0;
  double speed = 0.0;
  Eigen::VectorXd control;      // (v_paddle, n)
  Eigen::Vector3d predicted;    // model's post-impact velocity
  double objective = 0.0;       // |loc(predicted) - target|
};

double paddle_objective(const PaddleProblem& problem, const DynamicsModel& model, double roll, double pitch,
                        double speed, Eigen::Vector3d* predicted = nullptr);

PaddleSolution paddle_solve(const PaddleProblem& problem, const DynamicsModel& model, const PaddleConfig& config,
                            std::uint64_t seed);

}  // namespace saml
