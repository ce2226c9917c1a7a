#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "saml/error.hpp"
#include "saml/nnet.hpp"
#include "saml/objective.hpp"
#include "saml/problem.hpp"
#include "saml/rng.hpp"

namespace saml {

enum class UpdateRule { Adam, Sgd };

std::string to_string(UpdateRule rule);
UpdateRule update_rule_from_string(const std::string& name);

struct TrainerConfig {
  std::size_t batch_size = 32;
  double primal_rate = 1e-3;
  double dual_rate = 1e-4;
  std::int64_t epochs = 200;
  std::uint64_t seed = 0;
  UpdateRule primal_rule = UpdateRule::Adam;
  UpdateRule dual_rule = UpdateRule::Adam;
  std::int64_t log_every = 1;         // steps between log records; the last step is always logged
  std::int64_t checkpoint_every = 0;  // epochs between checkpoints; 0 = final only

  void validate() const;
  nlohmann::json to_json() const;
  static TrainerConfig from_json(const nlohmann::json& j);
};

// Minibatch estimates at step entry; multipliers after the step's projection.
struct TrainingRecord {
  std::int64_t step = 0;
  std::int64_t epoch = 0;
  double objective = 0.0;
  Eigen::VectorXd constraints;
  Eigen::VectorXd multipliers;
  double lagrangian = 0.0;
};

struct TrainingLog {
  std::size_t constraint_count = 0;
  std::vector<TrainingRecord> records;

  // Columns: step,epoch,objective,g_1..g_K,lambda_1..lambda_K,lagrangian
  std::string csv_header() const;
  std::string to_csv() const;
};

Eigen::VectorXd project_dual(const Eigen::VectorXd& lambda);

struct PrimalDualState {
  Mlp model;
  AdamState primal_adam;
  DualState dual;
  std::int64_t step = 0;
};

// One iteration of the primal-dual method: both gradients are taken at the
// entry point (theta, lambda); theta descends, then lambda ascends and is
// projected onto the nonnegative orthant. Returns the entry-point estimates.
BatchEvaluation train_step(PrimalDualState& state, const LagrangianProblem& problem,
                           std::span<const std::size_t> batch, const TrainerConfig& config);

// Epoch-wise random partition of [0, n) into batches of at most `batch_size`,
// reshuffled each epoch.
class EpochBatcher {
 public:
  EpochBatcher(std::size_t n, std::size_t batch_size, std::uint64_t seed);

  std::size_t batches_per_epoch() const;
  void next_epoch();
  std::span<const std::size_t> batch(std::size_t b) const;

 private:
  std::size_t batch_size_;
  std::vector<std::size_t> order_;
  Pcg32 rng_;
};

class TrainingAborted : public TrainingError {
 public:
  TrainingAborted(const std::string& message, TrainingLog partial, std::int64_t step)
      : TrainingError(message), partial_(std::move(partial)), step_(step) {}

  const TrainingLog& partial_log() const { return partial_; }
  std::int64_t step() const { return step_; }

 private:
  TrainingLog partial_;
  std::int64_t step_;
};

struct TrainResult {
  Mlp model;
  DualState dual;
  TrainingLog log;
  BatchEvaluation final_evaluation;  // full training set, final (theta, lambda)
  std::int64_t steps = 0;
};

// Called after every `checkpoint_every` epochs and after the last one.
using CheckpointHook = std::function<void(const Mlp& model, std::int64_t epoch)>;

TrainResult train(const LagrangianProblem& problem, Mlp initial, const TrainerConfig& config,
                  const CheckpointHook& on_checkpoint = {});

TrainResult train(const Dataset& data, const ConstrainedObjective& obj, const DynamicsModel* base, Mlp initial,
                  const TrainerConfig& config, const CheckpointHook& on_checkpoint = {});

}  // namespace saml
