#include "saml/trainer.hpp"

#include <cmath>

#include "saml/json_io.hpp"

namespace saml {

std::string to_string(UpdateRule rule) { return rule == UpdateRule::Adam ? "adam" : "sgd"; }

UpdateRule update_rule_from_string(const std::string& name) {
  if (name == "adam") return UpdateRule::Adam;
  if (name == "sgd") return UpdateRule::Sgd;
  throw ConfigError("unknown update rule '" + name + "'");
}

void TrainerConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batchSize must be at least 1");
  if (!(primal_rate > 0.0) || !(dual_rate > 0.0)) throw ConfigError("learning rates must be positive");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (log_every < 1) throw ConfigError("logEvery must be at least 1");
  if (checkpoint_every < 0) throw ConfigError("checkpointEvery must be nonnegative");
}

nlohmann::json TrainerConfig::to_json() const {
  return {{"batchSize", batch_size},         {"primalRate", primal_rate},
          {"dualRate", dual_rate},           {"epochs", epochs},
          {"seed", seed},                    {"primalRule", to_string(primal_rule)},
          {"dualRule", to_string(dual_rule)}, {"logEvery", log_every},
          {"checkpointEvery", checkpoint_every}};
}

TrainerConfig TrainerConfig::from_json(const nlohmann::json& j) {
  TrainerConfig c;
  c.batch_size = value_or<std::size_t>(j, "batchSize", c.batch_size);
  c.primal_rate = value_or(j, "primalRate", c.primal_rate);
  c.dual_rate = value_or(j, "dualRate", c.dual_rate);
  c.epochs = value_or<std::int64_t>(j, "epochs", c.epochs);
  c.seed = value_or<std::uint64_t>(j, "seed", c.seed);
  c.primal_rule = update_rule_from_string(value_or<std::string>(j, "primalRule", "adam"));
  c.dual_rule = update_rule_from_string(value_or<std::string>(j, "dualRule", "adam"));
  c.log_every = value_or<std::int64_t>(j, "logEvery", c.log_every);
  c.checkpoint_every = value_or<std::int64_t>(j, "checkpointEvery", c.checkpoint_every);
  c.validate();
  return c;
}

std::string TrainingLog::csv_header() const {
  std::string h = "step,epoch,objective";
  for (std::size_t k = 1; k <= constraint_count; ++k) h += ",g_" + std::to_string(k);
  for (std::size_t k = 1; k <= constraint_count; ++k) h += ",lambda_" + std::to_string(k);
  return h + ",lagrangian\n";
}

std::string TrainingLog::to_csv() const {
  std::string out = csv_header();
  for (const auto& r : records) {
    out += std::to_string(r.step) + ',' + std::to_string(r.epoch) + ',' + format_double(r.objective);
    for (Eigen::Index k = 0; k < r.constraints.size(); ++k) out += ',' + format_double(r.constraints[k]);
    for (Eigen::Index k = 0; k < r.multipliers.size(); ++k) out += ',' + format_double(r.multipliers[k]);
    out += ',' + format_double(r.lagrangian) + '\n';
  }
  return out;
}

Eigen::VectorXd project_dual(const Eigen::VectorXd& lambda) { return lambda.cwiseMax(0.0); }

BatchEvaluation train_step(PrimalDualState& state, const LagrangianProblem& problem,
                           std::span<const std::size_t> batch, const TrainerConfig& config) {
  const auto K = static_cast<Eigen::Index>(problem.constraint_count());
  if (state.dual.multipliers.size() != K) throw ContractViolation("dual state does not match the constraint count");

  BatchEvaluation eval = problem.evaluate(state.model, batch, state.dual.multipliers, true);
  if (!std::isfinite(eval.lagrangian) || !eval.constraints.allFinite())
    throw TrainingError("non-finite Lagrangian estimate");
  if (!eval.primal_gradient.all_finite()) throw TrainingError("non-finite primal gradient");

  if (config.primal_rule == UpdateRule::Adam)
    adam_step(state.model, eval.primal_gradient, state.primal_adam, config.primal_rate);
  else
    sgd_step(state.model, eval.primal_gradient, config.primal_rate);
  if (!state.model.all_finite()) throw TrainingError("primal update produced non-finite parameters");

  if (K > 0) {
    // Ascent on lambda: descend on -g.
    if (config.dual_rule == UpdateRule::Adam) {
      const Eigen::VectorXd neg = -eval.constraints;
      adam_update(state.dual.multipliers, neg, state.dual.adam, config.dual_rate);
    } else {
      state.dual.multipliers += config.dual_rate * eval.constraints;
    }
    state.dual.multipliers = project_dual(state.dual.multipliers);
  }
  state.step += 1;
  return eval;
}

EpochBatcher::EpochBatcher(std::size_t n, std::size_t batch_size, std::uint64_t seed)
    : batch_size_(batch_size), order_(n), rng_(seed) {
  detail::require(n > 0, "cannot batch an empty dataset");
  detail::require(batch_size > 0, "batch size must be positive");
  for (std::size_t i = 0; i < n; ++i) order_[i] = i;
}

std::size_t EpochBatcher::batches_per_epoch() const { return (order_.size() + batch_size_ - 1) / batch_size_; }

void EpochBatcher::next_epoch() { rng_.shuffle(std::span<std::size_t>(order_)); }

std::span<const std::size_t> EpochBatcher::batch(std::size_t b) const {
  detail::require(b < batches_per_epoch(), "batch index out of range");
  const std::size_t begin = b * batch_size_;
  const std::size_t end = std::min(order_.size(), begin + batch_size_);
  return std::span<const std::size_t>(order_).subspan(begin, end - begin);
}

TrainResult train(const LagrangianProblem& problem, Mlp initial, const TrainerConfig& config,
                  const CheckpointHook& on_checkpoint) {
  config.validate();
  const std::size_t n = problem.sample_count();
  if (n == 0) throw ConfigError("training needs a nonempty dataset");
  const std::size_t K = problem.constraint_count();

  PrimalDualState state;
  state.model = std::move(initial);
  state.dual = DualState::zeros(static_cast<Eigen::Index>(K));

  TrainingLog log;
  log.constraint_count = K;
  EpochBatcher batcher(n, config.batch_size, mix_seed(config.seed, 0x62617463ULL));
  const auto per_epoch = static_cast<std::int64_t>(batcher.batches_per_epoch());
  const std::int64_t total = per_epoch * config.epochs;

  for (std::int64_t epoch = 1; epoch <= config.epochs; ++epoch) {
    batcher.next_epoch();
    for (std::int64_t b = 0; b < per_epoch; ++b) {
      BatchEvaluation eval;
      try {
        eval = train_step(state, problem, batcher.batch(static_cast<std::size_t>(b)), config);
      } catch (const TrainingError& e) {
        throw TrainingAborted(std::string(e.what()) + " at step " + std::to_string(state.step + 1) + " (epoch " +
                                  std::to_string(epoch) + ")",
                              std::move(log), state.step + 1);
      }
      if (state.step % config.log_every == 0 || state.step == total) {
        log.records.push_back({state.step, epoch, eval.objective, std::move(eval.constraints),
                               state.dual.multipliers, eval.lagrangian});
      }
    }
    const bool periodic = config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0;
    if (on_checkpoint && (periodic || epoch == config.epochs)) on_checkpoint(state.model, epoch);
  }

  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  TrainResult result;
  result.final_evaluation = problem.evaluate(state.model, all, state.dual.multipliers, false);
  result.model = std::move(state.model);
  result.dual = std::move(state.dual);
  result.log = std::move(log);
  result.steps = state.step;
  return result;
}

TrainResult train(const Dataset& data, const ConstrainedObjective& obj, const DynamicsModel* base, Mlp initial,
                  const TrainerConfig& config, const CheckpointHook& on_checkpoint) {
  if (data.size() == 0) throw ConfigError("training needs a nonempty dataset");
  const EmpiricalLagrangian problem(obj, data.samples, base);
  return train(problem, std::move(initial), config, on_checkpoint);
}

}  // namespace saml
