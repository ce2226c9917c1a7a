#include "saml/objective.hpp"

#include <cmath>

#include "saml/error.hpp"

namespace saml {

namespace {

constexpr double kZeroResidual = 1e-12;

struct LossAndGrad {
  double value;
  Eigen::VectorXd grad;  // d loss / d prediction
};

LossAndGrad loss_and_grad(LossKind kind, double delta_c, const Eigen::VectorXd& residual, double target_norm) {
  const double rn = residual.norm();
  switch (kind) {
    case LossKind::Euclidean:
      if (rn < kZeroResidual) return {rn, Eigen::VectorXd::Zero(residual.size())};
      return {rn, residual / rn};
    case LossKind::SquaredEuclidean:
      return {rn * rn, 2.0 * residual};
    case LossKind::NormalizedEuclidean:
      if (!(target_norm >= delta_c) || !(target_norm > 0.0))
        throw ContractViolation("normalized loss evaluated on a sample with ||x_{t+1}|| below delta_c");
      if (rn < kZeroResidual) return {rn / target_norm, Eigen::VectorXd::Zero(residual.size())};
      return {rn / target_norm, residual / (rn * target_norm)};
  }
  return {0.0, Eigen::VectorXd::Zero(residual.size())};
}

}  // namespace

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::Euclidean:
      return "euclidean";
    case LossKind::SquaredEuclidean:
      return "squaredEuclidean";
    case LossKind::NormalizedEuclidean:
      return "normalizedEuclidean";
  }
  return "?";
}

std::string to_string(ConstraintForm form) {
  return form == ConstraintForm::ConditionalMean ? "conditionalMean" : "expectationWeighted";
}

LossKind loss_kind_from_string(const std::string& name) {
  if (name == "euclidean") return LossKind::Euclidean;
  if (name == "squaredEuclidean") return LossKind::SquaredEuclidean;
  if (name == "normalizedEuclidean") return LossKind::NormalizedEuclidean;
  throw ConfigError("unknown loss kind '" + name + "'");
}

ConstraintForm constraint_form_from_string(const std::string& name) {
  if (name == "conditionalMean") return ConstraintForm::ConditionalMean;
  if (name == "expectationWeighted") return ConstraintForm::ExpectationWeighted;
  throw ConfigError("unknown constraint form '" + name + "'");
}

void ConstrainedObjective::validate() const {
  for (std::size_t k = 0; k < constraints.size(); ++k) {
    if (!(constraints[k].bound > 0.0))
      throw ConfigError("constraint " + std::to_string(k + 1) + " needs a positive bound epsilon_c");
  }
  if (!(delta_c >= 0.0)) throw ConfigError("delta_c must be nonnegative");
}

nlohmann::json ConstrainedObjective::to_json() const {
  nlohmann::json cs = nlohmann::json::array();
  for (const auto& c : constraints) {
    cs.push_back({{"loss", to_string(c.loss)},
                  {"indicator", c.indicator.to_json()},
                  {"epsilon", c.bound},
                  {"form", to_string(c.form)}});
  }
  return {{"residual", residual_mode},
          {"loss", to_string(loss)},
          {"objectiveIndicator", objective_indicator.to_json()},
          {"constraints", cs},
          {"deltaC", delta_c}};
}

ConstrainedObjective ConstrainedObjective::from_json(const nlohmann::json& j) {
  ConstrainedObjective obj;
  try {
    obj.residual_mode = j.value("residual", true);
    obj.loss = loss_kind_from_string(j.value("loss", std::string("euclidean")));
    if (j.contains("objectiveIndicator")) obj.objective_indicator = IndicatorSet::from_json(j.at("objectiveIndicator"));
    obj.delta_c = j.value("deltaC", 0.0);
    for (const auto& c : j.value("constraints", nlohmann::json::array())) {
      ConstraintSpec spec;
      spec.loss = loss_kind_from_string(c.value("loss", std::string("euclidean")));
      spec.indicator = IndicatorSet::from_json(c.at("indicator"));
      spec.bound = c.at("epsilon").get<double>();
      spec.form = constraint_form_from_string(c.value("form", std::string("conditionalMean")));
      obj.constraints.push_back(std::move(spec));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed objective config: ") + e.what());
  }
  obj.validate();
  return obj;
}

DualState DualState::zeros(Eigen::Index k) {
  return DualState{Eigen::VectorXd::Zero(k), AdamState::for_size(k)};
}

// ---------------------------------------------------------------------------
// per-sample operations

Eigen::VectorXd prediction(const ConstrainedObjective& obj, const Mlp& model, const DynamicsModel* base,
                           const TransitionSample& s) {
  Eigen::VectorXd input(s.state.size() + s.control.size());
  input << s.state, s.control;
  Eigen::VectorXd out = mlp_forward(model, input);
  detail::require(out.size() == s.next_state.size(), "network output does not match the state dimension");
  if (obj.residual_mode) {
    detail::require(base != nullptr, "residual mode needs a base model");
    out += base->step(s.state, s.control);
  }
  return out;
}

double sample_loss(LossKind kind, double delta_c, const Eigen::VectorXd& predicted, const TransitionSample& s) {
  detail::require(predicted.size() == s.next_state.size(), "prediction has the wrong dimension");
  return loss_and_grad(kind, delta_c, predicted - s.next_state, s.next_state.norm()).value;
}

double sample_loss(const ConstrainedObjective& obj, const Mlp& model, const DynamicsModel* base,
                   const TransitionSample& s) {
  return sample_loss(obj.loss, obj.delta_c, prediction(obj, model, base, s), s);
}

namespace {

EmpiricalLagrangian make_problem(const ConstrainedObjective& obj, const DynamicsModel* base,
                                 std::span<const TransitionSample> batch) {
  detail::require(!batch.empty(), "batch must be nonempty");
  return EmpiricalLagrangian(obj, batch, base);
}

}  // namespace

double empirical_objective(const ConstrainedObjective& obj, const Mlp& model, const DynamicsModel* base,
                           std::span<const TransitionSample> batch) {
  const auto problem = make_problem(obj, base, batch);
  return problem.evaluate_all(model, Eigen::VectorXd::Zero(obj.constraints.size()), false).objective;
}

ConstraintValue empirical_constraint(const ConstrainedObjective& obj, const Mlp& model,
                                     const DynamicsModel* base, std::span<const TransitionSample> batch,
                                     std::size_t k) {
  detail::require(k < obj.constraints.size(), "constraint index out of range");
  const auto problem = make_problem(obj, base, batch);
  const auto eval = problem.evaluate_all(model, Eigen::VectorXd::Zero(obj.constraints.size()), false);
  return {eval.constraints[static_cast<Eigen::Index>(k)], eval.active[k]};
}

double lagrangian_value(const ConstrainedObjective& obj, const Mlp& model, const DynamicsModel* base,
                        std::span<const TransitionSample> batch, const DualState& dual) {
  const auto problem = make_problem(obj, base, batch);
  return problem.evaluate_all(model, dual.multipliers, false).lagrangian;
}

GradientBuffer primal_gradient(const ConstrainedObjective& obj, const Mlp& model, const DynamicsModel* base,
                               std::span<const TransitionSample> batch, const DualState& dual) {
  const auto problem = make_problem(obj, base, batch);
  auto eval = problem.evaluate_all(model, dual.multipliers, true);
  if (!eval.primal_gradient.all_finite()) throw TrainingError("non-finite primal gradient");
  return std::move(eval.primal_gradient);
}

Eigen::VectorXd dual_gradient(const ConstrainedObjective& obj, const Mlp& model, const DynamicsModel* base,
                              std::span<const TransitionSample> batch) {
  const auto problem = make_problem(obj, base, batch);
  return problem.evaluate_all(model, Eigen::VectorXd::Zero(obj.constraints.size()), false).constraints;
}

// ---------------------------------------------------------------------------
// EmpiricalLagrangian

EmpiricalLagrangian::EmpiricalLagrangian(ConstrainedObjective obj, std::span<const TransitionSample> samples,
                                         const DynamicsModel* base)
    : obj_(std::move(obj)) {
  obj_.validate();
  if (obj_.residual_mode && base == nullptr) throw ConfigError("residual mode needs a base model");
  const auto n = static_cast<Eigen::Index>(samples.size());
  if (n == 0) {
    masks_.assign(1 + obj_.constraints.size(), {});
    return;
  }
  const Eigen::Index nx = samples.front().state.size();
  const Eigen::Index nu = samples.front().control.size();
  inputs_.resize(nx + nu, n);
  base_ = Eigen::MatrixXd::Zero(nx, n);
  targets_.resize(nx, n);
  target_norm_.resize(n);
  masks_.assign(1 + obj_.constraints.size(), std::vector<char>(static_cast<std::size_t>(n), 0));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    detail::require(s.state.size() == nx && s.control.size() == nu && s.next_state.size() == nx,
                    "samples have inhomogeneous dimensions");
    inputs_.col(i) << s.state, s.control;
    if (obj_.residual_mode) base_.col(i) = base->step(s.state, s.control);
    targets_.col(i) = s.next_state;
    target_norm_[i] = s.next_state.norm();
    const auto idx = static_cast<std::size_t>(i);
    masks_[0][idx] = obj_.objective_indicator.contains(s) ? 1 : 0;
    for (std::size_t k = 0; k < obj_.constraints.size(); ++k)
      masks_[k + 1][idx] = obj_.constraints[k].indicator.contains(s) ? 1 : 0;
  }
}

BatchEvaluation EmpiricalLagrangian::evaluate(const Mlp& model, std::span<const std::size_t> batch,
                                              const Eigen::VectorXd& multipliers, bool with_gradient) const {
  const std::size_t K = obj_.constraints.size();
  detail::require(!batch.empty(), "batch must be nonempty");
  detail::require(static_cast<std::size_t>(multipliers.size()) == K,
                  "multiplier count does not match the constraint count");
  detail::require(model.input_dim() == inputs_.rows() && model.output_dim() == targets_.rows(),
                  "network shape does not match the samples");

  const auto m = static_cast<Eigen::Index>(batch.size());
  const double inv_m = 1.0 / static_cast<double>(m);
  Eigen::MatrixXd x(inputs_.rows(), m);
  for (Eigen::Index j = 0; j < m; ++j) {
    detail::require(batch[static_cast<std::size_t>(j)] < sample_count(), "batch index out of range");
    x.col(j) = inputs_.col(static_cast<Eigen::Index>(batch[static_cast<std::size_t>(j)]));
  }

  ForwardCache cache;
  Eigen::MatrixXd pred = mlp_forward_batch(model, x, with_gradient ? &cache : nullptr);

  // Membership counts do not depend on the parameters.
  std::vector<std::size_t> counts(K, 0);
  for (std::size_t k = 0; k < K; ++k)
    for (auto i : batch) counts[k] += static_cast<std::size_t>(masks_[k + 1][i]);

  std::vector<double> constraint_weight(K, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    if (counts[k] == 0) continue;
    constraint_weight[k] = obj_.constraints[k].form == ConstraintForm::ConditionalMean
                               ? 1.0 / static_cast<double>(counts[k])
                               : inv_m;
  }

  BatchEvaluation eval;
  eval.constraints = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(K));
  eval.active.assign(K, false);
  std::vector<double> in_set_sum(K, 0.0);
  Eigen::MatrixXd cotangent;
  if (with_gradient) cotangent = Eigen::MatrixXd::Zero(pred.rows(), m);

  for (Eigen::Index j = 0; j < m; ++j) {
    const auto i = batch[static_cast<std::size_t>(j)];
    const auto col = static_cast<Eigen::Index>(i);
    pred.col(j) += base_.col(col);
    const Eigen::VectorXd residual = pred.col(j) - targets_.col(col);
    if (masks_[0][i]) {
      const auto lg = loss_and_grad(obj_.loss, obj_.delta_c, residual, target_norm_[col]);
      eval.objective += lg.value;
      if (with_gradient) cotangent.col(j) += inv_m * lg.grad;
    }
    for (std::size_t k = 0; k < K; ++k) {
      if (!masks_[k + 1][i]) continue;
      const auto& spec = obj_.constraints[k];
      const auto lg = loss_and_grad(spec.loss, obj_.delta_c, residual, target_norm_[col]);
      in_set_sum[k] += lg.value;
      if (with_gradient && multipliers[static_cast<Eigen::Index>(k)] != 0.0)
        cotangent.col(j) += multipliers[static_cast<Eigen::Index>(k)] * constraint_weight[k] * lg.grad;
    }
  }
  eval.objective *= inv_m;

  for (std::size_t k = 0; k < K; ++k) {
    if (counts[k] == 0) continue;
    const auto& spec = obj_.constraints[k];
    const double count = static_cast<double>(counts[k]);
    double value;
    if (spec.form == ConstraintForm::ConditionalMean) {
      value = in_set_sum[k] / count - spec.bound;
    } else {
      // (1/M) sum_i (loss_i - eps / frac) I_i  with frac = count / M
      const double frac = count * inv_m;
      value = inv_m * (in_set_sum[k] - count * spec.bound / frac);
    }
    eval.constraints[static_cast<Eigen::Index>(k)] = value;
    eval.active[k] = true;
  }
  eval.lagrangian = eval.objective + multipliers.dot(eval.constraints);

  if (with_gradient) {
    eval.primal_gradient = GradientBuffer::zeros_like(model);
    mlp_backward_batch(model, cache, cotangent, eval.primal_gradient);
  }
  return eval;
}

BatchEvaluation EmpiricalLagrangian::evaluate_all(const Mlp& model, const Eigen::VectorXd& multipliers,
                                                  bool with_gradient) const {
  std::vector<std::size_t> all(sample_count());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return evaluate(model, all, multipliers, with_gradient);
}

}  // namespace saml
