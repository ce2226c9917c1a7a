#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "saml/dataset.hpp"
#include "saml/dynamics.hpp"
#include "saml/indicator.hpp"
#include "saml/nnet.hpp"
#include "saml/problem.hpp"

namespace saml {

enum class LossKind { Euclidean, SquaredEuclidean, NormalizedEuclidean };
enum class ConstraintForm { ConditionalMean, ExpectationWeighted };

std::string to_string(LossKind kind);
std::string to_string(ConstraintForm form);
LossKind loss_kind_from_string(const std::string& name);
ConstraintForm constraint_form_from_string(const std::string& name);

struct ConstraintSpec {
  LossKind loss = LossKind::Euclidean;
  IndicatorSet indicator;
  double bound = 0.0;  // epsilon_c
  ConstraintForm form = ConstraintForm::ConditionalMean;
};

// A constrained model-learning problem:
//   min  mean( loss(s) * I_0(s) )
//   s.t. constraint_k <= 0,  k = 1..K
// with the prediction either f_base(x,u) + phi(x,u) (residual mode) or phi(x,u).
struct ConstrainedObjective {
  bool residual_mode = true;
  LossKind loss = LossKind::Euclidean;
  IndicatorSet objective_indicator = IndicatorSet::all();
  std::vector<ConstraintSpec> constraints;
  double delta_c = 0.0;  // lower bound on ||x_{t+1}|| wherever a normalized loss is evaluated

  void validate() const;
  nlohmann::json to_json() const;
  static ConstrainedObjective from_json(const nlohmann::json& j);
};

struct DualState {
  Eigen::VectorXd multipliers;  // lambda >= 0
  AdamState adam;

  static DualState zeros(Eigen::Index k);
};

struct ConstraintValue {
  double value = 0.0;
  bool active = true;  // false: no sample of the batch lies in the constraint set
};

Eigen::VectorXd prediction(const ConstrainedObjective& obj, const Mlp& model, const DynamicsModel* base,
                           const TransitionSample& s);

double sample_loss(LossKind kind, double delta_c, const Eigen::VectorXd& predicted, const TransitionSample& s);
double sample_loss(const ConstrainedObjective& obj, const Mlp& model, const DynamicsModel* base,
                   const TransitionSample& s);

double empirical_objective(const ConstrainedObjective& obj, const Mlp& model, const DynamicsModel* base,
                           std::span<const TransitionSample> batch);
ConstraintValue empirical_constraint(const ConstrainedObjective& obj, const Mlp& model,
                                     const DynamicsModel* base, std::span<const TransitionSample> batch,
                                     std::size_t k);
double lagrangian_value(const ConstrainedObjective& obj, const Mlp& model, const DynamicsModel* base,
                        std::span<const TransitionSample> batch, const DualState& dual);
GradientBuffer primal_gradient(const ConstrainedObjective& obj, const Mlp& model, const DynamicsModel* base,
                               std::span<const TransitionSample> batch, const DualState& dual);
Eigen::VectorXd dual_gradient(const ConstrainedObjective& obj, const Mlp& model, const DynamicsModel* base,
                              std::span<const TransitionSample> batch);

// The empirical Lagrangian over a fixed sample set. Network inputs, base-model
// predictions and indicator memberships are computed once at construction;
// evaluate() then costs one batched forward (and backward) pass.
class EmpiricalLagrangian final : public LagrangianProblem {
 public:
  EmpiricalLagrangian(ConstrainedObjective obj, std::span<const TransitionSample> samples,
                      const DynamicsModel* base);

  std::size_t sample_count() const override { return static_cast<std::size_t>(targets_.cols()); }
  std::size_t constraint_count() const override { return obj_.constraints.size(); }
  BatchEvaluation evaluate(const Mlp& model, std::span<const std::size_t> batch,
                           const Eigen::VectorXd& multipliers, bool with_gradient) const override;
  BatchEvaluation evaluate_all(const Mlp& model, const Eigen::VectorXd& multipliers,
                               bool with_gradient) const;

  const ConstrainedObjective& objective() const { return obj_; }

 private:
  ConstrainedObjective obj_;
  Eigen::MatrixXd inputs_;       // [x; u] per column
  Eigen::MatrixXd base_;         // f_base(x, u), zero in full mode
  Eigen::MatrixXd targets_;      // x_{t+1}
  Eigen::VectorXd target_norm_;  // ||x_{t+1}||
  std::vector<std::vector<char>> masks_;  // [0] objective, [1+k] constraint k
};

}  // namespace saml
