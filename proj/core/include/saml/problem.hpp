#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "saml/nnet.hpp"

namespace saml {

// Minibatch estimate of the empirical Lagrangian and its gradients.
struct BatchEvaluation {
  double objective = 0.0;
  Eigen::VectorXd constraints;   // dual gradient estimate, one entry per constraint
  std::vector<bool> active;      // false where the batch had no sample in the constraint set
  double lagrangian = 0.0;
  GradientBuffer primal_gradient;  // empty unless requested
};

// Anything the primal-dual trainer can optimize: a sample-indexed Lagrangian
// over network parameters and K nonnegative multipliers.
class LagrangianProblem {
 public:
  virtual ~LagrangianProblem() = default;

  virtual std::size_t sample_count() const = 0;
  virtual std::size_t constraint_count() const = 0;
  virtual BatchEvaluation evaluate(const Mlp& model, std::span<const std::size_t> batch,
                                   const Eigen::VectorXd& multipliers, bool with_gradient) const = 0;
};

}  // namespace saml
