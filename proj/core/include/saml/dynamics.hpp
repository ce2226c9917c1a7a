#pragma once

#include <Eigen/Dense>

namespace saml {

// Discrete-time dynamics x' = f(x, u).
class DynamicsModel {
 public:
  virtual ~DynamicsModel() = default;

  virtual Eigen::Index state_dim() const = 0;
  virtual Eigen::Index control_dim() const = 0;
  virtual Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const = 0;

  // Returns f(x, u) and fills the Jacobians d f/d x (n x n) and d f/d u (n x p).
  // The default uses central differences with step 1e-6.
  virtual Eigen::VectorXd linearize(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                    Eigen::MatrixXd& dx, Eigen::MatrixXd& du) const;
};

}  // namespace saml
