#include "saml/control.hpp"
#include "saml/error.hpp"

namespace saml {

LearnedModel::LearnedModel(const DynamicsModel* base, Mlp net, Eigen::Index state_dim, Eigen::Index control_dim)
    : base_(base), net_(std::make_unique<Mlp>(std::move(net))), n_(state_dim), p_(control_dim) {
  if (net_->input_dim() != n_ + p_ || net_->output_dim() != n_)
    throw ConfigError("network shape " + std::to_string(net_->input_dim()) + " -> " +
                      std::to_string(net_->output_dim()) + " does not fit the system dimensions");
  if (base_ != nullptr && (base_->state_dim() != n_ || base_->control_dim() != p_))
    throw ConfigError("base model dimensions do not match");
  eval_ = std::make_unique<MlpEvaluator>(*net_);
  input_.resize(n_ + p_);
}

Eigen::VectorXd LearnedModel::step(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
  detail::require(x.size() == n_ && u.size() == p_, "state or control has the wrong dimension");
  input_ << x, u;
  Eigen::VectorXd out = eval_->forward(input_);
  if (base_ != nullptr) out += base_->step(x, u);
  return out;
}

Eigen::VectorXd LearnedModel::linearize(const Eigen::VectorXd& x, const Eigen::VectorXd& u, Eigen::MatrixXd& dx,
                                        Eigen::MatrixXd& du) const {
  detail::require(x.size() == n_ && u.size() == p_, "state or control has the wrong dimension");
  input_ << x, u;
  Eigen::VectorXd out = eval_->forward(input_);
  const Eigen::MatrixXd& jac = eval_->input_jacobian();
  if (base_ != nullptr) {
    out += base_->linearize(x, u, dx, du);
    dx += jac.leftCols(n_);
    du += jac.rightCols(p_);
  } else {
    dx = jac.leftCols(n_);
    du = jac.rightCols(p_);
  }
  return out;
}

}  // namespace saml
