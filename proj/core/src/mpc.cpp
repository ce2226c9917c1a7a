#include <cmath>
#include <limits>

#include "saml/control.hpp"
#include "saml/error.hpp"
#include "saml/json_io.hpp"
#include "saml/rng.hpp"

namespace saml {

void MpcConfig::validate(Eigen::Index control_dim) const {
  if (horizon < 1) throw ConfigError("MPC horizon must be at least 1");
  if (control_lo.size() != control_dim || control_hi.size() != control_dim)
    throw ConfigError("MPC control bounds must have one entry per control dimension");
  if (!(control_lo.array() <= control_hi.array()).all()) throw ConfigError("MPC control bounds need lo <= hi");
  if (restarts < 1 || iterations < 1) throw ConfigError("MPC restarts and iterations must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("MPC learning rate must be positive");
  if (penalty_weights.empty()) throw ConfigError("MPC penalty schedule must be nonempty");
  if (stage_cost == StageCost::AbsSum && cost_indices.empty()) throw ConfigError("absSum cost needs indices");
}

nlohmann::json MpcConfig::to_json() const {
  nlohmann::json j{{"horizon", horizon},
                   {"controlLo", saml::to_json(control_lo)},
                   {"controlHi", saml::to_json(control_hi)},
                   {"stageCost", stage_cost == StageCost::AbsSum ? "absSum" : "positionDistance"},
                   {"costIndices", cost_indices},
                   {"target", {target.x(), target.y(), target.z()}},
                   {"restarts", restarts},
                   {"iterations", iterations},
                   {"learningRate", learning_rate},
                   {"penaltyWeights", penalty_weights},
                   {"feasibilityTolerance", feasibility_tolerance},
                   {"stallTolerance", stall_tolerance}};
  j["minHeight"] = min_height_enabled ? nlohmann::json(min_height) : nlohmann::json(nullptr);
  j["uprightTolerance"] = terminal_upright_enabled ? nlohmann::json(upright_tolerance) : nlohmann::json(nullptr);
  return j;
}

MpcConfig MpcConfig::from_json(const nlohmann::json& j) {
  MpcConfig c;
  c.horizon = value_or(j, "horizon", c.horizon);
  c.control_lo = vector_from_json(j.at("controlLo"));
  c.control_hi = vector_from_json(j.at("controlHi"));
  const auto cost = value_or<std::string>(j, "stageCost", "absSum");
  if (cost == "absSum")
    c.stage_cost = StageCost::AbsSum;
  else if (cost == "positionDistance")
    c.stage_cost = StageCost::PositionDistance;
  else
    throw ConfigError("unknown stage cost '" + cost + "'");
  c.cost_indices = value_or(j, "costIndices", c.cost_indices);
  const auto target = value_or<std::vector<double>>(j, "target", {0.0, 0.0, 0.0});
  if (target.size() != 3) throw ConfigError("MPC target must have three entries");
  c.target = Eigen::Vector3d(target[0], target[1], target[2]);
  if (j.contains("minHeight") && !j.at("minHeight").is_null()) {
    c.min_height_enabled = true;
    c.min_height = value_or(j, "minHeight", c.min_height);
  }
  if (j.contains("uprightTolerance") && !j.at("uprightTolerance").is_null()) {
    c.terminal_upright_enabled = true;
    c.upright_tolerance = value_or(j, "uprightTolerance", c.upright_tolerance);
  }
  c.restarts = value_or(j, "restarts", c.restarts);
  c.iterations = value_or(j, "iterations", c.iterations);
  c.learning_rate = value_or(j, "learningRate", c.learning_rate);
  c.penalty_weights = value_or(j, "penaltyWeights", c.penalty_weights);
  c.feasibility_tolerance = value_or(j, "feasibilityTolerance", c.feasibility_tolerance);
  c.stall_tolerance = value_or(j, "stallTolerance", c.stall_tolerance);
  return c;
}

double stage_cost(const MpcConfig& config, const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
  if (grad != nullptr) grad->setZero(x.size());
  if (config.stage_cost == StageCost::AbsSum) {
    double c = 0.0;
    for (int i : config.cost_indices) {
      detail::require(i >= 0 && i < x.size(), "cost index exceeds the state dimension");
      c += std::abs(x[i]);
      if (grad != nullptr) (*grad)[i] = static_cast<double>((x[i] > 0.0) - (x[i] < 0.0));
    }
    return c;
  }
  detail::require(x.size() >= 3, "positionDistance needs a 3-D position");
  const Eigen::Vector3d d = x.head<3>() - config.target;
  const double c = d.norm();
  if (grad != nullptr && c >= 1e-12) grad->head<3>() = d / c;
  return c;
}

namespace {

// Violation of the state constraints at time t (1..T) and its gradient.
double violation_at(const MpcConfig& config, const Eigen::VectorXd& x, int t, Eigen::VectorXd* grad) {
  double worst = 0.0;
  if (grad != nullptr) grad->setZero(x.size());
  if (config.min_height_enabled) {
    const double v = config.min_height - x[config.height_index];
    if (v > 0.0) {
      worst = std::max(worst, v);
      if (grad != nullptr) (*grad)[config.height_index] += -2.0 * v;  // d(v^2)/dx
    }
  }
  if (config.terminal_upright_enabled && t == config.horizon) {
    const double d = x[config.quaternion_w_index] - 1.0;
    const double v = std::abs(d) - config.upright_tolerance;
    if (v > 0.0) {
      worst = std::max(worst, v);
      if (grad != nullptr) (*grad)[config.quaternion_w_index] += 2.0 * v * (d > 0.0 ? 1.0 : -1.0);
    }
  }
  return worst;
}

bool better(const MpcSolution& a, const MpcSolution& b) {
  if (a.feasible != b.feasible) return a.feasible;
  if (a.feasible) return a.cost < b.cost;
  if (a.violation != b.violation) return a.violation < b.violation;
  return a.cost < b.cost;
}

void project(Eigen::MatrixXd& controls, const MpcConfig& config) {
  for (Eigen::Index t = 0; t < controls.cols(); ++t)
    controls.col(t) = controls.col(t).cwiseMax(config.control_lo).cwiseMin(config.control_hi);
}

}  // namespace

MpcSolution evaluate_controls(const MpcConfig& config, const DynamicsModel& model, const Eigen::VectorXd& x0,
                              const Eigen::MatrixXd& controls) {
  MpcSolution s;
  s.controls = controls;
  s.states.resize(x0.size(), controls.cols() + 1);
  s.states.col(0) = x0;
  for (Eigen::Index t = 0; t < controls.cols(); ++t) {
    s.states.col(t + 1) = model.step(s.states.col(t), controls.col(t));
    const int tt = static_cast<int>(t) + 1;
    s.cost += stage_cost(config, s.states.col(t + 1));
    s.violation = std::max(s.violation, violation_at(config, s.states.col(t + 1), tt, nullptr));
  }
  s.feasible = s.violation <= config.feasibility_tolerance;
  return s;
}

MpcSolution mpc_solve(const MpcConfig& config, const DynamicsModel& model, const Eigen::VectorXd& x0,
                      std::uint64_t seed) {
  const Eigen::Index n = model.state_dim();
  const Eigen::Index p = model.control_dim();
  config.validate(p);
  detail::require(x0.size() == n, "initial state has the wrong dimension");
  if (!x0.allFinite()) throw ContractViolation("initial state must be finite");
  const int T = config.horizon;

  const std::vector<double> stages =
      config.has_state_constraints() ? config.penalty_weights : std::vector<double>{0.0};

  std::vector<Eigen::MatrixXd> A(T), B(T);
  Eigen::MatrixXd states(n, T + 1);
  Eigen::VectorXd cost_grad(n), pen_grad(n), costate(n);
  Eigen::MatrixXd grad(p, T);

  MpcSolution best;
  bool have_best = false;
  auto consider = [&](const Eigen::MatrixXd& controls, double cost, double violation, int restart) {
    MpcSolution cand;
    cand.cost = cost;
    cand.violation = violation;
    cand.feasible = violation <= config.feasibility_tolerance;
    cand.restart = restart;
    if (!have_best || better(cand, best)) {
      cand.controls = controls;
      cand.states = states;
      best = std::move(cand);
      have_best = true;
    }
  };

  for (int r = 0; r < config.restarts; ++r) {
    Eigen::MatrixXd u(p, T);
    if (r == 0) {
      u.setZero();
    } else {
      Pcg32 rng(mix_seed(seed, static_cast<std::uint64_t>(r)));
      for (int t = 0; t < T; ++t)
        for (Eigen::Index i = 0; i < p; ++i) u(i, t) = rng.uniform(config.control_lo[i], config.control_hi[i]);
    }
    project(u, config);

    for (double weight : stages) {
      AdamState adam = AdamState::for_size(p * T);
      for (int it = 0; it <= config.iterations; ++it) {
        // Forward pass with Jacobians.
        states.col(0) = x0;
        double cost = 0.0;
        double violation = 0.0;
        for (int t = 0; t < T; ++t) {
          states.col(t + 1) = model.linearize(states.col(t), u.col(t), A[t], B[t]);
          cost += stage_cost(config, states.col(t + 1));
          violation = std::max(violation, violation_at(config, states.col(t + 1), t + 1, nullptr));
        }
        if (!states.allFinite() || !std::isfinite(cost))
          throw NumericError("MPC rollout diverged (restart " + std::to_string(r) + ", iteration " +
                             std::to_string(it) + ", penalty weight " + format_double(weight) + ")");
        consider(u, cost, violation, r);
        if (it == config.iterations) break;

        // Reverse chaining of the costate.
        costate.setZero();
        for (int t = T; t >= 1; --t) {
          stage_cost(config, states.col(t), &cost_grad);
          costate += cost_grad;
          if (weight > 0.0) {
            violation_at(config, states.col(t), t, &pen_grad);
            costate += weight * pen_grad;
          }
          grad.col(t - 1) = B[t - 1].transpose() * costate;
          costate = A[t - 1].transpose() * costate;
        }
        if (!grad.allFinite()) throw NumericError("MPC gradient is not finite");

        const Eigen::MatrixXd before = u;
        Eigen::Map<Eigen::VectorXd> flat(u.data(), p * T);
        const Eigen::Map<const Eigen::VectorXd> gflat(grad.data(), p * T);
        adam_update(flat, gflat, adam, config.learning_rate);
        project(u, config);
        if ((u - before).cwiseAbs().maxCoeff() < config.stall_tolerance) {
          // Stalled: score the final iterate and move on.
          const MpcSolution last = evaluate_controls(config, model, x0, u);
          states = last.states;
          consider(u, last.cost, last.violation, r);
          break;
        }
      }
    }
  }
  return best;
}

RolloutResult mpc_rollout(const MpcConfig& config, const DynamicsModel& model, const DynamicsModel& truth,
                          const Eigen::VectorXd& x0, int steps, std::uint64_t seed) {
  if (steps < 1) throw ConfigError("rollout needs at least one step");
  const Eigen::Index n = model.state_dim();
  RolloutResult r;
  r.states.resize(n, steps + 1);
  r.controls.resize(model.control_dim(), steps);
  r.predictions.resize(n, steps);
  r.states.col(0) = x0;
  r.cost = stage_cost(config, x0);
  for (int k = 0; k < steps; ++k) {
    const Eigen::VectorXd x = r.states.col(k);
    const MpcSolution sol = mpc_solve(config, model, x, mix_seed(seed, static_cast<std::uint64_t>(k)));
    const Eigen::VectorXd u = sol.controls.col(0);
    r.controls.col(k) = u;
    r.predictions.col(k) = model.step(x, u);
    r.states.col(k + 1) = truth.step(x, u);
    r.cost += stage_cost(config, r.states.col(k + 1));
    r.max_violation = std::max(r.max_violation, sol.violation);
    if (!sol.feasible) r.infeasible_solves += 1;
  }
  return r;
}

}  // namespace saml
