#include <algorithm>
#include <cmath>
#include <numeric>

#include "saml/control.hpp"
#include "saml/error.hpp"
#include "saml/json_io.hpp"
#include "saml/rng.hpp"
#include "saml/systems.hpp"

namespace saml {

Eigen::Vector2d landing_offset(const Eigen::Vector3d& v, double gravity) {
  detail::require(gravity > 0.0, "gravity must be positive");
  const double t_f = 2.0 * std::max(v.z(), 0.0) / gravity;
  return {v.x() * t_f, v.y() * t_f};
}

void PaddleProblem::validate() const {
  if (!(roll_lo <= roll_hi) || !(pitch_lo <= pitch_hi)) throw ConfigError("paddle angle bounds need lo <= hi");
  if (!(speed_lo < speed_hi)) throw ConfigError("paddle speed bounds need v_min < v_max");
  if (!(speed_lo >= 0.0)) throw ConfigError("paddle speed bounds must be nonnegative");
  if (!(gravity > 0.0)) throw ConfigError("gravity must be positive");
}

nlohmann::json PaddleConfig::to_json() const {
  return {{"samples", samples},
          {"refine", refine},
          {"iterations", iterations},
          {"learningRate", learning_rate},
          {"fdStep", fd_step}};
}

PaddleConfig PaddleConfig::from_json(const nlohmann::json& j) {
  PaddleConfig c;
  c.samples = value_or(j, "samples", c.samples);
  c.refine = value_or(j, "refine", c.refine);
  c.iterations = value_or(j, "iterations", c.iterations);
  c.learning_rate = value_or(j, "learningRate", c.learning_rate);
  c.fd_step = value_or(j, "fdStep", c.fd_step);
  if (c.samples < 1 || c.refine < 0 || c.iterations < 0) throw ConfigError("invalid paddle solver budget");
  if (!(c.learning_rate > 0.0) || !(c.fd_step > 0.0)) throw ConfigError("invalid paddle solver step sizes");
  return c;
}

double paddle_objective(const PaddleProblem& problem, const DynamicsModel& model, double roll, double pitch,
                        double speed, Eigen::Vector3d* predicted) {
  const Eigen::VectorXd u = paddle_control(problem.v_ball, roll, pitch, speed);
  const Eigen::Vector3d v = model.step(problem.v_ball, u);
  if (predicted != nullptr) *predicted = v;
  return (landing_offset(v, problem.gravity) - problem.target).norm();
}

namespace {

struct Candidate {
  Eigen::Vector3d z;  // roll, pitch, speed
  double objective;
};

Eigen::Vector3d clamp_box(const Eigen::Vector3d& z, const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) {
  return z.cwiseMax(lo).cwiseMin(hi);
}

}  // namespace

PaddleSolution paddle_solve(const PaddleProblem& problem, const DynamicsModel& model, const PaddleConfig& config,
                            std::uint64_t seed) {
  problem.validate();
  const Eigen::Vector3d lo(problem.roll_lo, problem.pitch_lo, problem.speed_lo);
  const Eigen::Vector3d hi(problem.roll_hi, problem.pitch_hi, problem.speed_hi);
  auto f = [&](const Eigen::Vector3d& z) { return paddle_objective(problem, model, z[0], z[1], z[2]); };

  Pcg32 rng(seed);
  std::vector<Candidate> pool;
  pool.reserve(static_cast<std::size_t>(config.samples));
  for (int i = 0; i < config.samples; ++i) {
    Eigen::Vector3d z;
    for (int k = 0; k < 3; ++k) z[k] = rng.uniform(lo[k], hi[k]);
    pool.push_back({z, f(z)});
  }
  const auto keep = std::min<std::size_t>(static_cast<std::size_t>(config.refine), pool.size());
  std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(keep), pool.end(),
                    [](const Candidate& a, const Candidate& b) { return a.objective < b.objective; });

  Candidate best = pool.front();
  for (std::size_t c = 0; c < keep; ++c) {
    Eigen::VectorXd z = pool[c].z;
    AdamState adam = AdamState::for_size(3);
    for (int it = 0; it < config.iterations; ++it) {
      Eigen::VectorXd g(3);
      for (int k = 0; k < 3; ++k) {
        // One-sided at a bound so the probe stays feasible.
        const double up = std::min(z[k] + config.fd_step, hi[k]);
        const double dn = std::max(z[k] - config.fd_step, lo[k]);
        Eigen::Vector3d zp = z, zm = z;
        zp[k] = up;
        zm[k] = dn;
        g[k] = up > dn ? (f(zp) - f(zm)) / (up - dn) : 0.0;
      }
      if (!g.allFinite()) break;
      adam_update(z, g, adam, config.learning_rate);
      z = clamp_box(z, lo, hi);
      const double obj = f(z);
      if (obj < best.objective) best = {z, obj};
    }
  }

  PaddleSolution s;
  s.roll = best.z[0];
  s.pitch = best.z[1];
  s.speed = best.z[2];
  s.control = paddle_control(problem.v_ball, s.roll, s.pitch, s.speed);
  s.objective = paddle_objective(problem, model, s.roll, s.pitch, s.speed, &s.predicted);
  return s;
}

}  // namespace saml
