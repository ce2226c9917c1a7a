#include "saml/systems.hpp"

#include <cmath>

#include "quadrotor_impl.hpp"
#include "saml/error.hpp"
#include "saml/json_io.hpp"

namespace saml {

Eigen::VectorXd DynamicsModel::linearize(const Eigen::VectorXd& x, const Eigen::VectorXd& u, Eigen::MatrixXd& dx,
                                         Eigen::MatrixXd& du) const {
  constexpr double h = 1e-6;
  const Eigen::VectorXd f0 = step(x, u);
  dx.resize(f0.size(), x.size());
  du.resize(f0.size(), u.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    const Eigen::VectorXd fp = step(xp, u);
    xp[i] = x[i] - h;
    dx.col(i) = (fp - step(xp, u)) / (2.0 * h);
    xp[i] = x[i];
  }
  Eigen::VectorXd up = u;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    up[i] = u[i] + h;
    const Eigen::VectorXd fp = step(x, up);
    up[i] = u[i] - h;
    du.col(i) = (fp - step(x, up)) / (2.0 * h);
    up[i] = u[i];
  }
  return f0;
}

namespace {

void require_dims(const Eigen::VectorXd& x, const Eigen::VectorXd& u, Eigen::Index n, Eigen::Index p) {
  detail::require(x.size() == n && u.size() == p, "state or control has the wrong dimension");
}

class DoubleIntegratorBase final : public DynamicsModel {
 public:
  explicit DoubleIntegratorBase(DoubleIntegratorParams p) : p_(std::move(p)) {}
  Eigen::Index state_dim() const override { return 2; }
  Eigen::Index control_dim() const override { return 1; }
  Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const override {
    require_dims(x, u, 2, 1);
    return di_base_step(x[0], x[1], u[0], p_);
  }
  Eigen::VectorXd linearize(const Eigen::VectorXd& x, const Eigen::VectorXd& u, Eigen::MatrixXd& dx,
                            Eigen::MatrixXd& du) const override {
    dx.resize(2, 2);
    dx << 1.0, p_.dt, 0.0, 1.0;
    du.resize(2, 1);
    du << 0.0, p_.dt;
    return step(x, u);
  }

 private:
  DoubleIntegratorParams p_;
};

class DoubleIntegratorTrue final : public DynamicsModel {
 public:
  explicit DoubleIntegratorTrue(DoubleIntegratorParams p) : p_(std::move(p)) {}
  Eigen::Index state_dim() const override { return 2; }
  Eigen::Index control_dim() const override { return 1; }
  Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const override {
    require_dims(x, u, 2, 1);
    return di_true_step(x[0], x[1], u[0], p_);
  }

 private:
  DoubleIntegratorParams p_;
};

class BallModel final : public DynamicsModel {
 public:
  BallModel(BallPaddleParams p, bool base) : p_(std::move(p)), base_(base) {}
  Eigen::Index state_dim() const override { return 3; }
  Eigen::Index control_dim() const override { return 6; }
  Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const override {
    require_dims(x, u, 3, 6);
    const Eigen::Vector3d vb = x;
    const Eigen::Vector3d vp = u.head<3>();
    const Eigen::Vector3d n = u.tail<3>();
    return base_ ? ball_base_bounce(vb, vp, n, p_) : ball_bounce(vb, vp, n, p_.restitution);
  }

 private:
  BallPaddleParams p_;
  bool base_;
};

class QuadModel final : public DynamicsModel {
 public:
  QuadModel(QuadrotorParams p, bool ground) : p_(std::move(p)), ground_(ground) {}
  Eigen::Index state_dim() const override { return kQuadStateDim; }
  Eigen::Index control_dim() const override { return kQuadControlDim; }
  Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const override {
    return quad_step(x, u, p_, ground_);
  }
  Eigen::VectorXd linearize(const Eigen::VectorXd& x, const Eigen::VectorXd& u, Eigen::MatrixXd& dx,
                            Eigen::MatrixXd& du) const override {
    if (ground_) return DynamicsModel::linearize(x, u, dx, du);
    return quad_base_linearize(x, u, p_, dx, du);
  }

 private:
  QuadrotorParams p_;
  bool ground_;
};

}  // namespace

Eigen::Index SystemSpec::state_dim() const {
  if (name == "doubleIntegrator") return 2;
  if (name == "ball") return 3;
  return kQuadStateDim;
}

Eigen::Index SystemSpec::control_dim() const {
  if (name == "doubleIntegrator") return 1;
  if (name == "ball") return 6;
  return kQuadControlDim;
}

nlohmann::json SystemSpec::params_json() const {
  if (name == "doubleIntegrator") return di.to_json();
  if (name == "ball") return ball.to_json();
  return quad.to_json();
}

nlohmann::json SystemSpec::to_json() const { return {{"name", name}, {"params", params_json()}}; }

SystemSpec SystemSpec::from_json(const nlohmann::json& j) {
  SystemSpec s;
  s.name = value_or<std::string>(j, "name", "");
  const nlohmann::json params = value_or(j, "params", nlohmann::json::object());
  if (s.name == "doubleIntegrator")
    s.di = DoubleIntegratorParams::from_json(params);
  else if (s.name == "ball")
    s.ball = BallPaddleParams::from_json(params);
  else if (s.name == "quadrotor")
    s.quad = QuadrotorParams::from_json(params);
  else
    throw ConfigError("unknown system '" + s.name + "' (expected doubleIntegrator, ball or quadrotor)");
  return s;
}

std::unique_ptr<DynamicsModel> make_true_model(const SystemSpec& spec) {
  if (spec.name == "doubleIntegrator") return std::make_unique<DoubleIntegratorTrue>(spec.di);
  if (spec.name == "ball") return std::make_unique<BallModel>(spec.ball, false);
  if (spec.name == "quadrotor") return std::make_unique<QuadModel>(spec.quad, true);
  throw ConfigError("unknown system '" + spec.name + "'");
}

std::unique_ptr<DynamicsModel> make_base_model(const SystemSpec& spec) {
  if (spec.name == "doubleIntegrator") return std::make_unique<DoubleIntegratorBase>(spec.di);
  if (spec.name == "ball") return std::make_unique<BallModel>(spec.ball, true);
  if (spec.name == "quadrotor") return std::make_unique<QuadModel>(spec.quad, false);
  throw ConfigError("unknown system '" + spec.name + "'");
}

// ---------------------------------------------------------------------------
// sampling

namespace {

struct Interval {
  double lo;
  double hi;
};

Interval interval(const nlohmann::json& ranges, const char* key) {
  const auto v = value_or<std::vector<double>>(ranges, key, {});
  if (v.size() != 2 || !(v[0] <= v[1]) || !std::isfinite(v[0]) || !std::isfinite(v[1]))
    throw ConfigError(std::string("range '") + key + "' must be [lo, hi] with lo <= hi");
  return {v[0], v[1]};
}

double draw(Pcg32& rng, Interval r) { return rng.uniform(r.lo, r.hi); }

nlohmann::json default_ranges(const std::string& system) {
  using J = nlohmann::json;
  if (system == "doubleIntegrator")
    return {{"position", J::array({-2.0, 2.0})}, {"velocity", J::array({-2.5, 2.5})}, {"control", J::array({-10.0, 10.0})}};
  if (system == "ball")
    return {{"velocityXY", J::array({-0.5, 0.5})}, {"velocityZ", J::array({-5.0, -2.0})},
            {"roll", J::array({-0.5, 0.5})},       {"pitch", J::array({-0.5, 0.5})},
            {"speed", J::array({2.5, 6.5})},       {"paddlePerturbation", J::array({-0.2, 0.2})}};
  if (system == "quadrotor")
    return {{"positionXY", J::array({-10.0, 10.0})}, {"positionZ", J::array({0.1, 5.0})},
            {"velocity", J::array({-6.0, 6.0})},     {"angularVelocity", J::array({-2.5, 2.5})},
            {"control", J::array({0.0, 10.0})},      {"tiltAngle", J::array({-0.4, 0.4})}};
  throw ConfigError("unknown system '" + system + "'");
}

}  // namespace

nlohmann::json resolve_ranges(const std::string& system, const nlohmann::json& overrides) {
  nlohmann::json ranges = default_ranges(system);
  if (!overrides.is_null()) {
    if (!overrides.is_object()) throw ConfigError("ranges must be an object");
    for (const auto& [key, value] : overrides.items()) {
      if (!ranges.contains(key)) throw ConfigError("unknown range '" + key + "' for system " + system);
      ranges[key] = value;
    }
  }
  for (const auto& [key, value] : ranges.items()) interval(ranges, key.c_str());
  return ranges;
}

Dataset sample_dataset(const SystemSpec& spec, std::size_t count, const nlohmann::json& ranges_in,
                       std::uint64_t seed, double noise_sigma) {
  if (count < 1) throw ConfigError("dataset count must be at least 1");
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise sigma must be nonnegative");
  const nlohmann::json ranges = resolve_ranges(spec.name, ranges_in);
  const auto truth = make_true_model(spec);

  Dataset data;
  data.state_dim = spec.state_dim();
  data.control_dim = spec.control_dim();
  data.provenance = {spec.name, seed, noise_sigma, ranges, spec.params_json()};
  data.samples.reserve(count);

  Pcg32 rng(seed);
  Pcg32 noise(mix_seed(seed, 0x6e6f697365ULL));
  for (std::size_t i = 0; i < count; ++i) {
    TransitionSample s;
    if (spec.name == "doubleIntegrator") {
      s.state = Eigen::Vector2d(draw(rng, interval(ranges, "position")), draw(rng, interval(ranges, "velocity")));
      s.control = Eigen::VectorXd::Constant(1, draw(rng, interval(ranges, "control")));
      DoubleIntegratorParams p = spec.di;
      p.noise_sigma = noise_sigma;
      s.next_state = di_true_step(s.state[0], s.state[1], s.control[0], p, &noise);
    } else if (spec.name == "ball") {
      const Interval vxy = interval(ranges, "velocityXY");
      const Eigen::Vector3d vb(draw(rng, vxy), draw(rng, vxy), draw(rng, interval(ranges, "velocityZ")));
      const double roll = draw(rng, interval(ranges, "roll"));
      const double pitch = draw(rng, interval(ranges, "pitch"));
      const double speed = draw(rng, interval(ranges, "speed"));
      s.state = vb;
      s.control = paddle_control(vb, roll, pitch, speed);
      const Interval pert = interval(ranges, "paddlePerturbation");
      for (int k = 0; k < 3; ++k) s.control[k] += draw(rng, pert);
      s.next_state = truth->step(s.state, s.control);
      if (noise_sigma > 0.0)
        for (Eigen::Index k = 0; k < 3; ++k) s.next_state[k] += noise_sigma * noise.normal();
    } else {
      const Interval xy = interval(ranges, "positionXY");
      const Interval vel = interval(ranges, "velocity");
      const Interval om = interval(ranges, "angularVelocity");
      const Interval ctl = interval(ranges, "control");
      Eigen::VectorXd x(kQuadStateDim);
      x[0] = draw(rng, xy);
      x[1] = draw(rng, xy);
      x[2] = draw(rng, interval(ranges, "positionZ"));
      for (int k = 3; k < 6; ++k) x[k] = draw(rng, vel);
      Eigen::Vector3d axis;
      do {
        axis = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
      } while (axis.norm() < 1e-9);
      const Quat<double> q = quat_from_axis_angle(axis, draw(rng, interval(ranges, "tiltAngle")));
      x[6] = q.w;
      x[7] = q.x;
      x[8] = q.y;
      x[9] = q.z;
      for (int k = 10; k < 13; ++k) x[k] = draw(rng, om);
      Eigen::VectorXd u(kQuadControlDim);
      for (int k = 0; k < 4; ++k) u[k] = draw(rng, ctl);
      s.state = x;
      s.control = u;
      s.next_state = truth->step(x, u);
      if (noise_sigma > 0.0)
        for (Eigen::Index k = 0; k < kQuadStateDim; ++k) s.next_state[k] += noise_sigma * noise.normal();
    }
    data.samples.push_back(std::move(s));
  }
  data.validate();
  return data;
}

}  // namespace saml
