#include <cmath>

#include "saml/error.hpp"
#include "saml/json_io.hpp"
#include "saml/systems.hpp"

namespace saml {

namespace {

int sign_of(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace

double FrictionProfile::operator()(double p) const {
  if (kind == "constant") return base;
  const double r = p / width;
  return base + peak * std::exp(-r * r);
}

nlohmann::json FrictionProfile::to_json() const {
  return {{"kind", kind}, {"base", base}, {"peak", peak}, {"width", width}};
}

FrictionProfile FrictionProfile::from_json(const nlohmann::json& j) {
  FrictionProfile f;
  f.kind = value_or<std::string>(j, "kind", f.kind);
  f.base = value_or(j, "base", f.base);
  f.peak = value_or(j, "peak", f.peak);
  f.width = value_or(j, "width", f.width);
  if (f.kind != "bump" && f.kind != "constant") throw ConfigError("unknown friction profile '" + f.kind + "'");
  if (!(f.base >= 0.0) || !(f.peak >= 0.0)) throw ConfigError("friction magnitudes must be nonnegative");
  if (f.kind == "bump" && !(f.width > 0.0)) throw ConfigError("friction width must be positive");
  return f;
}

void DoubleIntegratorParams::validate() const {
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(noise_sigma >= 0.0)) throw ConfigError("noiseSigma must be nonnegative");
}

nlohmann::json DoubleIntegratorParams::to_json() const {
  return {{"dt", dt}, {"friction", friction.to_json()}, {"noiseSigma", noise_sigma}};
}

DoubleIntegratorParams DoubleIntegratorParams::from_json(const nlohmann::json& j) {
  DoubleIntegratorParams p;
  p.dt = value_or(j, "dt", p.dt);
  if (j.is_object() && j.contains("friction")) p.friction = FrictionProfile::from_json(j.at("friction"));
  p.noise_sigma = value_or(j, "noiseSigma", p.noise_sigma);
  p.validate();
  return p;
}

Eigen::Vector2d di_base_step(double p, double v, double u, const DoubleIntegratorParams& params) {
  return {p + v * params.dt, v + u * params.dt};
}

double friction_clamp(double v, double u, double b, double dt) {
  const double w = v + u * dt;
  const double phi = sign_of(w) * b;
  if (sign_of(w) != sign_of(w - phi)) return w;
  return phi;
}

Eigen::Vector2d di_true_step(double p, double v, double u, const DoubleIntegratorParams& params, Pcg32* noise) {
  const double w = v + u * params.dt;
  double v_next = w - friction_clamp(v, u, params.friction(p), params.dt);
  if (noise != nullptr && params.noise_sigma > 0.0) v_next += params.noise_sigma * noise->normal();
  return {p + v * params.dt, v_next};
}

}  // namespace saml
