#include "saml/indicator.hpp"

#include <cmath>
#include <string>

#include "saml/error.hpp"

namespace saml {

IndicatorSet IndicatorSet::all() { return IndicatorSet{}; }

IndicatorSet IndicatorSet::none() {
  IndicatorSet s;
  s.kind_ = Kind::None;
  return s;
}

IndicatorSet IndicatorSet::inf_norm_ball(double radius, std::vector<int> indices) {
  if (!(radius >= 0.0)) throw ConfigError("infNormBall radius must be nonnegative");
  for (int i : indices)
    if (i < 0) throw ConfigError("infNormBall indices must be nonnegative");
  IndicatorSet s;
  s.kind_ = Kind::InfNormBall;
  s.param_ = radius;
  s.indices_ = std::move(indices);
  return s;
}

IndicatorSet IndicatorSet::height_below(double h, int index) {
  if (index < 0) throw ConfigError("heightBelow index must be nonnegative");
  IndicatorSet s;
  s.kind_ = Kind::HeightBelow;
  s.param_ = h;
  s.index_ = index;
  return s;
}

IndicatorSet IndicatorSet::next_state_norm_at_least(double delta) {
  if (!(delta >= 0.0)) throw ConfigError("nextStateNormAtLeast threshold must be nonnegative");
  IndicatorSet s;
  s.kind_ = Kind::NextStateNormAtLeast;
  s.param_ = delta;
  return s;
}

IndicatorSet IndicatorSet::complement_of(IndicatorSet inner) {
  IndicatorSet s;
  s.kind_ = Kind::Complement;
  s.inner_ = std::make_shared<const IndicatorSet>(std::move(inner));
  return s;
}

bool IndicatorSet::contains(const TransitionSample& s) const {
  switch (kind_) {
    case Kind::All:
      return true;
    case Kind::None:
      return false;
    case Kind::InfNormBall: {
      if (indices_.empty()) return s.state.lpNorm<Eigen::Infinity>() <= param_;
      for (int i : indices_) {
        detail::require(i < s.state.size(), "infNormBall index exceeds the state dimension");
        if (std::abs(s.state[i]) > param_) return false;
      }
      return true;
    }
    case Kind::HeightBelow:
      detail::require(index_ < s.state.size(), "heightBelow index exceeds the state dimension");
      return s.state[index_] < param_;
    case Kind::NextStateNormAtLeast:
      return s.next_state.norm() >= param_;
    case Kind::Complement:
      return !inner_->contains(s);
  }
  return false;
}

nlohmann::json IndicatorSet::to_json() const {
  switch (kind_) {
    case Kind::All:
      return {{"kind", "all"}};
    case Kind::None:
      return {{"kind", "none"}};
    case Kind::InfNormBall: {
      nlohmann::json j{{"kind", "infNormBall"}, {"radius", param_}};
      if (!indices_.empty()) j["indices"] = indices_;
      return j;
    }
    case Kind::HeightBelow:
      return {{"kind", "heightBelow"}, {"h", param_}, {"index", index_}};
    case Kind::NextStateNormAtLeast:
      return {{"kind", "nextStateNormAtLeast"}, {"delta", param_}};
    case Kind::Complement:
      return {{"kind", "complementOf"}, {"set", inner_->to_json()}};
  }
  return {};
}

IndicatorSet IndicatorSet::from_json(const nlohmann::json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "all") return all();
    if (kind == "none") return none();
    if (kind == "infNormBall")
      return inf_norm_ball(j.at("radius").get<double>(), j.value("indices", std::vector<int>{}));
    if (kind == "heightBelow") return height_below(j.at("h").get<double>(), j.value("index", 2));
    if (kind == "nextStateNormAtLeast") return next_state_norm_at_least(j.at("delta").get<double>());
    if (kind == "complementOf") return complement_of(from_json(j.at("set")));
    throw ConfigError("unknown indicator kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed indicator descriptor: ") + e.what());
  }
}

}  // namespace saml
