#pragma once

#include <memory>
#include <vector>

#include <nlohmann/json.hpp>

#include "saml/dataset.hpp"

namespace saml {

// Membership predicate over transition samples, built only from named kinds so
// it can be serialized:
//   all, none,
//   infNormBall{radius, indices?}      max_i |x_i| <= radius over the chosen state entries
//   heightBelow{h, index = 2}          x_index < h
//   nextStateNormAtLeast{delta}        ||x_{t+1}||_2 >= delta
//   complementOf{set}
class IndicatorSet {
 public:
  enum class Kind { All, None, InfNormBall, HeightBelow, NextStateNormAtLeast, Complement };

  IndicatorSet() = default;

  static IndicatorSet all();
  static IndicatorSet none();
  static IndicatorSet inf_norm_ball(double radius, std::vector<int> indices = {});
  static IndicatorSet height_below(double h, int index = 2);
  static IndicatorSet next_state_norm_at_least(double delta);
  static IndicatorSet complement_of(IndicatorSet inner);

  Kind kind() const { return kind_; }
  bool contains(const TransitionSample& s) const;

  nlohmann::json to_json() const;
  static IndicatorSet from_json(const nlohmann::json& j);

 private:
  Kind kind_ = Kind::All;
  double param_ = 0.0;
  int index_ = 0;
  std::vector<int> indices_;
  std::shared_ptr<const IndicatorSet> inner_;
};

}  // namespace saml
