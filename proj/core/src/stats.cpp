#include "saml/stats.hpp"

#include <algorithm>
#include <cmath>

#include "saml/error.hpp"
#include "saml/rng.hpp"

namespace saml {

nlohmann::json Summary::to_json() const {
  return {{"count", count}, {"mean", mean}, {"std", std},       {"min", min},
          {"q1", q1},       {"median", median}, {"q3", q3}, {"max", max}};
}

double quantile(std::vector<double> values, double q) {
  detail::require(!values.empty(), "quantile of an empty sample");
  detail::require(q >= 0.0 && q <= 1.0, "quantile level must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

Summary summarize(std::span<const double> values) {
  detail::require(!values.empty(), "cannot summarize an empty sample");
  Summary s;
  s.count = values.size();
  const std::vector<double> v(values.begin(), values.end());
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.std = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  s.min = *std::min_element(v.begin(), v.end());
  s.max = *std::max_element(v.begin(), v.end());
  s.q1 = quantile(v, 0.25);
  s.median = quantile(v, 0.5);
  s.q3 = quantile(v, 0.75);
  return s;
}

BootstrapInterval bootstrap_mean(std::span<const double> values, int resamples, double level, std::uint64_t seed) {
  detail::require(!values.empty(), "bootstrap of an empty sample");
  detail::require(resamples > 0, "bootstrap needs at least one resample");
  detail::require(level > 0.0 && level < 1.0, "confidence level must lie in (0, 1)");
  const auto n = static_cast<std::uint32_t>(values.size());
  double total = 0.0;
  for (double x : values) total += x;

  Pcg32 rng(seed);
  std::vector<double> means(static_cast<std::size_t>(resamples));
  for (auto& m : means) {
    double s = 0.0;
    for (std::uint32_t i = 0; i < n; ++i) s += values[rng.below(n)];
    m = s / n;
  }
  const double tail = 0.5 * (1.0 - level);
  return {total / n, quantile(means, tail), quantile(means, 1.0 - tail)};
}

}  // namespace saml
