#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

namespace saml {

struct Summary {
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1)
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;

  nlohmann::json to_json() const;
};

// Linear interpolation between order statistics (Hyndman-Fan type 7).
double quantile(std::vector<double> values, double q);
Summary summarize(std::span<const double> values);

struct BootstrapInterval {
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

// Percentile bootstrap interval for the mean.
BootstrapInterval bootstrap_mean(std::span<const double> values, int resamples, double level, std::uint64_t seed);

}  // namespace saml
