#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace saml {

// One observed transition (x_t, u_t, x_{t+1}).
struct TransitionSample {
  Eigen::VectorXd state;
  Eigen::VectorXd control;
  Eigen::VectorXd next_state;
};

struct DatasetProvenance {
  std::string system;
  std::uint64_t seed = 0;
  double noise_sigma = 0.0;
  nlohmann::json ranges = nlohmann::json::object();
  nlohmann::json system_params = nlohmann::json::object();
};

struct Dataset {
  std::vector<TransitionSample> samples;
  Eigen::Index state_dim = 0;
  Eigen::Index control_dim = 0;
  DatasetProvenance provenance;

  std::size_t size() const { return samples.size(); }
  // Homogeneous dimensions and finite entries; throws ContractViolation.
  void validate() const;
};

// Dataset files are JSON lines {"x": [...], "u": [...], "xn": [...]}; the
// header sidecar sits next to them as <stem>.header.json.
std::filesystem::path header_path_for(const std::filesystem::path& data_path);
std::string dataset_to_jsonl(const Dataset& data);
nlohmann::json dataset_header(const Dataset& data);
void write_dataset(const std::filesystem::path& data_path, const Dataset& data);
Dataset read_dataset(const std::filesystem::path& data_path);

}  // namespace saml
