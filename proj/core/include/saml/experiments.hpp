#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "saml/dataset.hpp"
#include "saml/nnet.hpp"
#include "saml/systems.hpp"

namespace saml {

// Every command reads one JSON config, writes its outputs into `out_dir`, and
// finishes with `manifest.json`: the fully resolved config (absolute paths,
// defaults filled in), hashes of its inputs and of every output file. Passing
// a manifest back as the config re-runs the command with the same settings.
//
// Relative paths inside a config resolve against the config file's directory.

struct ExperimentContext {
  std::filesystem::path config_dir;
  std::filesystem::path out_dir;
};

// Returns the command's summary document (also written to summary.json where
// the command has one).
nlohmann::json run_generate(const nlohmann::json& config, const ExperimentContext& ctx);
nlohmann::json run_train(const nlohmann::json& config, const ExperimentContext& ctx);
nlohmann::json run_convergence(const nlohmann::json& config, const ExperimentContext& ctx);
nlohmann::json run_evaluate_control(const nlohmann::json& config, const ExperimentContext& ctx);

// Dispatch by subcommand name: generate | train | convergence | evaluate-control.
nlohmann::json run_command(const std::string& command, const std::filesystem::path& config_path,
                           const std::filesystem::path& out_dir);

// Shared plumbing, exposed for tests.

struct NetworkConfig {
  std::vector<int> hidden{4, 2};
  std::uint64_t seed = 1;
  bool zero_output = true;

  std::vector<int> layer_dims(Eigen::Index state_dim, Eigen::Index control_dim) const;
  nlohmann::json to_json() const;
  static NetworkConfig from_json(const nlohmann::json& j);
};

// A dataset is either {"path": "..."} or {"generate": {"count", "seed",
// "noiseSigma", "ranges"}} drawn from the config's system.
nlohmann::json resolve_dataset_source(const nlohmann::json& source, const std::filesystem::path& config_dir);
Dataset load_dataset_source(const nlohmann::json& resolved_source, const SystemSpec& system);

// Calls fn(index) for index in [0, count) on `workers` threads (0 = hardware
// concurrency). The first exception is rethrown after all workers stop.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn);

void write_manifest(const std::filesystem::path& out_dir, const std::string& command,
                    const nlohmann::json& resolved_config, const nlohmann::json& inputs,
                    const nlohmann::json& notes, bool complete = true);

}  // namespace saml
