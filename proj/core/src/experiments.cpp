#include "saml/experiments.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>

#include "saml/control.hpp"
#include "saml/error.hpp"
#include "saml/json_io.hpp"
#include "saml/objective.hpp"
#include "saml/provenance.hpp"
#include "saml/stats.hpp"
#include "saml/trainer.hpp"

namespace saml {

namespace fs = std::filesystem;

namespace {

fs::path resolve_path(const std::string& p, const fs::path& base) {
  fs::path path(p);
  if (path.is_relative()) path = base / path;
  return fs::absolute(path).lexically_normal();
}

json require_object(const json& config, const char* key) {
  if (!config.is_object() || !config.contains(key) || !config.at(key).is_object())
    throw ConfigError(std::string("config needs an object '") + key + "'");
  return config.at(key);
}

json dataset_inputs(const json& resolved_source) {
  json inputs = json::object();
  if (resolved_source.contains("path")) {
    const fs::path p = resolved_source.at("path").get<std::string>();
    inputs[p.string()] = git_blob_hash_file(p);
    inputs[header_path_for(p).string()] = git_blob_hash_file(header_path_for(p));
  }
  return inputs;
}

}  // namespace

// ---------------------------------------------------------------------------
// shared plumbing

std::vector<int> NetworkConfig::layer_dims(Eigen::Index state_dim, Eigen::Index control_dim) const {
  std::vector<int> dims{static_cast<int>(state_dim + control_dim)};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(static_cast<int>(state_dim));
  return dims;
}

json NetworkConfig::to_json() const { return {{"hidden", hidden}, {"seed", seed}, {"zeroOutput", zero_output}}; }

NetworkConfig NetworkConfig::from_json(const json& j) {
  NetworkConfig n;
  n.hidden = value_or(j, "hidden", n.hidden);
  n.seed = value_or(j, "seed", n.seed);
  n.zero_output = value_or(j, "zeroOutput", n.zero_output);
  for (int h : n.hidden)
    if (h < 1) throw ConfigError("hidden layer sizes must be positive");
  return n;
}

json resolve_dataset_source(const json& source, const fs::path& config_dir) {
  if (source.is_string()) return {{"path", resolve_path(source.get<std::string>(), config_dir).string()}};
  if (!source.is_object()) throw ConfigError("dataset must be a path or an object");
  if (source.contains("path"))
    return {{"path", resolve_path(value_or<std::string>(source, "path", ""), config_dir).string()}};
  if (source.contains("generate")) {
    const json g = source.at("generate");
    const auto count = value_or<std::int64_t>(g, "count", 0);
    if (count < 1) throw ConfigError("dataset count must be at least 1");
    return {{"generate",
             {{"count", count},
              {"seed", value_or<std::uint64_t>(g, "seed", 0)},
              {"noiseSigma", value_or(g, "noiseSigma", 0.0)},
              {"ranges", value_or(g, "ranges", json::object())}}}};
  }
  throw ConfigError("dataset needs 'path' or 'generate'");
}

Dataset load_dataset_source(const json& resolved_source, const SystemSpec& system) {
  if (resolved_source.contains("path")) {
    Dataset d = read_dataset(resolved_source.at("path").get<std::string>());
    if (d.state_dim != system.state_dim() || d.control_dim != system.control_dim())
      throw ConfigError("dataset dimensions do not match system '" + system.name + "'");
    return d;
  }
  const json& g = resolved_source.at("generate");
  return sample_dataset(system, g.at("count").get<std::size_t>(), g.at("ranges"), g.at("seed").get<std::uint64_t>(),
                        g.at("noiseSigma").get<double>());
}

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn) {
  std::size_t threads = workers > 0 ? static_cast<std::size_t>(workers) : std::thread::hardware_concurrency();
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first;
  std::mutex m;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      while (!failed) {
        const std::size_t i = next++;
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(m);
          if (!first) first = std::current_exception();
          failed = true;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first) std::rethrow_exception(first);
}

void write_manifest(const fs::path& out_dir, const std::string& command, const json& resolved_config,
                    const json& inputs, const json& notes, bool complete) {
  const json manifest{{"manifestVersion", 1},
                      {"command", command},
                      {"complete", complete},
                      {"config", resolved_config},
                      {"inputs", inputs},
                      {"outputs", hash_tree(out_dir, {"manifest.json"})},
                      {"notes", notes}};
  write_json_file(out_dir / "manifest.json", manifest);
}

// ---------------------------------------------------------------------------
// generate

json run_generate(const json& config, const ExperimentContext& ctx) {
  const SystemSpec system = SystemSpec::from_json(require_object(config, "system"));
  const auto count = value_or<std::int64_t>(config, "count", 0);
  if (count < 1) throw ConfigError("count must be at least 1");
  const auto seed = value_or<std::uint64_t>(config, "seed", 0);
  const double noise = value_or(config, "noiseSigma", 0.0);
  const json ranges = resolve_ranges(system.name, value_or(config, "ranges", json::object()));
  const std::string output = value_or<std::string>(config, "output", "dataset.jsonl");

  const json resolved{{"system", system.to_json()}, {"count", count},   {"seed", seed},
                      {"noiseSigma", noise},        {"ranges", ranges}, {"output", output}};

  const Dataset data = sample_dataset(system, static_cast<std::size_t>(count), ranges, seed, noise);
  write_dataset(ctx.out_dir / output, data);
  const json summary{{"count", data.size()}, {"stateDim", data.state_dim}, {"controlDim", data.control_dim}};
  write_manifest(ctx.out_dir, "generate", resolved, json::object(), json::array());
  return summary;
}

// ---------------------------------------------------------------------------
// train

namespace {

struct HeldOut {
  std::vector<double> all, in_set, out_set;
};

json mean_std(const std::vector<double>& v) {
  if (v.empty()) return {{"count", 0}, {"mean", nullptr}, {"std", nullptr}};
  const Summary s = summarize(v);
  return {{"count", s.count}, {"mean", s.mean}, {"std", s.std}};
}

}  // namespace

json run_train(const json& config, const ExperimentContext& ctx) {
  const SystemSpec system = SystemSpec::from_json(require_object(config, "system"));
  if (!config.contains("dataset")) throw ConfigError("train config needs a 'dataset'");
  const json source = resolve_dataset_source(config.at("dataset"), ctx.config_dir);
  const ConstrainedObjective objective = ConstrainedObjective::from_json(require_object(config, "objective"));
  const TrainerConfig trainer = TrainerConfig::from_json(value_or(config, "trainer", json::object()));
  const NetworkConfig network = NetworkConfig::from_json(value_or(config, "network", json::object()));
  const json eval_in = value_or(config, "evaluation", json::object());
  const auto eval_count = value_or<std::int64_t>(eval_in, "count", 5000);
  const auto eval_seed = value_or<std::uint64_t>(eval_in, "seed", 987654321);
  if (eval_count < 1) throw ConfigError("evaluation count must be at least 1");
  std::optional<IndicatorSet> eval_set;
  if (eval_in.contains("indicator"))
    eval_set = IndicatorSet::from_json(eval_in.at("indicator"));
  else if (!objective.constraints.empty())
    eval_set = objective.constraints.front().indicator;

  json resolved{{"system", system.to_json()},   {"dataset", source},        {"objective", objective.to_json()},
                {"trainer", trainer.to_json()}, {"network", network.to_json()}};
  resolved["evaluation"] = {{"count", eval_count}, {"seed", eval_seed}};
  if (eval_set) resolved["evaluation"]["indicator"] = eval_set->to_json();

  const Dataset data = load_dataset_source(source, system);
  const auto base = make_base_model(system);
  const DynamicsModel* base_ptr = objective.residual_mode ? base.get() : nullptr;
  const Mlp initial = mlp_init(network.layer_dims(system.state_dim(), system.control_dim()), network.seed,
                               network.zero_output);

  const CheckpointHook hook = [&](const Mlp& model, std::int64_t epoch) {
    if (trainer.checkpoint_every > 0 && epoch != trainer.epochs) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%06lld.json", static_cast<long long>(epoch));
      save_checkpoint(ctx.out_dir / "checkpoints" / name, model, {network.seed, epoch});
    }
  };

  TrainResult result;
  try {
    result = train(data, objective, base_ptr, initial, trainer, hook);
  } catch (const TrainingAborted& e) {
    write_text_file(ctx.out_dir / "training_log.partial.csv", e.partial_log().to_csv());
    throw;
  }
  save_checkpoint(ctx.out_dir / "model.json", result.model, {network.seed, trainer.epochs});
  write_text_file(ctx.out_dir / "training_log.csv", result.log.to_csv());

  // Held-out accuracy on fresh noise-free samples over the training ranges.
  const json ranges = source.contains("generate") ? source.at("generate").at("ranges") : data.provenance.ranges;
  const Dataset test = sample_dataset(system, static_cast<std::size_t>(eval_count), ranges, eval_seed, 0.0);
  HeldOut h;
  for (const auto& s : test.samples) {
    const double err = (prediction(objective, result.model, base_ptr, s) - s.next_state).norm();
    h.all.push_back(err);
    if (eval_set) (eval_set->contains(s) ? h.in_set : h.out_set).push_back(err);
  }

  double min_lambda = 0.0;
  for (const auto& r : result.log.records)
    if (r.multipliers.size() > 0) min_lambda = std::min(min_lambda, r.multipliers.minCoeff());

  json summary{{"steps", result.steps},
               {"final",
                {{"objective", result.final_evaluation.objective},
                 {"constraints", to_json(result.final_evaluation.constraints)},
                 {"multipliers", to_json(result.dual.multipliers)},
                 {"lagrangian", result.final_evaluation.lagrangian}}},
               {"minLoggedMultiplier", min_lambda},
               {"heldOut", {{"count", eval_count}, {"overall", mean_std(h.all)}}}};
  if (eval_set) {
    summary["heldOut"]["inSet"] = mean_std(h.in_set);
    summary["heldOut"]["outOfSet"] = mean_std(h.out_set);
  }
  write_json_file(ctx.out_dir / "summary.json", summary);
  write_manifest(ctx.out_dir, "train", resolved, dataset_inputs(source), json::array());
  return summary;
}

// ---------------------------------------------------------------------------
// dispatch

json run_command(const std::string& command, const fs::path& config_path, const fs::path& out_dir) {
  json config = read_json_file(config_path);
  fs::path config_dir = fs::absolute(config_path).parent_path();
  if (config.is_object() && config.contains("manifestVersion")) {
    const std::string recorded = value_or<std::string>(config, "command", "");
    if (recorded != command)
      throw ConfigError("manifest was written by '" + recorded + "', not '" + command + "'");
    config = config.at("config");
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());
  const ExperimentContext ctx{config_dir, fs::absolute(out_dir).lexically_normal()};
  if (command == "generate") return run_generate(config, ctx);
  if (command == "train") return run_train(config, ctx);
  if (command == "convergence") return run_convergence(config, ctx);
  if (command == "evaluate-control") return run_evaluate_control(config, ctx);
  throw ConfigError("unknown command '" + command + "'");
}

}  // namespace saml
