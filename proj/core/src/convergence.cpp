#include <algorithm>
#include <cstdio>
#include <map>
#include <mutex>
#include <sstream>
#include <tuple>

#include "saml/error.hpp"
#include "saml/experiments.hpp"
#include "saml/json_io.hpp"
#include "saml/objective.hpp"
#include "saml/provenance.hpp"
#include "saml/stats.hpp"
#include "saml/trainer.hpp"

namespace saml {

namespace fs = std::filesystem;

namespace {

struct SweepKey {
  std::size_t model = 0;
  std::size_t n = 0;
  std::size_t seed = 0;
  auto tie() const { return std::tie(model, n, seed); }
  bool operator<(const SweepKey& o) const { return tie() < o.tie(); }
};

struct SweepRecord {
  SweepKey key;
  std::size_t samples = 0;
  double lagrangian = 0.0;
  double objective = 0.0;
  Eigen::VectorXd constraints;
  Eigen::VectorXd multipliers;
  double min_multiplier = 0.0;
  std::int64_t steps = 0;

  json to_json() const {
    return {{"model", key.model},
            {"nIndex", key.n},
            {"seedIndex", key.seed},
            {"N", samples},
            {"lagrangian", lagrangian},
            {"objective", objective},
            {"constraints", saml::to_json(constraints)},
            {"multipliers", saml::to_json(multipliers)},
            {"minMultiplier", min_multiplier},
            {"steps", steps}};
  }
  static SweepRecord from_json(const json& j) {
    SweepRecord r;
    r.key = {j.at("model").get<std::size_t>(), j.at("nIndex").get<std::size_t>(), j.at("seedIndex").get<std::size_t>()};
    r.samples = j.at("N").get<std::size_t>();
    r.lagrangian = j.at("lagrangian").get<double>();
    r.objective = j.at("objective").get<double>();
    r.constraints = vector_from_json(j.at("constraints"));
    r.multipliers = vector_from_json(j.at("multipliers"));
    r.min_multiplier = j.at("minMultiplier").get<double>();
    r.steps = j.at("steps").get<std::int64_t>();
    return r;
  }
};

std::string join_hidden(const std::vector<int>& hidden) {
  std::string s;
  for (std::size_t i = 0; i < hidden.size(); ++i) s += (i ? "x" : "") + std::to_string(hidden[i]);
  return s;
}

}  // namespace

json run_convergence(const json& config, const ExperimentContext& ctx) {
  const SystemSpec system = SystemSpec::from_json(value_or(config, "system", json::object()));
  const auto hidden_sizes =
      value_or<std::vector<std::vector<int>>>(config, "hiddenSizes", {{2, 1}, {4, 2}, {8, 4}, {16, 8}});
  const auto sample_sizes =
      value_or<std::vector<std::size_t>>(config, "sampleSizes", {100, 1000, 5000, 10000, 15000});
  const auto seeds = value_or<std::size_t>(config, "seeds", 15);
  const auto base_seed = value_or<std::uint64_t>(config, "baseSeed", 0);
  const double noise = value_or(config, "noiseSigma", 0.2);
  const json ranges = resolve_ranges(system.name, value_or(config, "ranges", json::object()));
  const auto min_steps = value_or<std::int64_t>(config, "minSteps", 0);
  const int workers = value_or(config, "workers", 1);
  if (!config.contains("objective")) throw ConfigError("convergence config needs an 'objective'");
  const ConstrainedObjective objective = ConstrainedObjective::from_json(config.at("objective"));
  const TrainerConfig trainer = TrainerConfig::from_json(value_or(config, "trainer", json::object()));
  const bool zero_output = value_or(config, "zeroOutput", true);
  if (hidden_sizes.empty() || sample_sizes.empty() || seeds < 1) throw ConfigError("sweep grid must be nonempty");
  for (auto n : sample_sizes)
    if (n < 1) throw ConfigError("sample sizes must be positive");
  if (min_steps < 0) throw ConfigError("minSteps must be nonnegative");

  const json resolved{{"system", system.to_json()},   {"hiddenSizes", hidden_sizes}, {"sampleSizes", sample_sizes},
                      {"seeds", seeds},               {"baseSeed", base_seed},       {"noiseSigma", noise},
                      {"ranges", ranges},             {"minSteps", min_steps},       {"workers", workers},
                      {"objective", objective.to_json()}, {"trainer", trainer.to_json()}, {"zeroOutput", zero_output}};
  // Worker count does not influence results, so it is left out of the hash
  // that guards resumption.
  json hashed = resolved;
  hashed.erase("workers");
  const std::string config_hash = git_blob_hash(hashed.dump());
  const json notes = json::array(
      {"final Lagrangian evaluated on the full training set at the final (theta, lambda)",
       "epochs raised per run so that every run takes at least minSteps primal-dual steps"});

  // Resume from a partial grid written by an interrupted run with the same config.
  const fs::path partial_path = ctx.out_dir / "sweep_partial.jsonl";
  std::map<SweepKey, SweepRecord> done;
  if (fs::exists(partial_path)) {
    std::istringstream in(read_text_file(partial_path));
    std::string line;
    bool matches = false;
    if (std::getline(in, line)) {
      try {
        matches = json::parse(line).value("configHash", std::string{}) == config_hash;
      } catch (const json::exception&) {
        matches = false;
      }
    }
    while (matches && std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        const SweepRecord r = SweepRecord::from_json(json::parse(line));
        done[r.key] = r;
      } catch (const json::exception&) {
        break;  // torn final line
      }
    }
    if (!matches) done.clear();
  }

  std::vector<SweepKey> todo;
  for (std::size_t m = 0; m < hidden_sizes.size(); ++m)
    for (std::size_t ni = 0; ni < sample_sizes.size(); ++ni)
      for (std::size_t s = 0; s < seeds; ++s)
        if (!done.count({m, ni, s})) todo.push_back({m, ni, s});
  // Largest datasets first for better load balance.
  std::stable_sort(todo.begin(), todo.end(), [&](const SweepKey& a, const SweepKey& b) {
    return sample_sizes[a.n] > sample_sizes[b.n];
  });

  {
    std::string text = json{{"configHash", config_hash}}.dump() + "\n";
    for (const auto& [k, r] : done) text += r.to_json().dump() + "\n";
    write_text_file(partial_path, text);
  }

  std::mutex mutex;
  std::exception_ptr failure;
  auto run_one = [&](std::size_t i) {
    const SweepKey key = todo[i];
    const std::size_t n = sample_sizes[key.n];
    const std::uint64_t data_seed = mix_seed(mix_seed(base_seed, 0x64617461ULL), n * 1000003ULL + key.seed);
    const Dataset data = sample_dataset(system, n, ranges, data_seed, noise);
    const auto base = make_base_model(system);
    NetworkConfig net;
    net.hidden = hidden_sizes[key.model];
    net.seed = mix_seed(mix_seed(base_seed, 0x6e6574ULL), key.model * 1000003ULL + key.n * 1009ULL + key.seed);
    net.zero_output = zero_output;
    TrainerConfig tc = trainer;
    tc.seed = mix_seed(mix_seed(base_seed, 0x747261696eULL), key.model * 1000003ULL + key.n * 1009ULL + key.seed);
    const auto per_epoch = static_cast<std::int64_t>((n + tc.batch_size - 1) / tc.batch_size);
    tc.epochs = std::max(tc.epochs, (min_steps + per_epoch - 1) / per_epoch);
    tc.log_every = std::max<std::int64_t>(tc.log_every, 1);

    const TrainResult result = train(data, objective, objective.residual_mode ? base.get() : nullptr,
                                     mlp_init(net.layer_dims(system.state_dim(), system.control_dim()), net.seed,
                                              net.zero_output),
                                     tc);
    SweepRecord rec;
    rec.key = key;
    rec.samples = n;
    rec.lagrangian = result.final_evaluation.lagrangian;
    rec.objective = result.final_evaluation.objective;
    rec.constraints = result.final_evaluation.constraints;
    rec.multipliers = result.dual.multipliers;
    for (const auto& r : result.log.records)
      if (r.multipliers.size() > 0) rec.min_multiplier = std::min(rec.min_multiplier, r.multipliers.minCoeff());
    rec.steps = result.steps;

    std::lock_guard<std::mutex> lock(mutex);
    done[key] = rec;
    std::string line = rec.to_json().dump() + "\n";
    std::FILE* f = std::fopen(partial_path.c_str(), "ab");
    if (f == nullptr) throw IoError("cannot append to " + partial_path.string());
    std::fwrite(line.data(), 1, line.size(), f);
    std::fclose(f);
  };

  try {
    parallel_for(todo.size(), workers, run_one);
  } catch (...) {
    failure = std::current_exception();
  }

  const std::size_t expected = hidden_sizes.size() * sample_sizes.size() * seeds;
  if (failure || done.size() != expected) {
    write_manifest(ctx.out_dir, "convergence", resolved, json::object(), notes, false);
    if (failure) std::rethrow_exception(failure);
    throw TrainingError("convergence sweep incomplete");
  }

  const std::size_t K = objective.constraints.size();
  std::string records = "model,hidden,N,seed,final_lagrangian,final_objective";
  for (std::size_t k = 1; k <= K; ++k) records += ",g_" + std::to_string(k);
  for (std::size_t k = 1; k <= K; ++k) records += ",lambda_" + std::to_string(k);
  records += ",min_lambda,steps\n";
  std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> cells;
  for (const auto& [key, r] : done) {
    records += std::to_string(key.model) + ',' + join_hidden(hidden_sizes[key.model]) + ',' +
               std::to_string(r.samples) + ',' + std::to_string(key.seed) + ',' + format_double(r.lagrangian) +
               ',' + format_double(r.objective);
    for (Eigen::Index k = 0; k < r.constraints.size(); ++k) records += ',' + format_double(r.constraints[k]);
    for (Eigen::Index k = 0; k < r.multipliers.size(); ++k) records += ',' + format_double(r.multipliers[k]);
    records += ',' + format_double(r.min_multiplier) + ',' + std::to_string(r.steps) + '\n';
    cells[{key.model, key.n}].push_back(r.lagrangian);
  }

  std::string summary_csv = "model,hidden,N,count,median,q1,q3,min,max,mean\n";
  json cells_json = json::array();
  for (const auto& [cell, values] : cells) {
    const Summary s = summarize(values);
    summary_csv += std::to_string(cell.first) + ',' + join_hidden(hidden_sizes[cell.first]) + ',' +
                   std::to_string(sample_sizes[cell.second]) + ',' + std::to_string(s.count) + ',' +
                   format_double(s.median) + ',' + format_double(s.q1) + ',' + format_double(s.q3) + ',' +
                   format_double(s.min) + ',' + format_double(s.max) + ',' + format_double(s.mean) + '\n';
    json c = s.to_json();
    c["model"] = cell.first;
    c["N"] = sample_sizes[cell.second];
    cells_json.push_back(c);
  }

  write_text_file(ctx.out_dir / "sweep_records.csv", records);
  write_text_file(ctx.out_dir / "sweep_summary.csv", summary_csv);
  const json summary{{"records", done.size()}, {"cells", cells_json}};
  write_json_file(ctx.out_dir / "summary.json", summary);
  // The partial file records completion order, which depends on scheduling.
  fs::remove(partial_path);
  write_manifest(ctx.out_dir, "convergence", resolved, json::object(), notes, true);
  return summary;
}

}  // namespace saml
