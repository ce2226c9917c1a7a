#include <cmath>
#include <limits>
#include <map>
#include <memory>

#include "saml/control.hpp"
#include "saml/error.hpp"
#include "saml/experiments.hpp"
#include "saml/json_io.hpp"
#include "saml/provenance.hpp"
#include "saml/rng.hpp"
#include "saml/stats.hpp"

namespace saml {

namespace fs = std::filesystem;

namespace {

// One controller model under evaluation. kind "learned" wraps a checkpoint
// (residual on top of the base model, or a full model); "base" and "true"
// plan with the analytic nominal and the ground-truth dynamics respectively.
struct ModelEntry {
  std::string name;
  std::string kind = "learned";
  fs::path checkpoint;
  bool residual = true;
  std::shared_ptr<const Mlp> net;

  json to_json() const {
    json j{{"name", name}, {"kind", kind}};
    if (kind == "learned") {
      j["checkpoint"] = checkpoint.string();
      j["residual"] = residual;
    }
    return j;
  }
};

std::vector<ModelEntry> parse_models(const json& config, const fs::path& config_dir) {
  if (!config.contains("models") || !config.at("models").is_array() || config.at("models").empty())
    throw ConfigError("evaluate-control needs a nonempty 'models' array");
  std::vector<ModelEntry> models;
  for (const auto& m : config.at("models")) {
    ModelEntry e;
    e.name = value_or<std::string>(m, "name", "");
    if (e.name.empty()) throw ConfigError("every model needs a 'name'");
    for (const auto& other : models)
      if (other.name == e.name) throw ConfigError("duplicate model name '" + e.name + "'");
    e.kind = value_or<std::string>(m, "kind", "learned");
    if (e.kind == "learned") {
      const auto path = value_or<std::string>(m, "checkpoint", "");
      if (path.empty()) throw ConfigError("model '" + e.name + "' needs a 'checkpoint'");
      fs::path p(path);
      if (p.is_relative()) p = config_dir / p;
      e.checkpoint = fs::absolute(p).lexically_normal();
      if (!fs::exists(e.checkpoint))
        throw ConfigError("checkpoint for model '" + e.name + "' not found: " + e.checkpoint.string());
      e.residual = value_or(m, "residual", true);
    } else if (e.kind != "base" && e.kind != "true") {
      throw ConfigError("unknown model kind '" + e.kind + "'");
    }
    models.push_back(std::move(e));
  }
  return models;
}

// Per-task model instance; learned models hold scratch buffers and are not
// shared across threads.
struct ModelInstance {
  std::unique_ptr<DynamicsModel> base;
  std::unique_ptr<DynamicsModel> owned;
  const DynamicsModel* model = nullptr;
};

ModelInstance instantiate(const ModelEntry& e, const SystemSpec& system) {
  ModelInstance inst;
  if (e.kind == "true") {
    inst.owned = make_true_model(system);
  } else if (e.kind == "base") {
    inst.owned = make_base_model(system);
  } else {
    inst.base = make_base_model(system);
    inst.owned = std::make_unique<LearnedModel>(e.residual ? inst.base.get() : nullptr, *e.net, system.state_dim(),
                                                system.control_dim());
  }
  inst.model = inst.owned.get();
  return inst;
}

json mean_std(const std::vector<double>& v) {
  const Summary s = summarize(v);
  return {{"count", s.count}, {"mean", s.mean}, {"std", s.std}, {"min", s.min}, {"median", s.median}, {"max", s.max}};
}

std::string join(const Eigen::VectorXd& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
  return s;
}

json matrix_columns(const Eigen::MatrixXd& m) {
  json cols = json::array();
  for (Eigen::Index c = 0; c < m.cols(); ++c) cols.push_back(to_json(Eigen::VectorXd(m.col(c))));
  return cols;
}

// Paired comparisons candidate - reference on a per-trial metric.
json paired_comparisons(const json& spec, const std::vector<ModelEntry>& models,
                        const std::vector<std::vector<double>>& metric, const char* metric_name, int resamples,
                        std::uint64_t seed) {
  json out = json::array();
  for (const auto& c : spec) {
    const auto cand = value_or<std::string>(c, "candidate", "");
    const auto ref = value_or<std::string>(c, "reference", "");
    std::size_t ci = models.size(), ri = models.size();
    for (std::size_t i = 0; i < models.size(); ++i) {
      if (models[i].name == cand) ci = i;
      if (models[i].name == ref) ri = i;
    }
    if (ci == models.size() || ri == models.size())
      throw ConfigError("comparison names unknown model ('" + cand + "' vs '" + ref + "')");
    std::vector<double> diff(metric[ci].size());
    for (std::size_t t = 0; t < diff.size(); ++t) diff[t] = metric[ci][t] - metric[ri][t];
    const BootstrapInterval b = bootstrap_mean(diff, resamples, 0.95, mix_seed(seed, 0x626f6f74ULL));
    out.push_back({{"candidate", cand},
                   {"reference", ref},
                   {"metric", metric_name},
                   {"meanDifference", b.estimate},
                   {"lower95", b.lower},
                   {"upper95", b.upper},
                   {"resamples", resamples}});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Receding-horizon MPC trials (double integrator, quadrotor).

json run_mpc_trials(const json& config, const ExperimentContext& ctx, const SystemSpec& system,
                    std::vector<ModelEntry>& models, json resolved, json inputs) {
  const auto trials = value_or<std::int64_t>(config, "trials", 0);
  if (trials < 1) throw ConfigError("trial count must be at least 1");
  const auto seed = value_or<std::uint64_t>(config, "seed", 0);
  const int workers = value_or(config, "workers", 1);
  const int steps = value_or(config, "steps", system.name == "quadrotor" ? 50 : 100);
  if (steps < 1) throw ConfigError("rollout steps must be at least 1");
  if (!config.contains("mpc")) throw ConfigError("MPC experiment needs an 'mpc' block");
  const MpcConfig mpc = MpcConfig::from_json(config.at("mpc"));
  mpc.validate(system.control_dim());
  const json start = value_or(config, "start", json::object());
  if (!start.contains("lo") || !start.contains("hi")) throw ConfigError("MPC experiment needs start.lo and start.hi");
  const Eigen::VectorXd lo = vector_from_json(start.at("lo"));
  const Eigen::VectorXd hi = vector_from_json(start.at("hi"));
  if (lo.size() != system.state_dim() || hi.size() != system.state_dim() || (lo.array() > hi.array()).any())
    throw ConfigError("start.lo/hi must be state-sized with lo <= hi");
  // Normalize by |x[normalizeIndex]| of the start state; -1 disables.
  const int norm_index = value_or(config, "normalizeIndex", system.name == "doubleIntegrator" ? 0 : -1);
  const json comparisons = value_or(config, "comparisons", json::array());
  const int resamples = value_or(config, "bootstrapResamples", 10000);

  resolved["trials"] = trials;
  resolved["seed"] = seed;
  resolved["workers"] = workers;
  resolved["steps"] = steps;
  resolved["mpc"] = mpc.to_json();
  resolved["start"] = {{"lo", to_json(lo)}, {"hi", to_json(hi)}};
  resolved["normalizeIndex"] = norm_index;
  resolved["comparisons"] = comparisons;
  resolved["bootstrapResamples"] = resamples;

  // Start states are drawn once per trial and shared by every model, so
  // per-trial differences are paired.
  std::vector<Eigen::VectorXd> starts(static_cast<std::size_t>(trials));
  for (std::int64_t t = 0; t < trials; ++t) {
    Pcg32 rng(mix_seed(mix_seed(seed, 0x7374617274ULL), static_cast<std::uint64_t>(t)));
    Eigen::VectorXd x(lo.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = lo[i] == hi[i] ? lo[i] : rng.uniform(lo[i], hi[i]);
    starts[static_cast<std::size_t>(t)] = x;
  }

  const std::size_t nt = starts.size();
  std::vector<RolloutResult> results(models.size() * nt);
  parallel_for(results.size(), workers, [&](std::size_t i) {
    const std::size_t m = i / nt, t = i % nt;
    const ModelInstance inst = instantiate(models[m], system);
    const auto truth_local = make_true_model(system);
    results[i] = mpc_rollout(mpc, *inst.model, *truth_local, starts[t], steps,
                             mix_seed(mix_seed(seed, 0x6d7063ULL), t));
  });

  std::string csv = "model,trial";
  for (Eigen::Index i = 0; i < system.state_dim(); ++i) csv += ",x0_" + std::to_string(i + 1);
  csv += ",cost,normalized_cost,max_violation,violated,infeasible_solves\n";
  std::string traj;
  std::vector<std::vector<double>> cost(models.size()), normalized(models.size());
  json per_model = json::object();
  for (std::size_t m = 0; m < models.size(); ++m) {
    std::vector<int> violated;
    for (std::size_t t = 0; t < nt; ++t) {
      const RolloutResult& r = results[m * nt + t];
      const double denom = norm_index >= 0 ? std::abs(starts[t][norm_index]) : 1.0;
      const double norm_cost = denom > 0.0 ? r.cost / denom : std::numeric_limits<double>::infinity();
      const bool bad = r.max_violation > mpc.feasibility_tolerance;
      cost[m].push_back(r.cost);
      normalized[m].push_back(norm_cost);
      violated.push_back(bad);
      csv += models[m].name + ',' + std::to_string(t) + ',' + join(starts[t]) + ',' + format_double(r.cost) + ',' +
             format_double(norm_cost) + ',' + format_double(r.max_violation) + ',' + (bad ? "1" : "0") + ',' +
             std::to_string(r.infeasible_solves) + '\n';
      traj += json{{"model", models[m].name}, {"trial", t}, {"states", matrix_columns(r.states)},
                   {"controls", matrix_columns(r.controls)}}
                  .dump() +
              '\n';
    }
    std::size_t nviol = 0;
    for (int v : violated) nviol += static_cast<std::size_t>(v);
    per_model[models[m].name] = {{"cost", mean_std(cost[m])},
                                 {"normalizedCost", mean_std(normalized[m])},
                                 {"violatedTrials", nviol}};
  }

  json summary{{"experiment", "mpc"}, {"system", system.name}, {"trials", trials}, {"models", per_model}};
  summary["comparisons"] = paired_comparisons(comparisons, models, norm_index >= 0 ? normalized : cost,
                                              norm_index >= 0 ? "normalizedCost" : "cost", resamples, seed);
  write_text_file(ctx.out_dir / "rollouts.csv", csv);
  write_text_file(ctx.out_dir / "trajectories.jsonl", traj);
  write_json_file(ctx.out_dir / "summary.json", summary);
  json notes = json::array(
      {"receding-horizon single-shooting MPC with multi-start Adam; first control applied to the true system",
       "realized cost sums stage costs over states 0..steps, including the start state",
       "start states drawn uniformly from start.lo/hi, shared across models"});
  if (norm_index >= 0) notes.push_back("normalized cost divides by |x_start[normalizeIndex]|");
  if (system.name == "quadrotor")
    notes.push_back("start-state distribution and run count are substitutes for an unstated protocol");
  write_manifest(ctx.out_dir, "evaluate-control", resolved, inputs, notes);
  return summary;
}

// ---------------------------------------------------------------------------
// Single-shot paddle trials.

json run_ball_trials(const json& config, const ExperimentContext& ctx, const SystemSpec& system,
                     std::vector<ModelEntry>& models, json resolved, json inputs) {
  const auto trials = value_or<std::int64_t>(config, "trials", 0);
  if (trials < 1) throw ConfigError("trial count must be at least 1");
  const auto seed = value_or<std::uint64_t>(config, "seed", 0);
  const int workers = value_or(config, "workers", 1);
  const PaddleConfig paddle = PaddleConfig::from_json(value_or(config, "paddle", json::object()));
  const json protocol_in = value_or(config, "protocol", json::object());
  const auto target_range = value_or<std::vector<double>>(protocol_in, "targetRange", {-1.0, 1.0});
  const auto speed_min = value_or<std::vector<double>>(protocol_in, "speedMin", {3.0, 4.0});
  const auto speed_span = value_or<std::vector<double>>(protocol_in, "speedSpan", {1.0, 2.0});
  const auto roll = value_or<std::vector<double>>(protocol_in, "roll", {-0.5, 0.5});
  const auto pitch = value_or<std::vector<double>>(protocol_in, "pitch", {-0.5, 0.5});
  const auto ball_xy = value_or<std::vector<double>>(protocol_in, "ballVelocityXY", {-0.5, 0.5});
  const auto ball_z = value_or<std::vector<double>>(protocol_in, "ballVelocityZ", {-5.0, -2.0});
  for (const auto* r : {&target_range, &speed_min, &speed_span, &roll, &pitch, &ball_xy, &ball_z})
    if (r->size() != 2 || (*r)[0] > (*r)[1]) throw ConfigError("protocol ranges must be [lo, hi] with lo <= hi");
  const json failure_in = value_or(config, "failure", json::object());
  const double max_error = value_or(failure_in, "landingError", 1.0);
  const double min_up = value_or(failure_in, "minUpwardSpeed", 0.5);
  const json comparisons = value_or(config, "comparisons", json::array());
  const int resamples = value_or(config, "bootstrapResamples", 10000);

  const json protocol{{"targetRange", target_range}, {"speedMin", speed_min}, {"speedSpan", speed_span},
                      {"roll", roll},                {"pitch", pitch},        {"ballVelocityXY", ball_xy},
                      {"ballVelocityZ", ball_z}};
  resolved["trials"] = trials;
  resolved["seed"] = seed;
  resolved["workers"] = workers;
  resolved["paddle"] = paddle.to_json();
  resolved["protocol"] = protocol;
  resolved["failure"] = {{"landingError", max_error}, {"minUpwardSpeed", min_up}};
  resolved["comparisons"] = comparisons;
  resolved["bootstrapResamples"] = resamples;

  std::vector<PaddleProblem> problems(static_cast<std::size_t>(trials));
  for (std::int64_t t = 0; t < trials; ++t) {
    Pcg32 rng(mix_seed(mix_seed(seed, 0x7061646cULL), static_cast<std::uint64_t>(t)));
    PaddleProblem& p = problems[static_cast<std::size_t>(t)];
    p.target = {rng.uniform(target_range[0], target_range[1]), rng.uniform(target_range[0], target_range[1])};
    p.speed_lo = rng.uniform(speed_min[0], speed_min[1]);
    p.speed_hi = p.speed_lo + rng.uniform(speed_span[0], speed_span[1]);
    p.roll_lo = roll[0];
    p.roll_hi = roll[1];
    p.pitch_lo = pitch[0];
    p.pitch_hi = pitch[1];
    p.v_ball = {rng.uniform(ball_xy[0], ball_xy[1]), rng.uniform(ball_xy[0], ball_xy[1]),
                rng.uniform(ball_z[0], ball_z[1])};
    p.gravity = system.ball.gravity;
  }

  struct Outcome {
    PaddleSolution solution;
    Eigen::Vector3d actual;
    double landing_error = 0.0;
    double prediction_error = 0.0;
    bool failed = false;
  };
  const std::size_t nt = problems.size();
  std::vector<Outcome> outcomes(models.size() * nt);
  parallel_for(outcomes.size(), workers, [&](std::size_t i) {
    const std::size_t m = i / nt, t = i % nt;
    const ModelInstance inst = instantiate(models[m], system);
    const auto truth = make_true_model(system);
    const PaddleProblem& p = problems[t];
    Outcome o;
    o.solution = paddle_solve(p, *inst.model, paddle, mix_seed(mix_seed(seed, 0x736f6c76ULL), t));
    o.actual = truth->step(p.v_ball, o.solution.control);
    const Eigen::Vector2d actual_loc = landing_offset(o.actual, p.gravity);
    o.landing_error = (actual_loc - p.target).norm();
    o.prediction_error = (landing_offset(o.solution.predicted, p.gravity) - actual_loc).norm();
    o.failed = o.prediction_error > max_error || o.actual.z() < min_up;
    outcomes[i] = o;
  });

  std::string csv =
      "model,trial,target_x,target_y,v_min,v_max,ball_vx,ball_vy,ball_vz,roll,pitch,speed,"
      "landing_error,prediction_error,upward_speed,failed\n";
  std::vector<std::vector<double>> errors(models.size()), fails(models.size());
  json per_model = json::object();
  for (std::size_t m = 0; m < models.size(); ++m) {
    for (std::size_t t = 0; t < nt; ++t) {
      const Outcome& o = outcomes[m * nt + t];
      const PaddleProblem& p = problems[t];
      errors[m].push_back(o.landing_error);
      fails[m].push_back(o.failed ? 1.0 : 0.0);
      csv += models[m].name + ',' + std::to_string(t) + ',' + format_double(p.target.x()) + ',' +
             format_double(p.target.y()) + ',' + format_double(p.speed_lo) + ',' + format_double(p.speed_hi) + ',' +
             join(p.v_ball) + ',' + format_double(o.solution.roll) + ',' + format_double(o.solution.pitch) + ',' +
             format_double(o.solution.speed) + ',' + format_double(o.landing_error) + ',' +
             format_double(o.prediction_error) + ',' + format_double(o.actual.z()) + ',' + (o.failed ? "1" : "0") +
             '\n';
    }
    double nfail = 0.0;
    for (double f : fails[m]) nfail += f;
    per_model[models[m].name] = {{"landingError", mean_std(errors[m])},
                                 {"failures", static_cast<std::int64_t>(nfail)},
                                 {"failureRate", nfail / static_cast<double>(nt)}};
  }

  json summary{{"experiment", "ballBounce"}, {"system", system.name}, {"trials", trials}, {"models", per_model}};
  summary["comparisons"] = paired_comparisons(comparisons, models, errors, "landingError", resamples, seed);
  write_text_file(ctx.out_dir / "trials.csv", csv);
  write_json_file(ctx.out_dir / "summary.json", summary);
  const json notes = json::array(
      {"failure: predicted-vs-actual landing offset error > failure.landingError or actual upward speed < "
       "failure.minUpwardSpeed (proxy for the ball not being re-hit)",
       "paddle command searched over (roll, pitch, relative speed): random samples then Adam refinement",
       "landing error measured on the true bounce model"});
  write_manifest(ctx.out_dir, "evaluate-control", resolved, inputs, notes);
  return summary;
}

}  // namespace

json run_evaluate_control(const json& config, const ExperimentContext& ctx) {
  if (!config.is_object() || !config.contains("system")) throw ConfigError("evaluate-control needs a 'system'");
  const SystemSpec system = SystemSpec::from_json(config.at("system"));
  std::vector<ModelEntry> models = parse_models(config, ctx.config_dir);
  const auto trials = value_or<std::int64_t>(config, "trials", 0);
  if (trials < 1) throw ConfigError("trial count must be at least 1");

  json inputs = json::object();
  json model_json = json::array();
  for (auto& m : models) {
    if (m.kind == "learned") {
      CheckpointMeta meta;
      m.net = std::make_shared<const Mlp>(load_checkpoint(m.checkpoint, &meta));
      if (m.net->input_dim() != system.state_dim() + system.control_dim() ||
          m.net->output_dim() != system.state_dim())
        throw ConfigError("checkpoint for model '" + m.name + "' does not match system '" + system.name + "'");
      inputs[m.checkpoint.string()] = git_blob_hash_file(m.checkpoint);
    }
    model_json.push_back(m.to_json());
  }
  json resolved{{"system", system.to_json()}, {"models", model_json}};

  if (system.name == "ball") {
    resolved["experiment"] = "ballBounce";
    return run_ball_trials(config, ctx, system, models, resolved, inputs);
  }
  resolved["experiment"] = "mpc";
  return run_mpc_trials(config, ctx, system, models, resolved, inputs);
}

}  // namespace saml
