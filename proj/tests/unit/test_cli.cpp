#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "saml/json_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int status = 0;
  std::string out;
  std::string err;
};

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("saml_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Run saml_run(const std::string& args, const fs::path& dir) {
  const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = std::string("\"") + SAML_BINARY + "\" " + args + " >\"" + out.string() + "\" 2>\"" +
                          err.string() + "\"";
  Run r;
  r.status = std::system(cmd.c_str());
  r.out = saml::read_text_file(out);
  r.err = saml::read_text_file(err);
  return r;
}

Run run_config(const std::string& command, const json& config, const fs::path& dir, const std::string& out) {
  const fs::path cfg = dir / (out + ".config.json");
  saml::write_json_file(cfg, config);
  return saml_run(command + " --config \"" + cfg.string() + "\" --out \"" + (dir / out).string() + "\"", dir);
}

std::string error_type(const Run& r) { return json::parse(r.err).at("error").at("type").get<std::string>(); }

std::string first_line(const fs::path& p) {
  const std::string text = saml::read_text_file(p);
  return text.substr(0, text.find('\n'));
}

json di_generate(std::int64_t count) {
  return {{"system", {{"name", "doubleIntegrator"}}}, {"count", count}, {"seed", 5}, {"noiseSigma", 0.0}};
}

json di_train() {
  return {{"system", {{"name", "doubleIntegrator"}}},
          {"dataset", {{"generate", {{"count", 300}, {"seed", 5}}}}},
          {"objective",
           {{"residual", true},
            {"loss", "euclidean"},
            {"constraints",
             {{{"loss", "euclidean"},
               {"form", "conditionalMean"},
               {"epsilon", 0.01},
               {"indicator", {{"kind", "infNormBall"}, {"radius", 0.5}, {"indices", {0, 1}}}}}}}}},
          {"trainer", {{"batchSize", 32}, {"epochs", 4}, {"seed", 3}, {"logEvery", 5}, {"checkpointEvery", 2}}},
          {"network", {{"hidden", {4, 2}}, {"seed", 1}}},
          {"evaluation", {{"count", 200}}}};
}

json di_control(const fs::path& checkpoint, int trials) {
  return {{"system", {{"name", "doubleIntegrator"}}},
          {"models", {{{"name", "m"}, {"checkpoint", checkpoint.string()}, {"residual", true}}}},
          {"trials", trials},
          {"seed", 1},
          {"steps", 3},
          {"start", {{"lo", {-1.0, 0.0}}, {"hi", {1.0, 0.0}}}},
          {"mpc", {{"horizon", 4}, {"controlLo", {-10.0}}, {"controlHi", {10.0}}, {"restarts", 2}, {"iterations", 20}}}};
}

}  // namespace

TEST_CASE("cli rejects bad invocations with a JSON error") {
  const fs::path dir = scratch("usage");
  Run r = saml_run("", dir);
  CHECK(r.status != 0);
  CHECK(error_type(r) == "UsageError");
  r = saml_run("train --out x", dir);
  CHECK(r.status != 0);
  CHECK(error_type(r) == "UsageError");
  r = run_config("generate", di_generate(0), dir, "zero");
  CHECK(r.status != 0);
  CHECK(error_type(r) == "ConfigError");
  CHECK(r.out.empty());
  r = saml_run("generate --config \"" + (dir / "missing.json").string() + "\" --out \"" + (dir / "o").string() + "\"",
               dir);
  CHECK(r.status != 0);
  CHECK(error_type(r) == "IoError");
}

TEST_CASE("generate is deterministic and reruns from its manifest") {
  const fs::path dir = scratch("generate");
  REQUIRE(run_config("generate", di_generate(200), dir, "a").status == 0);
  REQUIRE(run_config("generate", di_generate(200), dir, "b").status == 0);
  CHECK(saml::read_text_file(dir / "a" / "dataset.jsonl") == saml::read_text_file(dir / "b" / "dataset.jsonl"));
  const Run again = saml_run("generate --config \"" + (dir / "a" / "manifest.json").string() + "\" --out \"" +
                                 (dir / "c").string() + "\"",
                             dir);
  REQUIRE(again.status == 0);
  const json ma = saml::read_json_file(dir / "a" / "manifest.json");
  const json mc = saml::read_json_file(dir / "c" / "manifest.json");
  CHECK(ma.at("outputs") == mc.at("outputs"));
  CHECK(ma.at("config") == mc.at("config"));
  CHECK(ma.at("complete") == true);
}

TEST_CASE("train writes its log, checkpoints and manifest") {
  const fs::path dir = scratch("train");
  const Run r = run_config("train", di_train(), dir, "t");
  REQUIRE(r.status == 0);
  const json summary = json::parse(r.out);
  CHECK(summary.at("steps") == 40);
  CHECK(first_line(dir / "t" / "training_log.csv") == "step,epoch,objective,g_1,lambda_1,lagrangian");
  CHECK(fs::exists(dir / "t" / "checkpoints" / "epoch_000002.json"));
  CHECK(fs::exists(dir / "t" / "model.json"));
  const json manifest = saml::read_json_file(dir / "t" / "manifest.json");
  CHECK(manifest.at("command") == "train");
  CHECK(manifest.at("outputs").contains("model.json"));

  const Run again = saml_run("train --config \"" + (dir / "t" / "manifest.json").string() + "\" --out \"" +
                                 (dir / "u").string() + "\"",
                             dir);
  REQUIRE(again.status == 0);
  CHECK(saml::read_json_file(dir / "u" / "manifest.json").at("outputs") == manifest.at("outputs"));
  const Run wrong = saml_run("generate --config \"" + (dir / "t" / "manifest.json").string() + "\" --out \"" +
                                 (dir / "v").string() + "\"",
                             dir);
  CHECK(wrong.status != 0);
  CHECK(error_type(wrong) == "ConfigError");
}

TEST_CASE("evaluate-control validates its inputs") {
  const fs::path dir = scratch("control");
  Run r = run_config("evaluate-control", di_control(dir / "nope.json", 2), dir, "missing");
  CHECK(r.status != 0);
  CHECK(error_type(r) == "ConfigError");

  REQUIRE(run_config("train", di_train(), dir, "t").status == 0);
  const fs::path ckpt = dir / "t" / "model.json";
  r = run_config("evaluate-control", di_control(ckpt, 0), dir, "zero");
  CHECK(r.status != 0);
  CHECK(error_type(r) == "ConfigError");

  json wrong_system = di_control(ckpt, 2);
  wrong_system["system"] = {{"name", "ball"}};
  r = run_config("evaluate-control", wrong_system, dir, "dims");
  CHECK(r.status != 0);
  CHECK(error_type(r) == "ConfigError");

  r = run_config("evaluate-control", di_control(ckpt, 2), dir, "ok");
  REQUIRE(r.status == 0);
  CHECK(first_line(dir / "ok" / "rollouts.csv") ==
        "model,trial,x0_1,x0_2,cost,normalized_cost,max_violation,violated,infeasible_solves");
  CHECK(json::parse(r.out).at("models").at("m").at("cost").at("count") == 2);
}

TEST_CASE("convergence writes records and a summary") {
  const fs::path dir = scratch("convergence");
  json cfg = di_train();
  cfg.erase("dataset");
  cfg.erase("network");
  cfg.erase("evaluation");
  cfg["hiddenSizes"] = {{2, 1}};
  cfg["sampleSizes"] = {50, 100};
  cfg["seeds"] = 2;
  cfg["baseSeed"] = 4;
  cfg["trainer"]["epochs"] = 2;
  const Run r = run_config("convergence", cfg, dir, "c");
  REQUIRE(r.status == 0);
  CHECK(first_line(dir / "c" / "sweep_records.csv") ==
        "model,hidden,N,seed,final_lagrangian,final_objective,g_1,lambda_1,min_lambda,steps");
  CHECK(first_line(dir / "c" / "sweep_summary.csv") == "model,hidden,N,count,median,q1,q3,min,max,mean");
  CHECK(!fs::exists(dir / "c" / "sweep_partial.jsonl"));
  CHECK(json::parse(r.out).at("records") == 4);
  cfg["workers"] = 3;
  REQUIRE(run_config("convergence", cfg, dir, "d").status == 0);
  CHECK(saml::read_text_file(dir / "c" / "sweep_records.csv") == saml::read_text_file(dir / "d" / "sweep_records.csv"));
}
