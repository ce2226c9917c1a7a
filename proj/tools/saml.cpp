#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "saml/error.hpp"
#include "saml/experiments.hpp"

namespace {

int report(const char* type, const std::string& message) {
  std::cerr << nlohmann::json{{"error", {{"type", type}, {"message", message}}}}.dump() << '\n';
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained model learning and closed-loop evaluation"};
  app.require_subcommand(1);

  std::string config, out;
  for (const char* name : {"generate", "train", "convergence", "evaluate-control"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "JSON config, or a manifest.json to re-run")->required();
    sub->add_option("--out", out, "output directory")->required();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report("UsageError", e.what());
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const nlohmann::json summary = saml::run_command(command, config, out);
    std::cout << summary.dump(2) << '\n';
  } catch (const saml::Error& e) {
    return report(e.kind(), e.what());
  } catch (const nlohmann::json::exception& e) {
    return report("ConfigError", e.what());
  } catch (const std::exception& e) {
    return report("Error", e.what());
  }
  return 0;
}
