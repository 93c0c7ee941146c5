#include "prospectq/scenario.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace prospectq;

namespace {

int do_validate(const std::string& path) {
  const ExperimentConfig cfg = load_config(path);
  std::cout << cfg.echo.dump(2) << "\n";
  std::cerr << "config ok: " << to_string(cfg.scenario) << " (" << cfg.regimes.size() << " regime"
            << (cfg.regimes.size() == 1 ? "" : "s") << "), hash " << cfg.hash << "\n";
  return 0;
}

int do_run(const std::string& path, const std::string& out, std::optional<std::uint64_t> seed,
           std::optional<std::string> backend) {
  ExperimentConfig cfg = with_overrides(load_config(path), seed, backend);
  const std::filesystem::path dir = out.empty() ? std::filesystem::path(cfg.output) : std::filesystem::path(out);
  const ScenarioResult res = run_scenario(cfg, dir);
  for (const auto& a : res.artifacts) std::cout << a.string() << "\n";
  std::cerr << res.summary.dump() << "\n";
  if (!res.failures.empty()) {
    for (const auto& f : res.failures) std::cerr << "FAILED: " << f << "\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prospect-theoretic Q-learning experiments"};
  app.require_subcommand(1);

  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  std::string backend;

  auto* run_cmd = app.add_subcommand("run", "Run the scenario described by a config file");
  run_cmd->add_option("config", config, "Config file (JSON)")->required();
  run_cmd->add_option("--out", out, "Output directory (default: the config's output field)");
  auto* seed_opt = run_cmd->add_option("--seed", seed, "Override the config's seed");
  auto* backend_opt = run_cmd->add_option("--backend", backend, "Expectation backend")
                          ->check(CLI::IsMember({"quadrature", "mc"}));

  auto* validate_cmd = app.add_subcommand("validate", "Check a config file and print it with defaults");
  validate_cmd->add_option("config", config, "Config file (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 3;
  }

  try {
    if (*validate_cmd) return do_validate(config);
    return do_run(config, out, seed_opt->count() ? std::optional<std::uint64_t>(seed) : std::nullopt,
                  backend_opt->count() ? std::optional<std::string>(backend) : std::nullopt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  } catch (const TheoremViolation& e) {
    std::cerr << "theorem violation: " << e.what() << "\n" << e.diagnostic().dump(2) << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
