#pragma once

#include "prospectq/bellman.hpp"
#include "prospectq/dynamics.hpp"
#include "prospectq/learner.hpp"
#include "prospectq/mdp.hpp"
#include "prospectq/valuation.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace prospectq {

/// Invalid or unreadable experiment configuration (CLI exit code 3).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Scenario {
  converge,
  census,
  regions,
  fig2,
  fig3,
  fig5,
  multi_eq_51,
  compare_alt,
  compare_classical
};

std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& name);

struct MdpSpec {
  /// Instance file; when empty the instance is generated.
  std::string file;
  int s = 20;
  int r = 20;
  double k_min = 2.0;
  double k_max = 5.0;
  double alpha = 0.5;
  std::uint64_t seed = 1;
};

struct CurveSpec {
  CurveForm form = CurveForm::logistic;
  double L = 10.0;
  double gamma = 1.0;
  double x0 = 5.0;
  double tail = 1e-3;
  std::vector<double> xs;
  std::vector<double> us;
};

/// Box [ref + lo, ref + hi] with ref one of 0, k_min, K.
struct InitSpec {
  std::string relative_to = "absolute";
  double lo = 0.0;
  double hi = 0.0;
};

struct LearnerSpec {
  double epsilon = 0.05;
  int block = 100;
  std::int64_t iters = 200000;
  int runs = 1;
  std::optional<InitSpec> init;
  bool resample_control = false;
  int error_window = 1000;
};

struct DynamicsSpec {
  double dt = 0.05;
  double t_max = 500.0;
  double tol = 1e-8;
  int interior_seeds = 20;
  bool ode_seeds = true;
  bool newton_hunt = true;
};

struct ProbeSpec {
  int per_equilibrium = 2;
  double radius = 0.05;
  std::int64_t iters = 2000000;
  int block = 1;
  std::int64_t clock_offset = 1000;
};

struct Regime {
  std::string label = "main";
  MdpSpec mdp;
  CurveSpec curve;
  double c = 0.01;
  Mode mode = Mode::future_distorted;
  Backend backend;
  LearnerSpec learner;
  DynamicsSpec dynamics;
  ProbeSpec probes;
};

struct ExperimentConfig {
  Scenario scenario = Scenario::census;
  std::string name;
  std::uint64_t seed = 1;
  std::string output = "out";
  std::vector<Regime> regimes;
  /// Fully defaulted config, as written next to the artifacts.
  nlohmann::json echo;
  /// 16 hex digits of a 64-bit FNV-1a hash of echo (without output).
  std::string hash;
  /// Directory relative instance paths are resolved against.
  std::filesystem::path base_dir;
};

/// Validates raw against the schema, fills defaults and expands regimes.
/// Throws ConfigError naming the offending key.
ExperimentConfig parse_config(const nlohmann::json& raw, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Returns a copy with top-level overrides applied and the hash recomputed.
ExperimentConfig with_overrides(const ExperimentConfig& cfg, std::optional<std::uint64_t> seed,
                                std::optional<std::string> backend);

std::string config_hash(const nlohmann::json& echo);

/// Objects a regime resolves to.
struct RegimeModel {
  std::shared_ptr<const Mdp> mdp;
  SCurve curve;
  NoiseModel noise;
  RegionPoints points;
};

RegimeModel build_regime(const Regime& regime, const std::filesystem::path& base_dir);
Operator make_operator(const RegimeModel& model, const Regime& regime, Mode mode);
SearchOptions search_options(const Regime& regime, std::uint64_t seed);
LearnerConfig learner_config(const Regime& regime, const Mdp& m, Mode mode, std::uint64_t seed);

struct ScenarioResult {
  std::vector<std::filesystem::path> artifacts;
  nlohmann::json summary;
  /// Failed expectations; nonempty means exit code 2.
  std::vector<std::string> failures;
};

/// Runs the scenario and writes its artifacts into out_dir (atomically, one
/// file at a time).  Theorem violations and failed expectations are
/// collected into failures after the partial artifacts are written.
ScenarioResult run_scenario(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

/// Writes content to path via a temporary file and rename.
void write_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace prospectq
