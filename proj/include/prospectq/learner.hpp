#pragma once

#include "prospectq/bellman.hpp"
#include "prospectq/mdp.hpp"
#include "prospectq/valuation.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace prospectq {

struct LearnerConfig {
  Mode mode = Mode::future_distorted;
  double epsilon = 0.05;
  /// a(mu) = 1 / ceil(mu / stepsize_block).
  int stepsize_block = 100;
  /// Added to every local clock before the stepsize is taken; 0 is a cold
  /// start.  A warm start resumes an iteration whose clocks already advanced.
  std::int64_t initial_clock = 0;
  std::int64_t max_iters = 100000;
  std::uint64_t seed = 0;
  /// Explicit initial Q; otherwise uniform in init_box (or the mode's box
  /// when init_box is unset).
  std::optional<Vec> init;
  std::optional<Box> init_box;
  /// Snapshot of Q every record_every steps (0 = none).
  std::int64_t record_every = 0;
  int error_window = 1000;
  bool record_errors = true;
  /// Draw U_{n+1} afresh at step n+1 instead of reusing the action chosen
  /// inside the step-n target.
  bool resample_control = false;
  /// Keep every (pair, q_before, step, target) for replay.
  bool trace_updates = false;
};

struct UpdateTrace {
  int pair;
  double q_before;
  double step;
  double target;
};

struct Snapshot {
  std::int64_t iteration;
  Vec q;
};

struct RunRecord {
  QTable final_q;
  Vec initial_q;
  /// |Q_{n+1}(X_n, U_n) - Q_n(X_n, U_n)| per step.
  std::vector<double> error_series;
  std::vector<double> moving_avg;
  /// mu(i, v, n) at the end of the run.
  std::vector<std::int64_t> visit_counts;
  std::int64_t iterations = 0;
  double min_visit_ratio = 0.0;
  std::vector<Snapshot> snapshots;
  /// Updates whose result left the mode's box (expected to stay 0).
  std::int64_t box_violations = 0;
  /// Steps where epsilon-greedy selection had a single action.
  std::int64_t degenerate_selections = 0;
  std::vector<UpdateTrace> trace;
};

/// Perturbed argmax with probability 1 - epsilon, each other action with
/// probability epsilon / (r - 1).  Ties go to the lowest index.  With a single
/// action that action is returned and `degenerate` (if given) is set.
int epsilon_greedy_select(std::span<const double> q_row, std::span<const double> noise_row,
                          double epsilon, Rng& rng, bool* degenerate = nullptr);

/// 1 / ceil(mu / block); mu counts the current visit, so mu >= 1.
double stepsize(std::int64_t mu, int block);

/// (1 - a) q + a target, kept inside [min(q, target), max(q, target)].
double convex_update(double q, double a, double target);

RunRecord run(const Mdp& m, const SCurve& curve, const NoiseModel& noise, const LearnerConfig& cfg);

/// min over pairs of mu(i, v, n) / n: the empirical exploration constant.
double exploration_diagnostic(const RunRecord& rec);

/// Trailing mean over the last `window` entries (fewer at the start).
std::vector<double> moving_average(const std::vector<double>& xs, int window);

void write_error_csv(const RunRecord& rec, std::ostream& out);
nlohmann::json summary_json(const RunRecord& rec, const LearnerConfig& cfg);

}  // namespace prospectq
