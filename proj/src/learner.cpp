#include "prospectq/learner.hpp"

#include "prospectq/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace prospectq {

int epsilon_greedy_select(std::span<const double> q_row, std::span<const double> noise_row,
                          double epsilon, Rng& rng, bool* degenerate) {
  const int r = static_cast<int>(q_row.size());
  if (r == 0 || noise_row.size() != q_row.size()) throw std::invalid_argument("action row size mismatch");
  if (degenerate) *degenerate = false;
  int best = 0;
  for (int w = 1; w < r; ++w)
    if (q_row[w] - noise_row[w] > q_row[best] - noise_row[best]) best = w;
  if (r == 1) {
    if (degenerate) *degenerate = epsilon > 0.0;
    return 0;
  }
  if (epsilon <= 0.0 || uniform01(rng) >= epsilon) return best;
  // Uniform over the other r - 1 actions.
  int other = std::uniform_int_distribution<int>(0, r - 2)(rng);
  return other >= best ? other + 1 : other;
}

double stepsize(std::int64_t mu, int block) {
  if (mu <= 0) throw std::invalid_argument("local clock must be >= 1");
  if (block <= 0) throw std::invalid_argument("stepsize block must be >= 1");
  return 1.0 / static_cast<double>((mu + block - 1) / block);
}

double convex_update(double q, double a, double target) {
  const double next = q + a * (target - q);
  return std::clamp(next, std::min(q, target), std::max(q, target));
}

std::vector<double> moving_average(const std::vector<double>& xs, int window) {
  if (window < 1) throw std::invalid_argument("window must be >= 1");
  std::vector<double> out(xs.size());
  double acc = 0.0;
  for (std::size_t n = 0; n < xs.size(); ++n) {
    acc += xs[n];
    if (n >= static_cast<std::size_t>(window)) acc -= xs[n - window];
    const std::size_t len = std::min<std::size_t>(n + 1, window);
    out[n] = acc / static_cast<double>(len);
  }
  return out;
}

RunRecord run(const Mdp& m, const SCurve& curve, const NoiseModel& noise, const LearnerConfig& cfg) {
  if (!(cfg.epsilon > 0.0 && cfg.epsilon < 1.0)) throw std::invalid_argument("epsilon must lie in (0, 1)");
  if (cfg.max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
  if (cfg.error_window < 1) throw std::invalid_argument("error_window must be >= 1");
  if (cfg.initial_clock < 0) throw std::invalid_argument("initial_clock must be >= 0");
  const int s = m.states();
  const int r = m.actions();
  const int n_pairs = m.pairs();
  const Box box = cfg.mode == Mode::total_distorted ? m.total_box() : m.box();

  Rng rng(cfg.seed);
  RunRecord rec;
  Vec Q(n_pairs);
  if (cfg.init) {
    if (cfg.init->size() != n_pairs) throw std::invalid_argument("initial Q has the wrong length");
    Q = *cfg.init;
  } else {
    const Box ib = cfg.init_box.value_or(box);
    std::uniform_real_distribution<double> pick(ib.lo, ib.hi);
    for (int n = 0; n < n_pairs; ++n) Q(n) = pick(rng);
  }
  if (!box.contains(Q)) throw std::invalid_argument("initial Q must lie in the mode's box");
  rec.initial_q = Q;

  std::vector<std::int64_t> mu(n_pairs, 0);
  std::vector<double> xi(r);
  auto draw_noise = [&] {
    for (int w = 0; w < r; ++w) xi[w] = noise.sample(rng);
  };
  auto select = [&](int state) {
    bool degenerate = false;
    const int a = epsilon_greedy_select(std::span<const double>(Q.data() + state * r, r), xi, cfg.epsilon,
                                        rng, &degenerate);
    if (degenerate) ++rec.degenerate_selections;
    return a;
  };

  int x = std::uniform_int_distribution<int>(0, s - 1)(rng);
  draw_noise();
  int u = select(x);

  if (cfg.record_errors) rec.error_series.reserve(static_cast<std::size_t>(cfg.max_iters));
  if (cfg.trace_updates) rec.trace.reserve(static_cast<std::size_t>(cfg.max_iters));
  const double alpha = m.alpha();
  for (std::int64_t n = 0; n < cfg.max_iters; ++n) {
    const int pair = m.index(x, u);
    const int next = m.step(x, u, rng);
    draw_noise();
    const int next_u = select(next);
    const int next_pair = m.index(next, next_u);

    double target = 0.0;
    switch (cfg.mode) {
      case Mode::classical:
        target = m.rewards()(pair) + alpha * Q.segment(next * r, r).maxCoeff();
        break;
      case Mode::future_distorted:
        target = m.rewards()(pair) + alpha * curve.value(Q(next_pair) - xi[next_u]);
        break;
      case Mode::total_distorted:
        target = curve.value(m.rewards()(pair) + alpha * (Q(next_pair) - xi[next_u]));
        break;
    }
    // In exact arithmetic the target lies in the box; rounding in
    // k + alpha * u can land one ulp past K.
    target = std::clamp(target, box.lo, box.hi);
    if (!std::isfinite(target)) throw std::runtime_error("non-finite target at step " + std::to_string(n));

    const double a = stepsize(++mu[pair] + cfg.initial_clock, cfg.stepsize_block);
    const double before = Q(pair);
    Q(pair) = convex_update(before, a, target);
    if (!box.contains(Q(pair))) ++rec.box_violations;
    if (cfg.record_errors) rec.error_series.push_back(std::abs(Q(pair) - before));
    if (cfg.trace_updates) rec.trace.push_back({pair, before, a, target});
    if (cfg.record_every > 0 && (n + 1) % cfg.record_every == 0) rec.snapshots.push_back({n + 1, Q});

    x = next;
    if (cfg.resample_control) {
      draw_noise();
      u = select(x);
    } else {
      u = next_u;
    }
  }

  rec.iterations = cfg.max_iters;
  rec.final_q = {Q, box};
  rec.visit_counts = std::move(mu);
  if (cfg.record_errors) rec.moving_avg = moving_average(rec.error_series, cfg.error_window);
  rec.min_visit_ratio = exploration_diagnostic(rec);
  return rec;
}

double exploration_diagnostic(const RunRecord& rec) {
  if (rec.iterations <= 0 || rec.visit_counts.empty()) return 0.0;
  const auto lowest = *std::min_element(rec.visit_counts.begin(), rec.visit_counts.end());
  return static_cast<double>(lowest) / static_cast<double>(rec.iterations);
}

void write_error_csv(const RunRecord& rec, std::ostream& out) {
  out << "iteration,error,moving_avg\n";
  char buf[96];
  for (std::size_t n = 0; n < rec.error_series.size(); ++n) {
    const double ma = n < rec.moving_avg.size() ? rec.moving_avg[n] : 0.0;
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", n, rec.error_series[n], ma);
    out << buf;
  }
}

nlohmann::json summary_json(const RunRecord& rec, const LearnerConfig& cfg) {
  nlohmann::json j;
  j["final_q"] = std::vector<double>(rec.final_q.values.data(), rec.final_q.values.data() + rec.final_q.values.size());
  j["min_visit_ratio"] = rec.min_visit_ratio;
  j["iterations"] = rec.iterations;
  j["box_violations"] = rec.box_violations;
  j["config"] = {{"mode", to_string(cfg.mode)},
                 {"epsilon", cfg.epsilon},
                 {"stepsize_block", cfg.stepsize_block},
                 {"initial_clock", cfg.initial_clock},
                 {"max_iters", cfg.max_iters},
                 {"seed", cfg.seed},
                 {"error_window", cfg.error_window},
                 {"resample_control", cfg.resample_control}};
  return j;
}

}  // namespace prospectq
