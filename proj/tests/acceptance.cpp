// Acceptance suite: one line per criterion, nonzero exit if any fails.

#include "prospectq/dynamics.hpp"
#include "prospectq/parallel.hpp"
#include "prospectq/rng.hpp"
#include "prospectq/scenario.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

using namespace prospectq;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

fs::path config_path(const std::string& name) { return fs::path(PROSPECTQ_CONFIG_DIR) / (name + ".json"); }

double sup(const Vec& v) { return v.lpNorm<Eigen::Infinity>(); }

Vec random_in(const Box& box, Eigen::Index n, Rng& rng) {
  std::uniform_real_distribution<double> U(box.lo, box.hi);
  Vec q(n);
  for (Eigen::Index k = 0; k < n; ++k) q(k) = U(rng);
  return q;
}

std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt2(const char* f, double a, double b) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

Operator steep_small(int s, int r, std::uint64_t seed, Mode mode) {
  auto m = std::make_shared<const Mdp>(generate_random_mdp(s, r, 2.0, 5.0, 0.6, seed));
  return Operator(m, mode, SCurve::logistic(12.5, 4.0, 7.0), NoiseModel(0.01), 0.05, Backend::quadrature(16));
}

struct RegimeCensus {
  RegimeModel model;
  Operator op;
  Census census;
  RegionReport report;
};

RegimeCensus census_of(const ExperimentConfig& cfg, std::size_t k, Mode mode) {
  const Regime& g = cfg.regimes.at(k);
  RegimeModel model = build_regime(g, cfg.base_dir);
  Operator op = make_operator(model, g, mode);
  Census census = find_equilibria(op, search_options(g, substream_seed(cfg.seed, 100 + k)));
  RegionReport report = region_report(census, model.points, op, false);
  return {std::move(model), std::move(op), std::move(census), std::move(report)};
}

Outcome c1_classical() {
  const Mdp m = generate_random_mdp(5, 3, 2.0, 5.0, 0.5, 101);
  const Vec qstar = value_iteration(m, Vec::Constant(m.pairs(), m.k_min()), 1e-12);
  LearnerConfig lc;
  lc.mode = Mode::classical;
  lc.max_iters = 200000;
  lc.seed = 1;
  lc.record_errors = false;
  const RunRecord rec = run(m, SCurve::logistic(1.0, 1.0, 0.0), NoiseModel(0.0), lc);
  const double rel = sup(rec.final_q.values - qstar) / sup(qstar);
  return {rel <= 0.05, fmt("relative sup error %.4f (bound 0.05)", rel)};
}

Outcome c2_boundedness() {
  std::int64_t violations = 0;
  int runs = 0;
  for (Mode mode : {Mode::classical, Mode::future_distorted, Mode::total_distorted}) {
    std::vector<std::int64_t> v(100, 0);
    parallel_for(v.size(), [&](std::size_t n) {
      const Mdp m = generate_random_mdp(5, 5, 2.0, 5.0, 0.6, 500 + n);
      LearnerConfig lc;
      lc.mode = mode;
      lc.max_iters = 20000;
      lc.seed = n;
      lc.record_errors = false;
      const RunRecord rec = run(m, SCurve::logistic(12.5, 4.0, 7.0), NoiseModel(0.01), lc);
      v[n] = rec.box_violations + (rec.final_q.in_box() ? 0 : 1);
    });
    for (auto x : v) violations += x;
    runs += 100;
  }
  double worst_ode = 0.0;
  Rng rng(2);
  for (Mode mode : {Mode::future_distorted, Mode::total_distorted}) {
    const Operator op = steep_small(5, 5, 77, mode);
    for (int n = 0; n < 10; ++n) {
      OdeOptions opt;
      opt.t_max = 30.0;
      opt.tol = 1e-300;
      const OdeTrajectory tr = integrate(random_in(op.box(), 25, rng), op, opt);
      worst_ode = std::max(worst_ode, tr.max_box_violation);
    }
  }
  const bool ok = violations == 0 && worst_ode <= 1e-9;
  return {ok, std::to_string(runs) + " learner runs, " + std::to_string(violations) + " violations; " +
                  fmt("ODE max box excursion %.2e", worst_ode)};
}

Outcome c3_monotone() {
  Rng rng(3);
  double worst = 0.0;
  int pairs = 0;
  for (Mode mode : {Mode::future_distorted, Mode::total_distorted}) {
    const Operator op = steep_small(4, 4, 31, mode);
    const Box box = op.box();
    for (int n = 0; n < 25; ++n, ++pairs) {
      const Vec lo = random_in(box, 16, rng);
      Vec hi = lo;
      std::uniform_real_distribution<double> U(0.0, 1.5);
      for (Eigen::Index k = 0; k < hi.size(); ++k) hi(k) = std::min(box.hi, hi(k) + U(rng));
      OdeOptions opt;
      opt.t_max = 20.0;
      opt.tol = 1e-300;
      const OdeTrajectory a = integrate(lo, op, opt);
      const OdeTrajectory b = integrate(hi, op, opt);
      for (std::size_t k = 0; k < std::min(a.states.size(), b.states.size()); ++k)
        worst = std::max(worst, (a.states[k] - b.states[k]).maxCoeff());
    }
  }
  return {worst <= 1e-9, std::to_string(pairs) + fmt(" pairs, worst order violation %.2e", std::max(worst, 0.0))};
}

Outcome c4_jacobian() {
  Rng rng(4);
  double worst = 0.0;
  for (Mode mode : {Mode::future_distorted, Mode::total_distorted}) {
    const Operator op = steep_small(5, 4, 41, mode);
    const Eigen::Index n = op.mdp().pairs();
    for (int trial = 0; trial < 20; ++trial) {
      const Vec q = random_in(op.box(), n, rng);
      const Mat an = op.jacobian(q).entries;
      Mat fd(n, n);
      const double h = 1e-6;
      for (Eigen::Index k = 0; k < n; ++k) {
        Vec up = q, dn = q;
        up(k) += h;
        dn(k) -= h;
        fd.col(k) = (op.apply(up) - op.apply(dn)) / (2 * h);
      }
      worst = std::max(worst, (an - fd).norm() / std::max(fd.norm(), 1e-12));
    }
  }
  return {worst <= 1e-4, fmt("worst relative Frobenius error %.2e (bound 1e-4)", worst)};
}

Outcome c5_perron() {
  Rng rng(5);
  const Operator op = steep_small(6, 5, 51, Mode::future_distorted);
  double bound_gap = 0.0;
  double dom_gap = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const JacobianMatrix J = op.jacobian(random_in(op.box(), op.mdp().pairs(), rng));
    const double lam = perron_root(J.entries).value;
    bound_gap = std::max({bound_gap, J.gamma_min - lam, lam - J.gamma_max});
    Eigen::EigenSolver<Mat> es(J.entries, false);
    for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k)
      dom_gap = std::max(dom_gap, std::abs(es.eigenvalues()(k)) - lam);
  }
  const bool ok = bound_gap <= 1e-8 && dom_gap <= 1e-6;
  return {ok, fmt2("worst bound excess %.2e, worst |eigenvalue| excess %.2e", std::max(bound_gap, 0.0),
                   std::max(dom_gap, 0.0))};
}

Outcome c6_one_equilibrium(const ExperimentConfig& fig3) {
  const RegimeCensus rc = census_of(fig3, 0, Mode::future_distorted);
  const auto& eqs = rc.census.equilibria;
  const bool ok = !rc.model.points.steep_region_exists && eqs.size() == 1 && eqs[0].stability == Stability::stable;
  return {ok, std::to_string(eqs.size()) + " equilibrium(s) from " + std::to_string(rc.census.seeds.size()) +
                  " seeds" + (eqs.empty() ? "" : ", " + to_string(eqs[0].stability))};
}

Outcome c7_two_regimes(const ExperimentConfig& fig3) {
  const RegimeCensus rc = census_of(fig3, 1, Mode::future_distorted);
  bool stable = true;
  for (const auto& e : rc.census.equilibria)
    if (e.region == Region::upper_stable || e.region == Region::lower_stable)
      stable = stable && e.stability == Stability::stable;
  const RegionReport& rep = rc.report;
  const bool ok =
      rc.census.equilibria.size() >= 2 && rep.upper_count == 1 && rep.lower_count <= 1 && stable && rep.all_passed();
  return {ok, std::to_string(rc.census.equilibria.size()) + " equilibria, upper " + std::to_string(rep.upper_count) +
                  ", lower " + std::to_string(rep.lower_count) + (stable ? ", region members stable" : ", unstable member")};
}

Outcome c8_sufficiency(const ExperimentConfig& fig5) {
  const RegimeCensus rc = census_of(fig5, 0, Mode::future_distorted);
  const Regime& g = fig5.regimes[0];
  const RegionPoints& pts = rc.model.points;
  const Equilibrium* upper = nullptr;
  for (const auto& e : rc.census.equilibria)
    if (e.region == Region::upper_stable) upper = &e;
  if (!rc.report.thm13_sufficiency || !upper || rc.report.upper_count != 1)
    return {false, std::string("sufficiency ") + (rc.report.thm13_sufficiency ? "holds" : "fails") +
                       ", upper equilibria " + std::to_string(rc.report.upper_count)};
  const Mdp& m = *rc.model.mdp;
  const Box init_box{*pts.b + g.c, m.K()};
  Rng rng(8);
  OdeOptions opt;
  opt.tol = 1e-9;
  double ode_dist = 0.0;
  for (int n = 0; n < 3; ++n) {
    const OdeTrajectory tr = integrate(random_in(init_box, m.pairs(), rng), rc.op, opt);
    ode_dist = std::max(ode_dist, sup(tr.final_state() - upper->q.values));
  }
  std::vector<double> dist(10, 0.0);
  parallel_for(dist.size(), [&](std::size_t n) {
    LearnerConfig lc = learner_config(g, m, Mode::future_distorted, substream_seed(fig5.seed, 800 + n));
    lc.init_box = init_box;
    lc.record_errors = false;
    const RunRecord rec = run(m, rc.model.curve, rc.model.noise, lc);
    dist[n] = sup(rec.final_q.values - upper->q.values);
  });
  const double worst = *std::max_element(dist.begin(), dist.end());
  const bool ok = ode_dist <= 1e-6 && worst <= 0.1;
  return {ok, fmt2("u1(b+c) - (b+c) = %.3f; ODE distance %.2e", rc.report.u1_at_b_plus_c - (*pts.b + g.c), ode_dist) +
                  fmt(", worst learner distance %.4f over 10 seeds", worst)};
}

Outcome c9_uniqueness() {
  const ExperimentConfig cfg = load_config(config_path("regions"));
  const RegimeCensus rc = census_of(cfg, 0, Mode::future_distorted);
  const auto& eqs = rc.census.equilibria;
  const bool ok = rc.report.thm15_uniqueness && eqs.size() == 1 && eqs[0].region == Region::upper_stable;
  return {ok, std::string("uniqueness hypothesis ") + (rc.report.thm15_uniqueness ? "holds" : "fails") + ", " +
                  std::to_string(eqs.size()) + " equilibrium(s)" +
                  (eqs.empty() ? "" : " in region " + to_string(eqs[0].region))};
}

Outcome c10_multi() {
  const ExperimentConfig cfg = load_config(config_path("multi_eq_51"));
  const fs::path dir = fs::temp_directory_path() / "prospectq-acceptance";
  fs::create_directories(dir);
  const ScenarioResult res = run_scenario(cfg, dir);
  const int stable = res.summary.at("stable_count").get<int>();
  const int returned = res.summary.at("probes_returned").get<int>();
  const int probes = res.summary.at("probes").get<int>();
  const bool ok = res.failures.empty() && stable >= 3 && returned == probes;
  return {ok, std::to_string(stable) + " stable equilibria, " + std::to_string(returned) + "/" +
                  std::to_string(probes) + " probes returned within 0.05"};
}

Outcome c11_agreement(const ExperimentConfig& fig3) {
  const Regime& g = fig3.regimes[1];
  const RegimeModel model = build_regime(g, fig3.base_dir);
  const Operator op = make_operator(model, g, Mode::future_distorted);
  const Mdp& m = *model.mdp;
  std::vector<double> dist(10, 0.0);
  parallel_for(dist.size(), [&](std::size_t n) {
    LearnerConfig lc = learner_config(g, m, Mode::future_distorted, substream_seed(fig3.seed, 1100 + n));
    lc.max_iters = 300000;
    lc.record_errors = false;
    // Half the seeds start near the top of the box, half near the bottom.
    lc.init_box = n % 2 ? Box{m.k_min(), m.k_min() + 0.5} : Box{m.K() - 1.0, m.K() - 0.5};
    const RunRecord rec = run(m, model.curve, model.noise, lc);
    OdeOptions opt;
    opt.tol = 1e-8;
    opt.record_every = 0;
    const OdeTrajectory tr = integrate(rec.initial_q, op, opt);
    dist[n] = sup(rec.final_q.values - tr.final_state());
  });
  const double worst = *std::max_element(dist.begin(), dist.end());
  return {worst <= 0.1, fmt("worst learner/ODE sup distance %.4f over 10 seeds (bound 0.1)", worst)};
}

const Equilibrium* greatest(const Census& c) {
  const OrderStructure o = order_structure(c.equilibria);
  return o.greatest ? &c.equilibria[*o.greatest] : nullptr;
}

Outcome c12_alt() {
  const ExperimentConfig cfg = load_config(config_path("compare_alt"));
  const RegimeCensus fut = census_of(cfg, 0, Mode::future_distorted);
  const RegimeCensus tot = census_of(cfg, 0, Mode::total_distorted);
  const Equilibrium* f = greatest(fut.census);
  const Equilibrium* t = greatest(tot.census);
  if (!f || !t) return {false, "a census has no greatest element"};
  const double diff = (t->q.values - f->q.values).minCoeff();
  const RegionReport& rep = tot.report;
  const TheoremCheck* k1 = rep.check("condition1_consistent");
  const TheoremCheck* k2 = rep.check("condition2_consistent");
  const bool flags = rep.condition1.has_value() && rep.condition2.has_value() && k1 && k2 && k1->passed && k2->passed;
  const bool ok = diff >= -1e-3 && flags && rep.all_passed() && fut.report.all_passed();
  return {ok, fmt("min componentwise (total - future) %.3e", diff) + "; condition 1 " +
                  (rep.condition1.value_or(false) ? "holds" : "fails") + ", condition 2 " +
                  (rep.condition2.value_or(false) ? "holds" : "fails") + (flags ? ", consistent" : ", inconsistent")};
}

Outcome c13_backends() {
  auto m = std::make_shared<const Mdp>(generate_random_mdp(2, 2, 2.0, 5.0, 0.5, 131));
  double worst = 0.0;
  Rng rng(13);
  for (Mode mode : {Mode::future_distorted, Mode::total_distorted}) {
    const Operator quad(m, mode, SCurve::logistic(10.0, 2.0, 5.0), NoiseModel(0.01), 0.05, Backend::quadrature(32));
    const Operator mc = quad.with_backend(Backend::monte_carlo(1000000, 7));
    for (int trial = 0; trial < 10; ++trial) {
      Vec q = random_in(quad.box(), 4, rng);
      // Every other draw puts both actions of a block in contention.
      if (trial % 2) q(1) = q(0) + 0.005;
      worst = std::max(worst, sup(quad.apply(q) - mc.apply(q)));
    }
  }
  return {worst <= 3e-4, fmt("worst |F_quad - F_mc| %.2e (bound 3e-4)", worst)};
}

}  // namespace

int main() {
  const ExperimentConfig fig3 = load_config(config_path("fig3"));
  const ExperimentConfig fig5 = load_config(config_path("fig5"));
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"C1 classical sanity", c1_classical},
      {"C2 boundedness", c2_boundedness},
      {"C3 monotone flow", c3_monotone},
      {"C4 Jacobian vs finite differences", c4_jacobian},
      {"C5 Perron bounds", c5_perron},
      {"C6 one-equilibrium regime", [&] { return c6_one_equilibrium(fig3); }},
      {"C7 two-regime split", [&] { return c7_two_regimes(fig3); }},
      {"C8 upper sufficiency", [&] { return c8_sufficiency(fig5); }},
      {"C9 uniqueness", c9_uniqueness},
      {"C10 four-state multi-equilibrium", c10_multi},
      {"C11 learner/ODE agreement", [&] { return c11_agreement(fig3); }},
      {"C12 total-return comparison", c12_alt},
      {"C13 backend equivalence", c13_backends},
  };
  int failed = 0;
  for (const auto& [name, body] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = body();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] %s: %s (%.1fs)\n", out.pass ? "PASS" : "FAIL", name.c_str(), out.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !out.pass;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
