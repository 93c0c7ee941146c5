#include "prospectq/dynamics.hpp"

#include "prospectq/parallel.hpp"
#include "prospectq/rng.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace prospectq {

namespace {

double sup(const Vec& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

bool leq(const Vec& x, const Vec& y, double tol) { return ((x - y).array() <= tol).all(); }

std::vector<double> to_std(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

std::string to_string(Stability s) {
  switch (s) {
    case Stability::stable: return "stable";
    case Stability::unstable: return "unstable";
    case Stability::marginal: return "marginal";
  }
  return "?";
}

std::string to_string(Region r) {
  switch (r) {
    case Region::upper_stable: return "upper_stable";
    case Region::lower_stable: return "lower_stable";
    case Region::unstable_region: return "unstable_region";
    case Region::mixed: return "mixed";
  }
  return "?";
}

OdeTrajectory integrate(const Vec& q0, const Operator& op, const OdeOptions& opt,
                        const OdeObserver& observer) {
  if (!(opt.dt > 0.0) || !(opt.t_max >= 0.0) || !(opt.tol > 0.0))
    throw std::invalid_argument("need dt > 0, t_max >= 0 and tol > 0");
  const Box box = op.box();
  if (!box.contains(q0, 1e-9)) throw std::invalid_argument("initial state must lie in the mode's box");

  OdeTrajectory traj;
  traj.dt = opt.dt;
  const double dt = opt.dt;
  const auto max_steps = static_cast<std::int64_t>(std::ceil(opt.t_max / dt - 1e-9));

  Vec q = q0;
  Vec k1 = op.field(q);
  double res = sup(k1);
  auto record = [&](double t) {
    traj.times.push_back(t);
    traj.states.push_back(q);
    traj.residuals.push_back(res);
  };
  record(0.0);

  std::int64_t step = 0;
  bool last_recorded = true;
  while (res >= opt.tol && step < max_steps) {
    const Vec k2 = op.field(q + 0.5 * dt * k1);
    const Vec k3 = op.field(q + 0.5 * dt * k2);
    const Vec k4 = op.field(q + dt * k3);
    q += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    ++step;
    const double t = static_cast<double>(step) * dt;
    const double viol = box.violation(q);
    traj.max_box_violation = std::max(traj.max_box_violation, viol);
    if (viol > opt.box_abort) {
      std::ostringstream msg;
      msg << "ODE state left the box by " << viol << " at t = " << t;
      throw std::runtime_error(msg.str());
    }
    if (observer) observer(t, q);
    k1 = op.field(q);
    res = sup(k1);
    last_recorded = opt.record_every > 0 && step % opt.record_every == 0;
    if (last_recorded) record(t);
  }
  if (!last_recorded) record(static_cast<double>(step) * dt);
  traj.steps = step;
  traj.terminal_residual = res;
  traj.converged = res < opt.tol;
  return traj;
}

PerronResult perron_root(const Mat& A, double tol, int max_sweeps) {
  const Eigen::Index n = A.rows();
  if (n == 0 || A.cols() != n) throw std::invalid_argument("perron_root needs a nonempty square matrix");
  if ((A.array() < 0.0).any()) throw std::invalid_argument("perron_root needs a nonnegative matrix");
  PerronResult out;
  Vec x = Vec::Constant(n, 1.0 / static_cast<double>(n));
  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    Vec y = A * x;
    if (!(y.array() > 0.0).all() || !y.allFinite()) break;
    const Vec ratio = y.cwiseQuotient(x);
    const double lo = ratio.minCoeff();
    const double hi = ratio.maxCoeff();
    out.sweeps = sweep;
    if (hi - lo <= tol * hi) {
      out.value = 0.5 * (lo + hi);
      out.converged = true;
      return out;
    }
    x = y / y.sum();
  }
  // Reducible or periodic structure: take the spectral radius from the dense spectrum.
  Eigen::EigenSolver<Mat> es(A, false);
  out.value = es.eigenvalues().cwiseAbs().maxCoeff();
  out.converged = false;
  return out;
}

Equilibrium classify(const Vec& q, const Operator& op, double residual_tol) {
  Equilibrium e;
  e.residual = sup(op.field(q));
  if (!(e.residual <= residual_tol)) {
    std::ostringstream msg;
    msg << "classify: residual " << e.residual << " exceeds " << residual_tol;
    throw std::invalid_argument(msg.str());
  }
  e.q = {q, op.box()};
  e.jacobian = op.jacobian(q);
  const PerronResult pr = perron_root(e.jacobian.entries);
  e.dominant = pr.value;
  e.perron_from_power = pr.converged;
  const auto n = e.jacobian.entries.rows();
  if (n <= kDenseSpectrumLimit) {
    Eigen::EigenSolver<Mat> es(e.jacobian.entries, false);
    e.max_real = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < n; ++k) {
      const std::complex<double> lam = es.eigenvalues()(k) - 1.0;
      e.spectrum.push_back(lam);
      e.max_real = std::max(e.max_real, lam.real());
    }
  } else {
    e.max_real = e.dominant - 1.0;
  }
  if (e.max_real < -1e-6)
    e.stability = Stability::stable;
  else if (e.max_real > 1e-6)
    e.stability = Stability::unstable;
  else
    e.stability = Stability::marginal;
  return e;
}

std::optional<Vec> newton_solve(const Vec& q0, const Operator& op, double tol, int max_iters) {
  const Box box = op.box();
  const auto n = q0.size();
  Vec q = box.clamp(q0);
  Vec h = op.field(q);
  double res = sup(h);
  const double target = tol * 1e-3;
  for (int it = 0; it < max_iters && res > target; ++it) {
    const Mat A = op.jacobian(q).entries - Mat::Identity(n, n);
    const Vec delta = A.partialPivLu().solve(-h);
    if (!delta.allFinite()) break;
    bool accepted = false;
    double lambda = 1.0;
    for (int tries = 0; tries < 30; ++tries, lambda *= 0.5) {
      const Vec cand = box.clamp(q + lambda * delta);
      const Vec hc = op.field(cand);
      const double rc = sup(hc);
      if (rc < res) {
        q = cand;
        h = hc;
        res = rc;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  if (res <= tol) return q;
  return std::nullopt;
}

std::optional<Vec> solve_from(const Vec& q0, const Operator& op, const SearchOptions& opt,
                              SeedOutcome* outcome) {
  const Box box = op.box();
  Vec q = box.clamp(q0);
  double newton_at = opt.newton_switch;
  SeedOutcome local;
  SeedOutcome& out = outcome ? *outcome : local;
  for (std::int64_t it = 0; it < opt.max_iters; ++it) {
    const Vec h = op.field(q);
    const double res = sup(h);
    out.iterations = it;
    out.residual = res;
    if (res < opt.tol) {
      // Polish well below tol so distinct seeds agree far inside the dedup radius.
      if (auto polished = newton_solve(q, op, opt.tol)) q = *polished;
      out.residual = sup(op.field(q));
      out.converged = true;
      return q;
    }
    if (res < newton_at) {
      if (auto root = newton_solve(q, op, opt.tol)) {
        out.residual = sup(op.field(*root));
        out.converged = true;
        return root;
      }
      newton_at = res * 0.1;
    }
    q += opt.eta * h;
  }
  out.converged = false;
  return std::nullopt;
}

void mark_extremes(std::vector<Equilibrium>& eqs, double tol) {
  for (std::size_t i = 0; i < eqs.size(); ++i) {
    bool greatest = true, least = true;
    for (std::size_t j = 0; j < eqs.size() && (greatest || least); ++j) {
      if (i == j) continue;
      if (!leq(eqs[j].q.values, eqs[i].q.values, tol)) greatest = false;
      if (!leq(eqs[i].q.values, eqs[j].q.values, tol)) least = false;
    }
    eqs[i].is_maximal = greatest;
    eqs[i].is_minimal = least;
  }
}

Census find_equilibria(const Operator& op, const SearchOptions& opt) {
  if (op.mode() == Mode::classical)
    throw std::invalid_argument("equilibrium search needs a distorted mode");
  if (!(opt.eta > 0.0 && opt.eta <= 1.0)) throw std::invalid_argument("damping must lie in (0, 1]");
  const Box box = op.box();
  const int n = op.mdp().pairs();

  std::vector<std::pair<std::string, Vec>> seeds;
  seeds.emplace_back("corner lo", Vec::Constant(n, box.lo));
  seeds.emplace_back("corner hi", Vec::Constant(n, box.hi));
  for (int k = 0; k < opt.interior_seeds; ++k) {
    Rng rng(substream_seed(opt.seed, static_cast<std::uint64_t>(k)));
    std::uniform_real_distribution<double> pick(box.lo, box.hi);
    Vec q(n);
    for (int t = 0; t < n; ++t) q(t) = pick(rng);
    seeds.emplace_back("interior " + std::to_string(k), std::move(q));
  }
  for (std::size_t k = 0; k < opt.extra_seeds.size(); ++k) {
    if (opt.extra_seeds[k].size() != n) throw std::invalid_argument("extra seed has the wrong length");
    seeds.emplace_back("extra " + std::to_string(k), opt.extra_seeds[k]);
  }

  struct Slot {
    std::optional<Vec> fp, ode;
    SeedOutcome fp_out, ode_out;
  };
  std::vector<Slot> slots(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t k) {
    Slot& slot = slots[k];
    slot.fp_out.origin = "fixed point from " + seeds[k].first;
    slot.fp = solve_from(seeds[k].second, op, opt, &slot.fp_out);
    if (!opt.ode_seeds) return;
    slot.ode_out.origin = "ode from " + seeds[k].first;
    try {
      const OdeTrajectory traj = integrate(seeds[k].second, op, opt.ode);
      slot.ode = solve_from(traj.final_state(), op, opt, &slot.ode_out);
    } catch (const std::runtime_error&) {
      slot.ode_out.converged = false;
    }
  });

  Census census;
  std::vector<std::pair<Vec, std::string>> found;
  auto admit = [&](const Vec& q, const std::string& origin) {
    for (const auto& f : found)
      if (sup(f.first - q) < opt.dedup) return false;
    found.emplace_back(q, origin);
    return true;
  };
  for (const Slot& slot : slots) {
    census.seeds.push_back(slot.fp_out);
    if (slot.fp) admit(*slot.fp, slot.fp_out.origin);
    if (!slot.fp_out.converged) ++census.failed_seeds;
    if (opt.ode_seeds) {
      census.seeds.push_back(slot.ode_out);
      if (slot.ode) admit(*slot.ode, slot.ode_out.origin);
      if (!slot.ode_out.converged) ++census.failed_seeds;
    }
  }

  auto classify_all = [&] {
    std::vector<Equilibrium> eqs(found.size());
    parallel_for(found.size(), [&](std::size_t k) {
      eqs[k] = classify(found[k].first, op, opt.tol);
      eqs[k].origin = found[k].second;
    });
    return eqs;
  };

  std::vector<Equilibrium> eqs = classify_all();
  if (opt.newton_hunt) {
    std::vector<std::pair<std::size_t, std::size_t>> tried;
    for (int round = 0; round < 3; ++round) {
      std::vector<Vec> mids;
      for (std::size_t i = 0; i < eqs.size(); ++i) {
        for (std::size_t j = 0; j < eqs.size(); ++j) {
          if (i == j || eqs[i].stability != Stability::stable || eqs[j].stability != Stability::stable) continue;
          if (!leq(eqs[i].q.values, eqs[j].q.values, 1e-9)) continue;
          if (std::find(tried.begin(), tried.end(), std::make_pair(i, j)) != tried.end()) continue;
          tried.emplace_back(i, j);
          mids.push_back(0.5 * (eqs[i].q.values + eqs[j].q.values));
        }
      }
      if (mids.empty()) break;
      std::vector<std::optional<Vec>> roots(mids.size());
      parallel_for(mids.size(), [&](std::size_t k) { roots[k] = newton_solve(mids[k], op, opt.tol); });
      const std::size_t before = found.size();
      for (const auto& root : roots)
        if (root && box.contains(*root, 1e-9)) admit(*root, "newton from stable midpoint");
      if (found.size() == before) break;
      std::vector<Equilibrium> extra(found.size() - before);
      parallel_for(extra.size(), [&](std::size_t k) {
        extra[k] = classify(found[before + k].first, op, opt.tol);
        extra[k].origin = found[before + k].second;
      });
      for (auto& e : extra) eqs.push_back(std::move(e));
    }
  }

  std::sort(eqs.begin(), eqs.end(), [](const Equilibrium& x, const Equilibrium& y) {
    const double sx = x.q.values.maxCoeff(), sy = y.q.values.maxCoeff();
    if (sx != sy) return sx < sy;
    return std::lexicographical_compare(x.q.values.data(), x.q.values.data() + x.q.values.size(),
                                        y.q.values.data(), y.q.values.data() + y.q.values.size());
  });
  mark_extremes(eqs);
  census.equilibria = std::move(eqs);
  return census;
}

Region region_of(const Vec& q, const RegionPoints& pts, const Operator& op) {
  if (!pts.steep_region_exists || !pts.a || !pts.b) return Region::upper_stable;
  const double c = op.noise().half_width();
  const double lo = q.minCoeff();
  const double hi = q.maxCoeff();
  if (op.mode() == Mode::total_distorted) {
    const Mdp& m = op.mdp();
    const double a_alt = pts.a_alt.value_or((*pts.a - m.k_max()) / m.alpha());
    const double b_alt = pts.b_alt.value_or((*pts.b - m.k_min()) / m.alpha());
    if (lo > b_alt + c) return Region::upper_stable;
    if (hi < a_alt - c) return Region::lower_stable;
    return Region::mixed;
  }
  if (lo > *pts.b + c) return Region::upper_stable;
  if (hi < *pts.a - c) return Region::lower_stable;
  if (pts.d && pts.e && lo > *pts.d + c && hi < *pts.e - c) return Region::unstable_region;
  return Region::mixed;
}

OrderStructure order_structure(const std::vector<Equilibrium>& eqs, double tol) {
  OrderStructure os;
  const std::size_t n = eqs.size();
  os.compare.assign(n, std::vector<int>(n, 0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const Vec& x = eqs[i].q.values;
      const Vec& y = eqs[j].q.values;
      if (leq(y, x, tol))
        os.compare[i][j] = 1;
      else if (leq(x, y, tol))
        os.compare[i][j] = -1;
      else
        os.compare[i][j] = 2;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    bool dominated = false, dominating = false, greatest = true, least = true;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const int cmp = os.compare[i][j];
      if (cmp == -1) dominated = true;
      if (cmp == 1) dominating = true;
      if (cmp != 1) greatest = false;
      if (cmp != -1) least = false;
    }
    if (!dominated) os.maximal.push_back(static_cast<int>(i));
    if (!dominating) os.minimal.push_back(static_cast<int>(i));
    if (greatest) os.greatest = static_cast<int>(i);
    if (least) os.least = static_cast<int>(i);
  }
  if (os.greatest && os.least && *os.greatest != *os.least &&
      eqs[*os.greatest].stability == Stability::stable && eqs[*os.least].stability == Stability::stable) {
    os.third_predicted = true;
    for (std::size_t k = 0; k < n; ++k) {
      if (static_cast<int>(k) == *os.greatest || static_cast<int>(k) == *os.least) continue;
      if (os.compare[k][*os.least] == 1 && os.compare[k][*os.greatest] == -1) os.third_located = true;
    }
    os.third_status = os.third_located ? "located" : "predicted but not located";
  }
  return os;
}

bool RegionReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const TheoremCheck& c) { return c.passed; });
}

const TheoremCheck* RegionReport::check(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

RegionReport region_report(Census& census, const RegionPoints& pts, const Operator& op, bool strict) {
  RegionReport rep;
  rep.mode = op.mode();
  rep.points = pts;
  rep.c = op.noise().half_width();
  rep.box = op.box();
  const Mdp& m = op.mdp();
  const double c = rep.c;
  const double alpha = m.alpha();
  auto& eqs = census.equilibria;

  for (auto& e : eqs) {
    e.region = region_of(e.q.values, pts, op);
    switch (e.region) {
      case Region::upper_stable: ++rep.upper_count; break;
      case Region::lower_stable: ++rep.lower_count; break;
      case Region::unstable_region: ++rep.unstable_count; break;
      case Region::mixed: ++rep.mixed_count; break;
    }
  }
  mark_extremes(eqs);

  auto add = [&](std::string name, bool hyp, bool passed, std::string detail) {
    rep.checks.push_back({std::move(name), hyp, !hyp || passed, std::move(detail)});
  };
  // An equilibrium the theorems place at the top (bottom) of the order must
  // dominate (be dominated by) every other census member.
  auto tops_all = [&](const Equilibrium& e) {
    return std::all_of(eqs.begin(), eqs.end(), [&](const Equilibrium& o) { return leq(o.q.values, e.q.values, 1e-6); });
  };
  auto bottoms_all = [&](const Equilibrium& e) {
    return std::all_of(eqs.begin(), eqs.end(), [&](const Equilibrium& o) { return leq(e.q.values, o.q.values, 1e-6); });
  };
  auto members_ok = [&](Region region, bool top) {
    int count = 0;
    bool ok = true;
    for (const auto& e : eqs) {
      if (e.region != region) continue;
      ++count;
      ok = ok && e.stability == Stability::stable && (top ? tops_all(e) : bottoms_all(e));
    }
    return ok && count <= 1;
  };
  auto count_detail = [](const char* what, int n) { return std::string(what) + " count " + std::to_string(n); };

  if (!pts.steep_region_exists || !pts.a || !pts.b) {
    const bool unique = eqs.size() == 1 && eqs[0].stability == Stability::stable;
    add("unique_gentle", true, unique,
        "max u' = " + std::to_string(pts.max_slope) + " below 1/alpha; census size " + std::to_string(eqs.size()));
  } else if (op.mode() == Mode::total_distorted) {
    const double a_alt = pts.a_alt.value_or((*pts.a - m.k_max()) / alpha);
    const double b_alt = pts.b_alt.value_or((*pts.b - m.k_min()) / alpha);
    rep.upper_from = b_alt + c;
    rep.lower_to = a_alt - c;
    rep.condition1 = *pts.b < m.k_min() + alpha * (m.K() - c);
    rep.condition2 = *pts.a > m.k_max() + alpha * c;
    add("alt_upper_at_most_one", true, members_ok(Region::upper_stable, true), count_detail("upper", rep.upper_count));
    add("alt_lower_at_most_one", true, members_ok(Region::lower_stable, false), count_detail("lower", rep.lower_count));
    add("condition1_consistent", rep.upper_count > 0, *rep.condition1,
        std::string("condition 1 ") + (*rep.condition1 ? "holds" : "fails"));
    add("condition2_consistent", rep.lower_count > 0, *rep.condition2,
        std::string("condition 2 ") + (*rep.condition2 ? "holds" : "fails"));
  } else {
    const double a = *pts.a, b = *pts.b;
    rep.upper_from = b + c;
    rep.lower_to = a - c;
    if (pts.d && pts.e) {
      rep.unstable_from = *pts.d + c;
      rep.unstable_to = *pts.e - c;
    }
    add("thm10_upper", true, members_ok(Region::upper_stable, true), count_detail("upper", rep.upper_count));
    add("thm10_lower", true, members_ok(Region::lower_stable, false), count_detail("lower", rep.lower_count));
    bool unstable_ok = true;
    for (const auto& e : eqs)
      if (e.region == Region::unstable_region && e.stability != Stability::unstable) unstable_ok = false;
    add("thm11_unstable", rep.unstable_count > 0, unstable_ok, count_detail("unstable-region", rep.unstable_count));

    const bool hyperbolic = std::none_of(eqs.begin(), eqs.end(), [](const Equilibrium& e) { return e.stability == Stability::marginal; });
    int below = 0, above = 0;
    bool extremes_ok = true;
    for (const auto& e : eqs) {
      if (e.stability != Stability::stable) continue;
      if (e.q.values.maxCoeff() < pts.m1 - c) {
        ++below;
        extremes_ok = extremes_ok && bottoms_all(e);
      }
      if (e.q.values.minCoeff() > pts.m1 + c) {
        ++above;
        extremes_ok = extremes_ok && tops_all(e);
      }
    }
    add("thm12_one_stable_each_side", op.curve().logistic_family() && hyperbolic,
        below <= 1 && above <= 1 && extremes_ok,
        "stable below m1-c: " + std::to_string(below) + ", above m1+c: " + std::to_string(above));

    rep.u1_at_b_plus_c = u1_eval(op.curve(), m.k_min(), alpha, c, b + c);
    rep.u2_at_a_minus_c = u2_eval(op.curve(), m.k_max(), alpha, c, a - c);
    rep.u1_at_a_plus_c = u1_eval(op.curve(), m.k_min(), alpha, c, a + c);
    rep.thm13_sufficiency = rep.u1_at_b_plus_c >= b + c;
    rep.thm14_sufficiency = rep.u2_at_a_minus_c <= a - c;
    rep.thm15_uniqueness = rep.u1_at_a_plus_c > a + c;

    bool has_top = std::any_of(eqs.begin(), eqs.end(), [&](const Equilibrium& e) {
      return e.q.values.minCoeff() >= b + c - 1e-9 && e.stability == Stability::stable && tops_all(e);
    });
    add("thm13_upper_exists", rep.thm13_sufficiency, has_top,
        "u1(b+c) = " + std::to_string(rep.u1_at_b_plus_c) + " vs b+c = " + std::to_string(b + c));
    bool has_bottom = std::any_of(eqs.begin(), eqs.end(), [&](const Equilibrium& e) {
      return e.q.values.maxCoeff() <= a - c + 1e-9 && e.stability == Stability::stable && bottoms_all(e);
    });
    add("thm14_lower_exists", rep.thm14_sufficiency, has_bottom,
        "u2(a-c) = " + std::to_string(rep.u2_at_a_minus_c) + " vs a-c = " + std::to_string(a - c));
    add("thm15_unique", rep.thm15_uniqueness, eqs.size() == 1 && eqs[0].region == Region::upper_stable,
        "u1(a+c) = " + std::to_string(rep.u1_at_a_plus_c) + "; census size " + std::to_string(eqs.size()));
  }

  if (strict && !rep.all_passed()) {
    std::string names;
    for (const auto& ch : rep.checks)
      if (!ch.passed) names += (names.empty() ? "" : ", ") + ch.name;
    nlohmann::json diag = to_json(rep);
    diag["census"] = to_json(census, order_structure(eqs));
    throw TheoremViolation("theorem check failed: " + names, std::move(diag));
  }
  return rep;
}

nlohmann::json to_json(const Equilibrium& e) {
  return {{"q", to_std(e.q.values)},
          {"residual", e.residual},
          {"dominant", e.dominant},
          {"gamma_min", e.jacobian.gamma_min},
          {"gamma_max", e.jacobian.gamma_max},
          {"max_real", e.max_real},
          {"stability", to_string(e.stability)},
          {"region", to_string(e.region)},
          {"is_maximal", e.is_maximal},
          {"is_minimal", e.is_minimal},
          {"origin", e.origin}};
}

nlohmann::json to_json(const OrderStructure& os) {
  nlohmann::json j;
  j["compare"] = os.compare;
  j["maximal"] = os.maximal;
  j["minimal"] = os.minimal;
  j["greatest"] = os.greatest ? nlohmann::json(*os.greatest) : nlohmann::json(nullptr);
  j["least"] = os.least ? nlohmann::json(*os.least) : nlohmann::json(nullptr);
  j["third_equilibrium"] = os.third_status;
  return j;
}

nlohmann::json to_json(const Census& census, const OrderStructure& order) {
  nlohmann::json j;
  j["label"] = census.label;
  j["count"] = census.equilibria.size();
  j["failed_seeds"] = census.failed_seeds;
  j["equilibria"] = nlohmann::json::array();
  for (const auto& e : census.equilibria) j["equilibria"].push_back(to_json(e));
  j["order"] = to_json(order);
  return j;
}

nlohmann::json to_json(const RegionReport& rep) {
  auto opt = [](const std::optional<double>& x) { return x ? nlohmann::json(*x) : nlohmann::json(nullptr); };
  auto optb = [](const std::optional<bool>& x) { return x ? nlohmann::json(*x) : nlohmann::json(nullptr); };
  nlohmann::json j;
  j["mode"] = to_string(rep.mode);
  j["c"] = rep.c;
  j["box"] = {rep.box.lo, rep.box.hi};
  const auto& p = rep.points;
  j["points"] = {{"steep_region_exists", p.steep_region_exists},
                 {"a", opt(p.a)},
                 {"b", opt(p.b)},
                 {"d", opt(p.d)},
                 {"e", opt(p.e)},
                 {"m1", p.m1},
                 {"max_slope", p.max_slope},
                 {"g", opt(p.g)},
                 {"b1", opt(p.b1)},
                 {"a_alt", opt(p.a_alt)},
                 {"b_alt", opt(p.b_alt)}};
  j["upper_from"] = opt(rep.upper_from);
  j["lower_to"] = opt(rep.lower_to);
  j["unstable_from"] = opt(rep.unstable_from);
  j["unstable_to"] = opt(rep.unstable_to);
  j["counts"] = {{"upper", rep.upper_count},
                 {"lower", rep.lower_count},
                 {"unstable", rep.unstable_count},
                 {"mixed", rep.mixed_count}};
  j["thm13_sufficiency"] = rep.thm13_sufficiency;
  j["thm14_sufficiency"] = rep.thm14_sufficiency;
  j["thm15_uniqueness"] = rep.thm15_uniqueness;
  j["u1_at_b_plus_c"] = rep.u1_at_b_plus_c;
  j["u2_at_a_minus_c"] = rep.u2_at_a_minus_c;
  j["u1_at_a_plus_c"] = rep.u1_at_a_plus_c;
  j["condition1"] = optb(rep.condition1);
  j["condition2"] = optb(rep.condition2);
  j["checks"] = nlohmann::json::array();
  for (const auto& c : rep.checks)
    j["checks"].push_back({{"name", c.name}, {"hypothesis", c.hypothesis}, {"passed", c.passed}, {"detail", c.detail}});
  j["all_passed"] = rep.all_passed();
  return j;
}

}  // namespace prospectq
