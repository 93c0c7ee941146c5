#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "prospectq/dynamics.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <memory>

using namespace prospectq;

namespace {

Vec random_in(const Box& box, Eigen::Index n, Rng& rng) {
  std::uniform_real_distribution<double> U(box.lo, box.hi);
  Vec q(n);
  for (Eigen::Index k = 0; k < n; ++k) q(k) = U(rng);
  return q;
}

// One pair, q -> 2 + 0.6 E u(q - y) with a steep logistic centred at the
// symmetric point 3.5: fixed points near 2, at 3.5 and near 5.
Operator scalar_bistable(double c) {
  auto m = std::make_shared<const Mdp>(build_explicit_mdp({{{1.0}}}, {{2.0}}, 0.6));
  return Operator(m, Mode::future_distorted, SCurve::logistic(5.0, 6.0, 3.5), NoiseModel(c), 0.05,
                  default_backend(1, c));
}

Operator steep_operator(int s, int r, std::uint64_t seed, Mode mode = Mode::future_distorted) {
  auto m = std::make_shared<const Mdp>(generate_random_mdp(s, r, 2.0, 5.0, 0.6, seed));
  return Operator(m, mode, SCurve::logistic(12.5, 4.0, 7.0), NoiseModel(0.01), 0.05, Backend::quadrature(16));
}

}  // namespace

TEST_CASE("linear classical flow matches its closed form") {
  auto m = std::make_shared<const Mdp>(build_explicit_mdp({{{1.0}}}, {{2.0}}, 0.5));
  const Operator op(m, Mode::classical, SCurve::logistic(1.0, 1.0, 0.0), NoiseModel(0.0), 0.05, Backend::exact());
  const double qstar = 4.0;
  Vec q0(1);
  q0 << 2.0;
  OdeOptions opt;
  opt.t_max = 20.0;
  opt.tol = 1e-300;
  const OdeTrajectory tr = integrate(q0, op, opt);
  REQUIRE(tr.states.size() == tr.times.size());
  double worst = 0.0;
  for (std::size_t k = 0; k < tr.times.size(); ++k) {
    const double exact = qstar + (2.0 - qstar) * std::exp(-0.5 * tr.times[k]);
    worst = std::max(worst, std::abs(tr.states[k](0) - exact));
  }
  CHECK(worst <= 1e-6);
  CHECK(tr.times.back() == doctest::Approx(20.0));
}

TEST_CASE("trajectory from an equilibrium stays put") {
  const Operator op = steep_operator(3, 2, 5);
  const auto eq = newton_solve(Vec::Constant(6, op.box().hi - 0.5), op, 1e-13);
  REQUIRE(eq.has_value());
  OdeOptions opt;
  opt.t_max = 10.0;
  opt.tol = 1e-300;
  const OdeTrajectory tr = integrate(*eq, op, opt);
  double drift = 0.0;
  for (const Vec& q : tr.states) drift = std::max(drift, (q - *eq).lpNorm<Eigen::Infinity>());
  CHECK(drift <= 1e-10);
}

TEST_CASE("ordered initial pairs stay ordered and inside the box") {
  Rng rng(14);
  for (Mode mode : {Mode::future_distorted, Mode::total_distorted}) {
    const Operator op = steep_operator(3, 3, 2, mode);
    const Box box = op.box();
    for (int trial = 0; trial < 5; ++trial) {
      const Vec lo = random_in(box, 9, rng);
      Vec hi = lo;
      std::uniform_real_distribution<double> U(0.0, 1.0);
      for (Eigen::Index k = 0; k < 9; ++k) hi(k) = std::min(box.hi, hi(k) + U(rng));
      OdeOptions opt;
      opt.t_max = 15.0;
      opt.tol = 1e-300;
      const OdeTrajectory a = integrate(lo, op, opt);
      const OdeTrajectory b = integrate(hi, op, opt);
      REQUIRE(a.states.size() == b.states.size());
      double worst = 0.0;
      for (std::size_t k = 0; k < a.states.size(); ++k)
        worst = std::max(worst, (a.states[k] - b.states[k]).maxCoeff());
      CHECK(worst <= 1e-9);
      CHECK(a.max_box_violation <= 1e-9);
      CHECK(b.max_box_violation <= 1e-9);
    }
  }
}

TEST_CASE("integrate rejects a start outside the box") {
  const Operator op = steep_operator(2, 2, 1);
  CHECK_THROWS_AS(integrate(Vec::Constant(4, 0.0), op), std::invalid_argument);
}

TEST_CASE("Perron root lies between the row-sum bounds") {
  Rng rng(21);
  const Operator op = steep_operator(4, 3, 9);
  for (int trial = 0; trial < 50; ++trial) {
    const JacobianMatrix J = op.jacobian(random_in(op.box(), 12, rng));
    const PerronResult pr = perron_root(J.entries);
    CHECK(pr.value >= J.gamma_min - 1e-8);
    CHECK(pr.value <= J.gamma_max + 1e-8);
    Eigen::EigenSolver<Mat> es(J.entries, false);
    for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) CHECK(pr.value >= std::abs(es.eigenvalues()(k)) - 1e-6);
  }
}

TEST_CASE("Perron root of small matrices") {
  Mat A(2, 2);
  A << 1.0, 2.0, 3.0, 4.0;
  CHECK(perron_root(A).value == doctest::Approx((5.0 + std::sqrt(33.0)) / 2.0).epsilon(1e-9));
  // Reducible: power iteration has to fall back.
  Mat B(2, 2);
  B << 0.5, 0.0, 0.0, 0.25;
  CHECK(perron_root(B).value == doctest::Approx(0.5).epsilon(1e-9));
  Mat P(2, 2);
  P << 0.0, 1.0, 1.0, 0.0;
  CHECK(perron_root(P).value == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("scalar bistable map: census, stability and regions") {
  const Operator op = scalar_bistable(0.01);
  const Census census = find_equilibria(op);
  REQUIRE(census.equilibria.size() == 3);
  std::vector<double> qs;
  for (const auto& e : census.equilibria) qs.push_back(e.q.values(0));
  std::sort(qs.begin(), qs.end());
  CHECK(qs[1] == doctest::Approx(3.5).epsilon(1e-9));
  CHECK(qs[0] < 2.01);
  CHECK(qs[2] > 4.99);
  for (const auto& e : census.equilibria) {
    CHECK(e.residual <= 1e-8);
    const double x = e.q.values(0);
    CHECK(e.dominant == doctest::Approx(e.jacobian.entries(0, 0)));
    if (std::abs(x - 3.5) < 1e-6)
      CHECK(e.stability == Stability::unstable);
    else
      CHECK(e.stability == Stability::stable);
  }

  Census labelled = census;
  const RegionPoints pts = find_g_and_b1(op.curve(), MdpConstants::of(op.mdp()), 0.01,
                                         critical_points(op.curve(), 0.6, 0.01, op.mdp().K()));
  const RegionReport rep = region_report(labelled, pts, op);
  CHECK(rep.all_passed());
  CHECK(rep.upper_count == 1);
  CHECK(rep.lower_count == 1);
  CHECK(rep.unstable_count == 1);
  for (const auto& e : labelled.equilibria) {
    const double x = e.q.values(0);
    if (x > 4.0) CHECK(e.region == Region::upper_stable);
    if (x < 3.0) CHECK(e.region == Region::lower_stable);
    if (std::abs(x - 3.5) < 1e-6) CHECK(e.region == Region::unstable_region);
  }

  const OrderStructure order = order_structure(labelled.equilibria);
  REQUIRE(order.greatest.has_value());
  REQUIRE(order.least.has_value());
  CHECK(labelled.equilibria[*order.greatest].q.values(0) == doctest::Approx(qs[2]));
  CHECK(labelled.equilibria[*order.least].q.values(0) == doctest::Approx(qs[0]));
  CHECK(order.third_predicted);
  CHECK(order.third_located);
  CHECK(order.third_status == "located");
}

TEST_CASE("classify rejects points that are not equilibria") {
  const Operator op = scalar_bistable(0.01);
  Vec q(1);
  q << 3.0;
  CHECK_THROWS_AS(classify(q, op), std::invalid_argument);
}

TEST_CASE("stability agrees with conclusive row-sum bounds") {
  const Operator op = steep_operator(4, 3, 6);
  const Census census = find_equilibria(op);
  REQUIRE(!census.equilibria.empty());
  for (const auto& e : census.equilibria) {
    if (e.jacobian.gamma_max < 1.0) CHECK(e.stability == Stability::stable);
    if (e.jacobian.gamma_min > 1.0) CHECK(e.stability == Stability::unstable);
    CHECK((op.field(e.q.values)).lpNorm<Eigen::Infinity>() <= 1e-8);
  }
  const OrderStructure order = order_structure(census.equilibria);
  REQUIRE(order.greatest.has_value());
  REQUIRE(order.least.has_value());
  const Vec& top = census.equilibria[*order.greatest].q.values;
  const Vec& bottom = census.equilibria[*order.least].q.values;
  for (const auto& e : census.equilibria) {
    CHECK(((top - e.q.values).array() >= -1e-9).all());
    CHECK(((e.q.values - bottom).array() >= -1e-9).all());
  }
}

TEST_CASE("gentle curve has a single stable equilibrium") {
  auto m = std::make_shared<const Mdp>(generate_random_mdp(4, 3, 2.0, 5.0, 0.2, 13));
  const Operator op(m, Mode::future_distorted, SCurve::logistic(6.0, 1.0, 4.0), NoiseModel(0.01), 0.05,
                    Backend::quadrature(16));
  Census census = find_equilibria(op);
  REQUIRE(census.equilibria.size() == 1);
  CHECK(census.equilibria[0].stability == Stability::stable);
  const RegionPoints pts = critical_points(op.curve(), 0.2, 0.01, m->K());
  const RegionReport rep = region_report(census, pts, op);
  CHECK(rep.all_passed());
  CHECK(census.equilibria[0].region == Region::upper_stable);
  CHECK(census.label == "census");
}

TEST_CASE("order structure of a single equilibrium") {
  Equilibrium e;
  e.q.values = Vec::Constant(3, 1.0);
  std::vector<Equilibrium> one = {e};
  const OrderStructure order = order_structure(one);
  CHECK(order.maximal == std::vector<int>{0});
  CHECK(order.minimal == std::vector<int>{0});
  CHECK(order.greatest == 0);
  CHECK(order.least == 0);
  CHECK_FALSE(order.third_predicted);
  mark_extremes(one);
  CHECK(one[0].is_maximal);
  CHECK(one[0].is_minimal);
}

TEST_CASE("unordered pair has no greatest element") {
  Equilibrium a, b;
  a.q.values = Vec(2);
  a.q.values << 1.0, 2.0;
  b.q.values = Vec(2);
  b.q.values << 2.0, 1.0;
  const OrderStructure order = order_structure({a, b});
  CHECK(order.compare[0][1] == 2);
  CHECK_FALSE(order.greatest.has_value());
  CHECK(order.maximal.size() == 2);
}

TEST_CASE("two stable extremes predict a third equilibrium") {
  Equilibrium lo, hi;
  lo.q.values = Vec::Constant(2, 1.0);
  hi.q.values = Vec::Constant(2, 3.0);
  lo.stability = hi.stability = Stability::stable;
  const OrderStructure order = order_structure({lo, hi});
  CHECK(order.third_predicted);
  CHECK_FALSE(order.third_located);
  CHECK(order.third_status == "predicted but not located");
}

TEST_CASE("classical mode has no equilibrium search") {
  auto m = std::make_shared<const Mdp>(generate_random_mdp(2, 2, 1.0, 2.0, 0.5, 1));
  const Operator op(m, Mode::classical, SCurve::logistic(1.0, 1.0, 0.0), NoiseModel(0.0), 0.05, Backend::exact());
  CHECK_THROWS(find_equilibria(op));
}
