#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "prospectq/mdp.hpp"

#include <cmath>
#include <sstream>

using namespace prospectq;

TEST_CASE("single state and action gives the row [1]") {
  const Mdp m = generate_random_mdp(1, 1, 0.0, 1.0, 0.5, 3);
  REQUIRE(m.pairs() == 1);
  CHECK(m.kernel()(0, 0) == 1.0);
}

TEST_CASE("K of the s=r=20 instance") {
  const Mdp m = generate_random_mdp(20, 20, 2.0, 5.0, 0.5, 1);
  CHECK(m.K() == 10.0);
  CHECK(m.k_min() == 2.0);
  CHECK(m.k_max() == 5.0);
  CHECK(m.K() >= m.k_max());
  CHECK(m.K() > m.k_min());
}

TEST_CASE("generated rows are stochastic and floored") {
  for (std::uint64_t seed : {0ull, 1ull, 99ull, 12345ull}) {
    const Mdp m = generate_random_mdp(7, 4, 1.0, 3.0, 0.9, seed);
    for (int row = 0; row < m.pairs(); ++row) {
      CHECK(std::abs(m.kernel().row(row).sum() - 1.0) <= 1e-12);
      // Flooring at 1e-6 before the final renormalization leaves every entry
      // at least 1e-6 / (1 + s 1e-6).
      CHECK(m.kernel().row(row).minCoeff() >= 1e-6 / (1.0 + 7e-6));
    }
  }
}

TEST_CASE("generation is deterministic in the seed") {
  const Mdp a = generate_random_mdp(5, 3, 1.0, 5.0, 0.5, 42);
  const Mdp b = generate_random_mdp(5, 3, 1.0, 5.0, 0.5, 42);
  const Mdp c = generate_random_mdp(5, 3, 1.0, 5.0, 0.5, 43);
  CHECK(a.kernel() == b.kernel());
  CHECK(a.rewards() == b.rewards());
  CHECK(a.kernel() != c.kernel());
}

TEST_CASE("generation rejects bad parameters") {
  CHECK_THROWS_AS(generate_random_mdp(3, 2, 1.0, 2.0, 1.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(generate_random_mdp(3, 2, 1.0, 2.0, 0.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(generate_random_mdp(3, 2, 2.0, 2.0, 0.5, 0), std::invalid_argument);
  CHECK_THROWS_AS(generate_random_mdp(3, 2, 3.0, 2.0, 0.5, 0), std::invalid_argument);
  CHECK_THROWS_AS(generate_random_mdp(0, 2, 1.0, 2.0, 0.5, 0), std::invalid_argument);
  CHECK_THROWS_AS(generate_random_mdp(100000, 100000, 1.0, 2.0, 0.5, 0), std::invalid_argument);
}

TEST_CASE("explicit instance with duplicated actions is accepted") {
  const std::vector<std::vector<double>> rows = {
      {0.4, 0.5, 0.05, 0.05}, {0.5, 0.4, 0.05, 0.05}, {0.05, 0.05, 0.4, 0.5}, {0.05, 0.05, 0.5, 0.4}};
  const Mdp m = build_explicit_mdp({rows, rows}, {{1.99, 2.0}, {2.0, 2.0}, {2.01, 2.0}, {2.0, 2.0}}, 0.8);
  CHECK(m.states() == 4);
  CHECK(m.actions() == 2);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) CHECK(m.p(j, i, 0) == m.p(j, i, 1));
}

TEST_CASE("explicit instance validation") {
  SUBCASE("row summing to 1.1 is rejected with its index") {
    try {
      build_explicit_mdp({{{1.0, 0.0}, {0.5, 0.6}}}, {{1.0}, {2.0}}, 0.5);
      FAIL("expected rejection");
    } catch (const std::invalid_argument& e) {
      CHECK(std::string(e.what()).find("1") != std::string::npos);
    }
  }
  SUBCASE("2-cycle is irreducible") {
    CHECK_NOTHROW(build_explicit_mdp({{{0.0, 1.0}, {1.0, 0.0}}, {{0.0, 1.0}, {1.0, 0.0}}},
                                     {{1.0, 2.0}, {2.0, 1.0}}, 0.5));
  }
  SUBCASE("absorbing state is reducible") {
    CHECK_THROWS_AS(build_explicit_mdp({{{1.0, 0.0}, {0.5, 0.5}}}, {{1.0}, {2.0}}, 0.5), std::invalid_argument);
  }
  SUBCASE("negative entries and rewards") {
    CHECK_THROWS_AS(build_explicit_mdp({{{1.2, -0.2}, {0.5, 0.5}}}, {{1.0}, {2.0}}, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(build_explicit_mdp({{{0.5, 0.5}, {0.5, 0.5}}}, {{-1.0}, {2.0}}, 0.5), std::invalid_argument);
  }
  SUBCASE("constant rewards on several pairs") {
    CHECK_THROWS_AS(build_explicit_mdp({{{0.5, 0.5}, {0.5, 0.5}}}, {{2.0}, {2.0}}, 0.5), std::invalid_argument);
  }
}

TEST_CASE("steps from a deterministic row") {
  const Mdp m = build_explicit_mdp({{{0.0, 0.0, 1.0}, {1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}}}, {{1.0}, {2.0}, {3.0}}, 0.5);
  Rng rng(5);
  for (int n = 0; n < 100; ++n) CHECK(step_chain(m, 0, 0, rng) == 2);
}

TEST_CASE("uniform row frequencies stay within the binomial 3-sigma band") {
  const int s = 5;
  std::vector<std::vector<double>> rows(s, std::vector<double>(s, 1.0 / s));
  std::vector<std::vector<double>> k(s, std::vector<double>{1.0});
  k[0][0] = 0.0;
  const Mdp m = build_explicit_mdp({rows}, k, 0.5);
  Rng rng(11);
  const int N = 100000;
  std::vector<int> counts(s, 0);
  for (int n = 0; n < N; ++n) ++counts[m.step(2, 0, rng)];
  const double p = 1.0 / s;
  const double sigma = std::sqrt(N * p * (1 - p));
  for (int j = 0; j < s; ++j) CHECK(std::abs(counts[j] - N * p) <= 3.0 * sigma);
}

TEST_CASE("trajectories repeat for a fixed seed") {
  const Mdp m = generate_random_mdp(6, 2, 1.0, 2.0, 0.5, 8);
  Rng a(77), b(77);
  int x = 0, y = 0;
  for (int n = 0; n < 1000; ++n) {
    x = m.step(x, n % 2, a);
    y = m.step(y, n % 2, b);
    REQUIRE(x == y);
  }
}

TEST_CASE("generated instances are irreducible under every sampled policy") {
  Rng rng(3);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Mdp m = generate_random_mdp(6, 3, 0.0, 1.0, 0.7, seed);
    CHECK(union_graph_irreducible(m.kernel(), m.actions()));
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<int> policy(m.states());
      for (auto& v : policy) v = std::uniform_int_distribution<int>(0, m.actions() - 1)(rng);
      CHECK(policy_irreducible(m, policy));
    }
  }
}

TEST_CASE("instance files round-trip bit-exactly") {
  const Mdp m = generate_random_mdp(4, 3, 0.3, 7.1, 0.45, 2024);
  std::stringstream io;
  save_instance(m, io);
  const Mdp back = load_instance(io);
  CHECK(back.kernel() == m.kernel());
  CHECK(back.rewards() == m.rewards());
  CHECK(back.alpha() == m.alpha());
  CHECK(back.K() == m.K());
  CHECK(back.seed() == m.seed());
}

TEST_CASE("box helpers") {
  const Box box{1.0, 2.0};
  Vec q(3);
  q << 0.5, 1.5, 2.25;
  CHECK(box.violation(q) == doctest::Approx(0.5));
  CHECK_FALSE(box.contains(q));
  CHECK(box.contains(box.clamp(q)));
  QTable t{box.clamp(q), box};
  CHECK(t.in_box());
}
