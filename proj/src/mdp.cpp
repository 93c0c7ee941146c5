#include "prospectq/mdp.hpp"

#include "prospectq/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace prospectq {

bool Box::contains(const Vec& q, double tol) const {
  return (q.array() >= lo - tol).all() && (q.array() <= hi + tol).all();
}

double Box::violation(const Vec& q) const {
  double worst = 0.0;
  for (Eigen::Index n = 0; n < q.size(); ++n) {
    worst = std::max({worst, lo - q(n), q(n) - hi});
  }
  return worst;
}

Vec Box::clamp(const Vec& q) const { return q.cwiseMax(lo).cwiseMin(hi); }

namespace {

bool strongly_connected(const std::vector<std::vector<int>>& adj) {
  const int n = static_cast<int>(adj.size());
  if (n == 0) return false;
  auto reach_all = [n](const std::vector<std::vector<int>>& g) {
    std::vector<char> seen(n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
      int i = stack.back();
      stack.pop_back();
      for (int j : g[i]) {
        if (!seen[j]) {
          seen[j] = 1;
          ++count;
          stack.push_back(j);
        }
      }
    }
    return count == n;
  };
  std::vector<std::vector<int>> rev(n);
  for (int i = 0; i < n; ++i)
    for (int j : adj[i]) rev[j].push_back(i);
  return reach_all(adj) && reach_all(rev);
}

}  // namespace

bool union_graph_irreducible(const Mat& kernel, int actions) {
  const int s = static_cast<int>(kernel.cols());
  std::vector<std::vector<int>> adj(s);
  for (int i = 0; i < s; ++i)
    for (int j = 0; j < s; ++j)
      for (int v = 0; v < actions; ++v)
        if (kernel(i * actions + v, j) > 0.0) {
          adj[i].push_back(j);
          break;
        }
  return strongly_connected(adj);
}

bool policy_irreducible(const Mdp& m, const std::vector<int>& policy) {
  const int s = m.states();
  if (static_cast<int>(policy.size()) != s) throw std::invalid_argument("policy size mismatch");
  std::vector<std::vector<int>> adj(s);
  for (int i = 0; i < s; ++i)
    for (int j = 0; j < s; ++j)
      if (m.p(j, i, policy[i]) > 0.0) adj[i].push_back(j);
  return strongly_connected(adj);
}

Mdp::Mdp(Mat kernel, Vec rewards, int actions, double alpha,
         std::optional<std::uint64_t> seed, double row_tol)
    : s_(static_cast<int>(kernel.cols())),
      r_(actions),
      alpha_(alpha),
      p_(std::move(kernel)),
      k_(std::move(rewards)),
      seed_(seed) {
  if (!(alpha_ > 0.0 && alpha_ < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  if (s_ < 1 || r_ < 1) throw std::invalid_argument("need at least one state and one action");
  if (p_.rows() != static_cast<Eigen::Index>(s_) * r_)
    throw std::invalid_argument("kernel must have s*r rows");
  if (k_.size() != p_.rows()) throw std::invalid_argument("reward vector must have s*r entries");

  for (Eigen::Index row = 0; row < p_.rows(); ++row) {
    if (!p_.row(row).allFinite() || (p_.row(row).array() < 0.0).any())
      throw std::invalid_argument("kernel row " + std::to_string(row) +
                                  " has a negative or non-finite entry");
    if (std::abs(p_.row(row).sum() - 1.0) > row_tol)
      throw std::invalid_argument("kernel row " + std::to_string(row) + " sums to " +
                                  std::to_string(p_.row(row).sum()));
  }
  if (!k_.allFinite() || (k_.array() < 0.0).any())
    throw std::invalid_argument("rewards must be finite and nonnegative");

  k_min_ = k_.minCoeff();
  k_max_ = k_.maxCoeff();
  // A single pair necessarily has a constant reward; anything larger must not.
  if (pairs() > 1 && !(k_min_ < k_max_)) throw std::invalid_argument("rewards must not be constant");
  K_ = k_max_ / (1.0 - alpha_);

  if (!union_graph_irreducible(p_, r_)) throw std::invalid_argument("chain is reducible");

  cdf_.resize(p_.rows(), s_);
  for (Eigen::Index row = 0; row < p_.rows(); ++row) {
    double acc = 0.0;
    for (int j = 0; j < s_; ++j) {
      acc += p_(row, j);
      cdf_(row, j) = acc;
    }
  }
}

int Mdp::step(int i, int v, Rng& rng) const {
  if (i < 0 || i >= s_ || v < 0 || v >= r_) throw std::out_of_range("state/action index");
  const int row = index(i, v);
  const double x = uniform01(rng) * cdf_(row, s_ - 1);
  for (int j = 0; j < s_ - 1; ++j)
    if (x < cdf_(row, j)) return j;
  // Skip trailing zero-probability states when rounding lands at the top.
  for (int j = s_ - 1; j > 0; --j)
    if (p_(row, j) > 0.0) return j;
  return 0;
}

int step_chain(const Mdp& m, int i, int v, Rng& rng) { return m.step(i, v, rng); }

Mdp generate_random_mdp(int s, int r, double k_min, double k_max, double alpha,
                        std::uint64_t seed) {
  if (s < 1 || r < 1) throw std::invalid_argument("s and r must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  if (!(k_min >= 0.0 && k_min < k_max)) throw std::invalid_argument("need 0 <= k_min < k_max");
  const long long rows = static_cast<long long>(s) * r;
  if (rows > std::numeric_limits<int>::max() / std::max(1, s))
    throw std::invalid_argument("s*r overflows the index type");

  constexpr double floor = 1e-6;
  Rng rng(seed);
  std::exponential_distribution<double> expo(1.0);
  Mat p(rows, s);
  for (long long row = 0; row < rows; ++row) {
    for (int j = 0; j < s; ++j) p(row, j) = expo(rng);
    p.row(row) /= p.row(row).sum();
    p.row(row) = p.row(row).cwiseMax(floor);
    p.row(row) /= p.row(row).sum();
  }

  Vec k(rows);
  std::uniform_real_distribution<double> reward(k_min, k_max);
  for (long long n = 0; n < rows; ++n) k(n) = reward(rng);
  if (rows == 1) {
    k(0) = k_max;
  } else {
    std::uniform_int_distribution<long long> pick(0, rows - 1);
    const long long lo = pick(rng);
    long long hi = pick(rng);
    while (hi == lo) hi = pick(rng);
    k(lo) = k_min;
    k(hi) = k_max;
  }
  return Mdp(std::move(p), std::move(k), r, alpha, seed, 1e-12);
}

Mdp build_explicit_mdp(const std::vector<std::vector<std::vector<double>>>& p,
                       const std::vector<std::vector<double>>& k, double alpha) {
  const int r = static_cast<int>(p.size());
  if (r == 0) throw std::invalid_argument("kernel needs at least one action");
  const int s = static_cast<int>(p[0].size());
  if (static_cast<int>(k.size()) != s) throw std::invalid_argument("reward table needs s rows");
  Mat kernel(static_cast<Eigen::Index>(s) * r, s);
  Vec rewards(static_cast<Eigen::Index>(s) * r);
  for (int v = 0; v < r; ++v) {
    if (static_cast<int>(p[v].size()) != s) throw std::invalid_argument("ragged kernel");
    for (int i = 0; i < s; ++i) {
      if (static_cast<int>(p[v][i].size()) != s) throw std::invalid_argument("ragged kernel");
      for (int j = 0; j < s; ++j) kernel(i * r + v, j) = p[v][i][j];
    }
  }
  for (int i = 0; i < s; ++i) {
    if (static_cast<int>(k[i].size()) != r) throw std::invalid_argument("reward table needs r columns");
    for (int v = 0; v < r; ++v) rewards(i * r + v) = k[i][v];
  }
  return Mdp(std::move(kernel), std::move(rewards), r, alpha);
}

namespace {

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

void save_instance(const Mdp& m, std::ostream& out) {
  const int s = m.states();
  const int r = m.actions();
  out << "{\n  \"s\": " << s << ",\n  \"r\": " << r << ",\n  \"alpha\": " << fmt17(m.alpha())
      << ",\n  \"k\": [";
  for (int n = 0; n < m.pairs(); ++n) out << (n ? ", " : "") << fmt17(m.rewards()(n));
  out << "],\n  \"p\": [";
  for (int v = 0; v < r; ++v) {
    out << (v ? ",\n    [" : "\n    [");
    for (int i = 0; i < s; ++i) {
      out << (i ? ",\n     [" : "\n     [");
      for (int j = 0; j < s; ++j) out << (j ? ", " : "") << fmt17(m.p(j, i, v));
      out << "]";
    }
    out << "]";
  }
  out << "\n  ],\n  \"seed\": ";
  if (m.seed())
    out << *m.seed();
  else
    out << "null";
  out << "\n}\n";
}

void save_instance(const Mdp& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  save_instance(m, out);
}

Mdp load_instance(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("instance file: ") + e.what());
  }
  for (const char* key : {"s", "r", "alpha", "k", "p"})
    if (!j.contains(key)) throw std::invalid_argument(std::string("instance file: missing ") + key);
  const int s = j.at("s").get<int>();
  const int r = j.at("r").get<int>();
  const auto& kj = j.at("k");
  const auto& pj = j.at("p");
  if (static_cast<int>(kj.size()) != s * r) throw std::invalid_argument("instance file: k needs s*r entries");
  if (static_cast<int>(pj.size()) != r) throw std::invalid_argument("instance file: p needs r matrices");
  Mat kernel(static_cast<Eigen::Index>(s) * r, s);
  Vec rewards(static_cast<Eigen::Index>(s) * r);
  for (int n = 0; n < s * r; ++n) rewards(n) = kj.at(n).get<double>();
  for (int v = 0; v < r; ++v) {
    if (static_cast<int>(pj.at(v).size()) != s) throw std::invalid_argument("instance file: ragged p");
    for (int i = 0; i < s; ++i) {
      if (static_cast<int>(pj.at(v).at(i).size()) != s) throw std::invalid_argument("instance file: ragged p");
      for (int jj = 0; jj < s; ++jj) kernel(i * r + v, jj) = pj.at(v).at(i).at(jj).get<double>();
    }
  }
  std::optional<std::uint64_t> seed;
  if (j.contains("seed") && !j.at("seed").is_null()) seed = j.at("seed").get<std::uint64_t>();
  return Mdp(std::move(kernel), std::move(rewards), r, j.at("alpha").get<double>(), seed,
             seed ? 1e-12 : 1e-9);
}

Mdp load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open instance file " + path);
  return load_instance(in);
}

}  // namespace prospectq
