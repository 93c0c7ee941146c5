#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace prospectq {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Rng = std::mt19937_64;

/// Closed interval [lo, hi] applied to every component of a Q-vector.
struct Box {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double x, double tol = 0.0) const { return x >= lo - tol && x <= hi + tol; }
  bool contains(const Vec& q, double tol = 0.0) const;
  /// Largest distance by which any component leaves the box (0 when inside).
  double violation(const Vec& q) const;
  Vec clamp(const Vec& q) const;
};

/// A point of R^{s*r}, flattened as index(i, v) = i * r + v, tagged with the
/// box it is expected to stay in.
struct QTable {
  Vec values;
  Box box;

  bool in_box(double tol = 1e-9) const { return box.contains(values, tol); }
};

/// Finite controlled Markov chain with bounded nonnegative rewards.
///
/// The kernel is stored as an (s*r) x s matrix whose row index(i, v) is the
/// distribution p(. | i, v).  Instances are immutable once built.
class Mdp {
 public:
  /// Validates and takes ownership of kernel and rewards.  Throws
  /// std::invalid_argument on non-stochastic rows (message names the row),
  /// negative or non-finite rewards, alpha outside (0, 1), constant rewards
  /// on more than one pair, or a reducible chain.
  Mdp(Mat kernel, Vec rewards, int actions, double alpha,
      std::optional<std::uint64_t> seed = std::nullopt, double row_tol = 1e-9);

  int states() const { return s_; }
  int actions() const { return r_; }
  int pairs() const { return s_ * r_; }
  int index(int i, int v) const { return i * r_ + v; }

  double alpha() const { return alpha_; }
  double k_min() const { return k_min_; }
  double k_max() const { return k_max_; }
  /// k_max / (1 - alpha).
  double K() const { return K_; }

  const Vec& rewards() const { return k_; }
  double reward(int i, int v) const { return k_(index(i, v)); }
  const Mat& kernel() const { return p_; }
  double p(int j, int i, int v) const { return p_(index(i, v), j); }
  std::optional<std::uint64_t> seed() const { return seed_; }

  /// [k_min, K], the invariant box of the future-distorted and classical schemes.
  Box box() const { return {k_min_, K_}; }
  /// [0, K], the invariant box of the total-return scheme.
  Box total_box() const { return {0.0, K_}; }

  /// Draws the successor of (i, v).
  int step(int i, int v, Rng& rng) const;

 private:
  int s_;
  int r_;
  double alpha_;
  Mat p_;
  Mat cdf_;
  Vec k_;
  double k_min_;
  double k_max_;
  double K_;
  std::optional<std::uint64_t> seed_;
};

/// Random instance: rows uniform on the simplex, floored at 1e-6 and
/// renormalized; rewards uniform in [k_min, k_max] with both extremes pinned
/// to one pair each.  Deterministic in seed.
Mdp generate_random_mdp(int s, int r, double k_min, double k_max, double alpha,
                        std::uint64_t seed);

/// p is indexed p[v][i][j]; k is indexed k[i][v].
Mdp build_explicit_mdp(const std::vector<std::vector<std::vector<double>>>& p,
                       const std::vector<std::vector<double>>& k, double alpha);

int step_chain(const Mdp& m, int i, int v, Rng& rng);

/// Strong connectivity of the graph with an edge i -> j whenever
/// p(j | i, v) > 0 for some action v.
bool union_graph_irreducible(const Mat& kernel, int actions);
/// Strong connectivity of the chain obtained by fixing action policy[i] at i.
bool policy_irreducible(const Mdp& m, const std::vector<int>& policy);

/// Instance file: JSON object with s, r, alpha, k (row-major, k[i*r+v]),
/// p (p[v][i][j]) and seed (null for hand-built instances).  Doubles are
/// written with 17 significant digits.
void save_instance(const Mdp& m, std::ostream& out);
void save_instance(const Mdp& m, const std::string& path);
Mdp load_instance(std::istream& in);
Mdp load_instance(const std::string& path);

}  // namespace prospectq
