#pragma once

#include "prospectq/mdp.hpp"
#include "prospectq/quadrature.hpp"
#include "prospectq/valuation.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace prospectq {

enum class Mode { classical, future_distorted, total_distorted };

std::string to_string(Mode mode);
Mode mode_from_string(const std::string& name);

/// How the expectation over the perturbation noise is evaluated.
///
/// quadrature: for each next state the expectation over that state's r noise
/// coordinates is reduced exactly to one-dimensional integrals through the
/// law of the perturbed argmax; every integral is split at the points where
/// the integrand's support kinks and each piece gets an `order`-point
/// Gauss-Legendre rule.  monte_carlo: `samples` noise vectors per next state
/// from a substream of `seed`, identical for every call (common random
/// numbers).  exact_c0: the noise-free model, integrand evaluated at y = 0.
struct Backend {
  enum class Kind { exact_c0, quadrature, monte_carlo };

  Kind kind = Kind::quadrature;
  int order = 16;
  std::int64_t samples = 100000;
  std::uint64_t seed = 0;

  static Backend exact() { return {Kind::exact_c0, 0, 0, 0}; }
  static Backend quadrature(int order = 16) { return {Kind::quadrature, order, 0, 0}; }
  static Backend monte_carlo(std::int64_t samples, std::uint64_t seed) {
    return {Kind::monte_carlo, 0, samples, seed};
  }
};

std::string to_string(const Backend& b);

/// quadrature(16); exact for c = 0.
Backend default_backend(int r, double c);

struct JacobianMatrix {
  Mat entries;
  Vec row_sums;
  double gamma_max = 0.0;
  double gamma_min = 0.0;
  Backend backend;
};

/// The deterministic map F of the limiting dynamics and its vector field
/// h = F - q, for one of the three schemes:
///
///   classical:        F(q)_{iv} = k(i,v) + alpha sum_j p(j|iv) max_w q(j,w)
///   future_distorted: F(q)_{iv} = k(i,v) + alpha sum_j p(j|iv) G_j(q)
///   total_distorted:  F(q)_{iv} = sum_j p(j|iv) G_j^{iv}(q)
///
/// with G the epsilon-greedy expectation of u over the perturbed action
/// values of state j; in the total-return scheme u is applied to
/// k(i,v) + alpha (q(j,w) - y_w).
class Operator {
 public:
  Operator(std::shared_ptr<const Mdp> mdp, Mode mode, SCurve curve, NoiseModel noise,
           double epsilon, Backend backend);

  Vec apply(const Vec& q) const;
  Vec field(const Vec& q) const { return apply(q) - q; }
  /// Jacobian of F; distorted modes only.
  JacobianMatrix jacobian(const Vec& q) const;

  const Mdp& mdp() const { return *mdp_; }
  std::shared_ptr<const Mdp> mdp_ptr() const { return mdp_; }
  Mode mode() const { return mode_; }
  const SCurve& curve() const { return curve_; }
  const NoiseModel& noise() const { return noise_; }
  double epsilon() const { return epsilon_; }
  const Backend& backend() const { return backend_; }
  /// [k_min, K] for classical and future modes, [0, K] for the total mode.
  Box box() const;

  /// Same operator with a different expectation backend.
  Operator with_backend(Backend backend) const;

 private:
  struct BlockResult;
  struct BlockNodes;
  void expect_block(const double* q, double shift, double scale, bool want_grad,
                    int state, BlockResult& out) const;
  // Noise nodes of one action block, independent of shift and scale.  Not
  // used by the monte_carlo backend.
  void block_nodes(const double* q, BlockNodes& out) const;
  void eval_nodes(const BlockNodes& nodes, double shift, double scale, bool want_grad,
                  BlockResult& out) const;

  std::shared_ptr<const Mdp> mdp_;
  Mode mode_;
  SCurve curve_;
  NoiseModel noise_;
  double epsilon_;
  Backend backend_;
  QuadratureRule smooth_rule_;
  QuadratureRule piece_rule_;
  // Pre-drawn monte_carlo noise, [state][sample][action], when it fits in memory.
  std::shared_ptr<const std::vector<double>> mc_noise_;
};

Vec classical_F(const Vec& q, const Mdp& m);

/// Iterates the classical operator until successive iterates differ by less
/// than tol in sup norm.
Vec value_iteration(const Mdp& m, Vec q0, double tol = 1e-12, int max_iters = 100000);

Vec prospect_F(const Vec& q, const Operator& op);
Vec alt_F(const Vec& q, const Operator& op);
Vec vector_field(const Vec& q, const Operator& op);
JacobianMatrix jacobian(const Vec& q, const Operator& op);

}  // namespace prospectq
