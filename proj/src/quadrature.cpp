#include "prospectq/quadrature.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace prospectq {

QuadratureRule gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("quadrature order must be >= 1");
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int k = 0; k < (n + 1) / 2; ++k) {
    // Tricomi's initial guess, then Newton on P_n.
    double x = std::cos(std::numbers::pi * (k + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = x;
      for (int m = 2; m <= n; ++m) {
        const double p2 = ((2.0 * m - 1.0) * x * p1 - (m - 1.0) * p0) / m;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // Recompute the derivative at the converged root for the weight.
    double p0 = 1.0;
    double p1 = x;
    for (int m = 2; m <= n; ++m) {
      const double p2 = ((2.0 * m - 1.0) * x * p1 - (m - 1.0) * p0) / m;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[k] = -x;
    rule.nodes[n - 1 - k] = x;
    rule.weights[k] = w;
    rule.weights[n - 1 - k] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

QuadratureRule gauss_legendre(int n, double lo, double hi) {
  QuadratureRule rule = gauss_legendre(n);
  const double half = 0.5 * (hi - lo);
  const double mid = 0.5 * (hi + lo);
  for (int k = 0; k < n; ++k) {
    rule.nodes[k] = mid + half * rule.nodes[k];
    rule.weights[k] *= half;
  }
  return rule;
}

QuadratureRule gauss_rule_for_weight(int n, double lo, double hi,
                                     const std::function<double(double)>& w, int resolution) {
  if (n < 1) throw std::invalid_argument("quadrature order must be >= 1");
  if (resolution < 2 * n) resolution = 2 * n;
  // Work on t in [-1, 1] to keep the recurrence well scaled.
  const QuadratureRule fine = gauss_legendre(resolution);
  const double half = 0.5 * (hi - lo);
  const double mid = 0.5 * (hi + lo);
  const int M = resolution;
  std::vector<double> t(M), mass(M);
  for (int m = 0; m < M; ++m) {
    t[m] = fine.nodes[m];
    mass[m] = fine.weights[m] * w(mid + half * t[m]) * half;
  }

  // Stieltjes procedure on the discrete measure.
  std::vector<double> a(n, 0.0), b(n, 0.0);
  std::vector<double> prev(M, 0.0), cur(M, 1.0), next(M);
  double norm_prev = 1.0;
  double norm_cur = 0.0;
  for (int m = 0; m < M; ++m) norm_cur += mass[m];
  const double total = norm_cur;
  for (int k = 0; k < n; ++k) {
    double num = 0.0;
    for (int m = 0; m < M; ++m) num += mass[m] * t[m] * cur[m] * cur[m];
    a[k] = num / norm_cur;
    if (k > 0) b[k] = norm_cur / norm_prev;
    if (k + 1 == n) break;
    double norm_next = 0.0;
    for (int m = 0; m < M; ++m) {
      next[m] = (t[m] - a[k]) * cur[m] - (k > 0 ? b[k] * prev[m] : 0.0);
      norm_next += mass[m] * next[m] * next[m];
    }
    prev.swap(cur);
    cur.swap(next);
    norm_prev = norm_cur;
    norm_cur = norm_next;
  }

  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    jacobi(k, k) = a[k];
    if (k + 1 < n) {
      jacobi(k, k + 1) = std::sqrt(b[k + 1]);
      jacobi(k + 1, k) = jacobi(k, k + 1);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int k = 0; k < n; ++k) {
    const double v0 = eig.eigenvectors()(0, k);
    rule.nodes[k] = mid + half * eig.eigenvalues()(k);
    rule.weights[k] = total * v0 * v0;
  }
  return rule;
}

}  // namespace prospectq
