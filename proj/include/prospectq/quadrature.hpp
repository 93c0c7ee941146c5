#pragma once

#include <functional>
#include <vector>

namespace prospectq {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
};

/// n-point Gauss-Legendre rule on [-1, 1].
QuadratureRule gauss_legendre(int n);

/// gauss_legendre(n) mapped affinely onto [lo, hi].
QuadratureRule gauss_legendre(int n, double lo, double hi);

/// n-point Gaussian rule for the positive weight function w on [lo, hi]:
/// exact for polynomials of degree <= 2n - 1 against w (up to the accuracy of
/// the discretized inner product, which uses `resolution` Gauss-Legendre
/// points).  Built by the Stieltjes procedure and the Golub-Welsch eigenproblem.
QuadratureRule gauss_rule_for_weight(int n, double lo, double hi,
                                     const std::function<double(double)>& w,
                                     int resolution = 400);

}  // namespace prospectq
