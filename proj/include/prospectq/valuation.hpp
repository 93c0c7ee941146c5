#pragma once

#include "prospectq/mdp.hpp"
#include "prospectq/quadrature.hpp"

#include <optional>
#include <string>
#include <vector>

namespace prospectq {

enum class CurveForm { logistic, piecewise_steep, tabulated };

std::string to_string(CurveForm form);

/// Result of an evaluation that may have been clamped into the curve domain.
struct Checked {
  double value;
  bool clamped;
};

/// Interval on which a valuation map is required to be defined, and the cap
/// its values must respect.
struct CurveDomain {
  double lo = 0.0;
  double hi = 0.0;
  double cap = 0.0;
};

/// S-shaped valuation map u with analytic derivative.
///
/// The logistic family u(x) = L / (1 + exp(-gamma (x - x0))) is defined on all
/// of R.  The piecewise-steep form is the same logistic with gamma chosen so
/// that u(a) and L - u(b) both equal tail / 2 for a prescribed discount, i.e.
/// u is within tail of 0 below the steep region and of L above it.  The
/// tabulated form is a monotone C^1 cubic Hermite interpolant (Fritsch-Carlson
/// slopes), held constant outside the table.
class SCurve {
 public:
  static SCurve logistic(double L, double gamma, double x0);
  static SCurve piecewise_steep(double L, double x0, double alpha, double tail = 1e-3);
  static SCurve tabulated(std::vector<double> xs, std::vector<double> us);

  double operator()(double x) const { return value(x); }
  double value(double x) const;
  double derivative(double x) const;

  CurveForm form() const { return form_; }
  bool logistic_family() const { return form_ != CurveForm::tabulated; }
  double L() const { return L_; }
  double gamma() const { return gamma_; }
  double x0() const { return x0_; }
  /// Supremum of u over R.
  double ceiling() const;
  const std::vector<double>& table_x() const { return xs_; }
  const std::vector<double>& table_u() const { return us_; }

  /// Throws std::invalid_argument unless u is nondecreasing with values in
  /// [0, cap] on a dense grid of the domain.
  void validate(const CurveDomain& domain, int grid = 10000) const;

 private:
  SCurve() = default;

  CurveForm form_ = CurveForm::logistic;
  double L_ = 1.0;
  double gamma_ = 1.0;
  double x0_ = 0.0;
  std::vector<double> xs_;
  std::vector<double> us_;
  std::vector<double> slopes_;
};

/// u evaluated with x clamped into [domain.lo, domain.hi].
Checked u_eval(const SCurve& curve, const CurveDomain& domain, double x);
Checked u_deriv(const SCurve& curve, const CurveDomain& domain, double x);

/// Raised-cosine noise phi(y) = (1 + cos(pi y / c)) / (2c) on [-c, c].
/// c = 0 is the noise-free mode.
class NoiseModel {
 public:
  explicit NoiseModel(double c = 0.0);

  double half_width() const { return c_; }
  bool degenerate() const { return c_ == 0.0; }

  double density(double y) const;
  double cdf(double y) const;
  /// P(xi > y).
  double survival(double y) const { return 1.0 - cdf(y); }
  double inverse_cdf(double p) const;
  double sample(Rng& rng) const;
  double variance() const;

  /// Gaussian rule with respect to phi on [-c, c]; integrates p(y) phi(y) for
  /// polynomials of degree <= 2 * order - 1.  Throws on the degenerate model.
  QuadratureRule nodes(int order) const;

 private:
  double c_;
};

double noise_density(const NoiseModel& nm, double y);
double noise_sample(const NoiseModel& nm, Rng& rng);
QuadratureRule noise_nodes(const NoiseModel& nm, int order);

struct MdpConstants {
  double k_min;
  double k_max;
  double alpha;
  double K;

  static MdpConstants of(const Mdp& m) { return {m.k_min(), m.k_max(), m.alpha(), m.K()}; }
};

/// Abscissae where u' crosses 1 / alpha, and the quantities derived from them.
struct RegionPoints {
  bool steep_region_exists = false;
  /// u' < 1/alpha on [0, a) and on (b, K + c].
  std::optional<double> a;
  std::optional<double> b;
  /// u' > 1/alpha on (d, e).
  std::optional<double> d;
  std::optional<double> e;
  double m1 = 0.0;
  double max_slope = 0.0;
  /// Set when the steep set could only be located on a grid.
  bool reduced_precision = false;
  double grid_resolution = 0.0;

  /// Fixed point of x -> k_min + alpha u(x - c) on (b + c, K].
  std::optional<double> g;
  /// Smallest x >= a + c with k_min + alpha u(x - c) >= x.
  std::optional<double> b1;
  /// Region ends of the total-return scheme: (a - k_max)/alpha, (b - k_min)/alpha.
  std::optional<double> a_alt;
  std::optional<double> b_alt;
};

RegionPoints critical_points(const SCurve& curve, double alpha, double c, double K);

/// k_min + alpha u(x - c): lower bound of every component of F when all
/// components of q are at least x.  x - c is clamped into [0, K + c].
Checked pessimistic_return(const SCurve& curve, const MdpConstants& mc, double c, double x);
/// k_max + alpha u(x + c): upper bound of F when all components are at most x.
Checked optimistic_return(const SCurve& curve, const MdpConstants& mc, double c, double x);

/// Unclamped forms of the two maps above.
double u1_eval(const SCurve& curve, double k_min, double alpha, double c, double x);
double u2_eval(const SCurve& curve, double k_max, double alpha, double c, double x);

/// Adds g, b1 and the total-return region ends to points.
RegionPoints find_g_and_b1(const SCurve& curve, const MdpConstants& mc, double c,
                           RegionPoints points);

}  // namespace prospectq
