#include "prospectq/valuation.hpp"

#include "prospectq/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace prospectq {

std::string to_string(CurveForm form) {
  switch (form) {
    case CurveForm::logistic: return "logistic";
    case CurveForm::piecewise_steep: return "piecewise_steep";
    case CurveForm::tabulated: return "tabulated";
  }
  return "unknown";
}

SCurve SCurve::logistic(double L, double gamma, double x0) {
  if (!std::isfinite(L) || !std::isfinite(gamma) || !std::isfinite(x0))
    throw std::invalid_argument("logistic parameters must be finite");
  if (!(L > 0.0) || !(gamma > 0.0)) throw std::invalid_argument("logistic needs L > 0 and gamma > 0");
  SCurve u;
  u.form_ = CurveForm::logistic;
  u.L_ = L;
  u.gamma_ = gamma;
  u.x0_ = x0;
  return u;
}

SCurve SCurve::piecewise_steep(double L, double x0, double alpha, double tail) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  if (!(tail > 0.0 && tail < L)) throw std::invalid_argument("tail must lie in (0, L)");
  // u(a) = t solves t (L - t) = L / (alpha gamma).
  const double t = 0.5 * tail;
  SCurve u = logistic(L, L / (alpha * (L * t - t * t)), x0);
  u.form_ = CurveForm::piecewise_steep;
  return u;
}

SCurve SCurve::tabulated(std::vector<double> xs, std::vector<double> us) {
  if (xs.size() != us.size() || xs.size() < 2) throw std::invalid_argument("table needs >= 2 (x, u) pairs");
  const std::size_t n = xs.size();
  for (std::size_t k = 0; k < n; ++k) {
    if (!std::isfinite(xs[k]) || !std::isfinite(us[k])) throw std::invalid_argument("table entries must be finite");
    if (k > 0 && !(xs[k] > xs[k - 1])) throw std::invalid_argument("table abscissae must increase");
    if (k > 0 && us[k] < us[k - 1]) throw std::invalid_argument("table values must be nondecreasing");
  }
  SCurve u;
  u.form_ = CurveForm::tabulated;
  u.xs_ = std::move(xs);
  u.us_ = std::move(us);
  u.L_ = u.us_.back();
  u.slopes_.assign(n, 0.0);
  // Fritsch-Butland interior slopes; zero end slopes keep u' continuous across
  // the constant extension.
  for (std::size_t k = 1; k + 1 < n; ++k) {
    const double h0 = u.xs_[k] - u.xs_[k - 1];
    const double h1 = u.xs_[k + 1] - u.xs_[k];
    const double d0 = (u.us_[k] - u.us_[k - 1]) / h0;
    const double d1 = (u.us_[k + 1] - u.us_[k]) / h1;
    if (d0 > 0.0 && d1 > 0.0) u.slopes_[k] = 3.0 * (h0 + h1) / ((2.0 * h1 + h0) / d0 + (h1 + 2.0 * h0) / d1);
  }
  return u;
}

double SCurve::value(double x) const {
  if (form_ != CurveForm::tabulated) {
    const double t = gamma_ * (x - x0_);
    const double e = std::exp(-std::abs(t));
    return t >= 0.0 ? L_ / (1.0 + e) : L_ * e / (1.0 + e);
  }
  if (x <= xs_.front()) return us_.front();
  if (x >= xs_.back()) return us_.back();
  const auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
  const std::size_t k = static_cast<std::size_t>(it - xs_.begin()) - 1;
  const double h = xs_[k + 1] - xs_[k];
  const double s = (x - xs_[k]) / h;
  const double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
  const double h10 = s * (1 - s) * (1 - s);
  const double h01 = s * s * (3 - 2 * s);
  const double h11 = s * s * (s - 1);
  return h00 * us_[k] + h10 * h * slopes_[k] + h01 * us_[k + 1] + h11 * h * slopes_[k + 1];
}

double SCurve::derivative(double x) const {
  if (form_ != CurveForm::tabulated) {
    const double e = std::exp(-std::abs(gamma_ * (x - x0_)));
    return L_ * gamma_ * e / ((1.0 + e) * (1.0 + e));
  }
  if (x <= xs_.front() || x >= xs_.back()) return 0.0;
  const auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
  const std::size_t k = static_cast<std::size_t>(it - xs_.begin()) - 1;
  const double h = xs_[k + 1] - xs_[k];
  const double s = (x - xs_[k]) / h;
  const double d00 = 6 * s * s - 6 * s;
  const double d10 = 3 * s * s - 4 * s + 1;
  const double d01 = -6 * s * s + 6 * s;
  const double d11 = 3 * s * s - 2 * s;
  return (d00 * us_[k] + d01 * us_[k + 1]) / h + d10 * slopes_[k] + d11 * slopes_[k + 1];
}

double SCurve::ceiling() const { return form_ == CurveForm::tabulated ? us_.back() : L_; }

void SCurve::validate(const CurveDomain& domain, int grid) const {
  if (!(domain.hi > domain.lo)) throw std::invalid_argument("empty curve domain");
  double prev = value(domain.lo);
  for (int n = 0; n <= grid; ++n) {
    const double x = domain.lo + (domain.hi - domain.lo) * n / grid;
    const double ux = value(x);
    if (!std::isfinite(ux) || ux < 0.0 || ux > domain.cap)
      throw std::invalid_argument("valuation map leaves [0, " + std::to_string(domain.cap) +
                                  "] at x = " + std::to_string(x));
    if (ux < prev) throw std::invalid_argument("valuation map decreases near x = " + std::to_string(x));
    if (derivative(x) < 0.0) throw std::invalid_argument("negative slope near x = " + std::to_string(x));
    prev = ux;
  }
}

Checked u_eval(const SCurve& curve, const CurveDomain& domain, double x) {
  const double y = std::clamp(x, domain.lo, domain.hi);
  return {curve.value(y), y != x};
}

Checked u_deriv(const SCurve& curve, const CurveDomain& domain, double x) {
  const double y = std::clamp(x, domain.lo, domain.hi);
  return {curve.derivative(y), y != x};
}

NoiseModel::NoiseModel(double c) : c_(c) {
  if (!std::isfinite(c) || c < 0.0) throw std::invalid_argument("noise half-width must be finite and >= 0");
}

double NoiseModel::density(double y) const {
  if (degenerate()) throw std::logic_error("density of the noise-free model is not a function");
  if (y < -c_ || y > c_) return 0.0;
  return (1.0 + std::cos(std::numbers::pi * y / c_)) / (2.0 * c_);
}

double NoiseModel::cdf(double y) const {
  if (degenerate()) return y >= 0.0 ? 1.0 : 0.0;
  if (y <= -c_) return 0.0;
  if (y >= c_) return 1.0;
  const double t = y / c_;
  return 0.5 + 0.5 * t + std::sin(std::numbers::pi * t) / (2.0 * std::numbers::pi);
}

double NoiseModel::inverse_cdf(double p) const {
  if (degenerate()) return 0.0;
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("probability outside [0, 1]");
  // Work in t = y / c.  Newton from the linear-CDF guess t = 2p - 1, falling
  // back to bisection whenever a step leaves the bracket.
  auto Phi = [](double t) { return 0.5 + 0.5 * t + std::sin(std::numbers::pi * t) / (2.0 * std::numbers::pi); };
  double lo = -1.0;
  double hi = 1.0;
  double t = 2.0 * p - 1.0;
  for (int it = 0; it < 200; ++it) {
    const double f = Phi(t) - p;
    if (f == 0.0) break;
    if (f > 0.0)
      hi = t;
    else
      lo = t;
    const double slope = 0.5 * (1.0 + std::cos(std::numbers::pi * t));
    double next = slope > 0.0 ? t - f / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const double step = std::abs(next - t);
    t = next;
    if (step < 1e-14 || hi - lo < 1e-12) break;
  }
  return c_ * t;
}

double NoiseModel::sample(Rng& rng) const {
  if (degenerate()) return 0.0;
  return inverse_cdf(uniform01(rng));
}

double NoiseModel::variance() const {
  return c_ * c_ * (1.0 / 3.0 - 2.0 / (std::numbers::pi * std::numbers::pi));
}

QuadratureRule NoiseModel::nodes(int order) const {
  if (degenerate()) throw std::logic_error("no quadrature for the noise-free model");
  QuadratureRule rule = gauss_rule_for_weight(
      order, -1.0, 1.0, [](double t) { return 0.5 * (1.0 + std::cos(std::numbers::pi * t)); });
  for (auto& x : rule.nodes) x *= c_;
  return rule;
}

double noise_density(const NoiseModel& nm, double y) { return nm.density(y); }
double noise_sample(const NoiseModel& nm, Rng& rng) { return nm.sample(rng); }
QuadratureRule noise_nodes(const NoiseModel& nm, int order) { return nm.nodes(order); }

namespace {

template <class F>
double bisect(F f, double lo, double hi, int iters = 200) {
  double flo = f(lo);
  for (int it = 0; it < iters && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm > 0.0) == (flo > 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

RegionPoints critical_points(const SCurve& curve, double alpha, double c, double K) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  if (!(K > 0.0) || c < 0.0) throw std::invalid_argument("need K > 0 and c >= 0");
  const double threshold = 1.0 / alpha;
  const double top = K + c;
  RegionPoints pts;
  auto clampK = [K](double x) { return std::clamp(x, 0.0, K); };

  if (curve.logistic_family()) {
    const double L = curve.L();
    const double gamma = curve.gamma();
    pts.m1 = std::clamp(curve.x0(), 0.0, top);
    pts.max_slope = curve.derivative(pts.m1);
    if (!(L * gamma / 4.0 > threshold)) return pts;
    // u' = gamma u (L - u) / L, so u' = 1/alpha where u (L - u) = L / (alpha gamma).
    const double prod = L / (alpha * gamma);
    const double u_hi = 0.5 * L + std::sqrt(0.25 * L * L - prod);
    const double u_lo = prod / u_hi;
    const double a = curve.x0() + std::log(u_lo / u_hi) / gamma;
    const double b = 2.0 * curve.x0() - a;
    // The crossings must lie inside the domain for the steep set to be seen there.
    if (b <= 0.0 || a >= top) return pts;
    pts.steep_region_exists = true;
    pts.a = clampK(a);
    pts.b = clampK(b);
    pts.d = pts.a;
    pts.e = pts.b;
    return pts;
  }

  // Tabulated curves: scan a grid, then refine each sign change by bisection.
  constexpr int N = 20000;
  pts.grid_resolution = top / N;
  auto f = [&](double x) { return curve.derivative(x) - threshold; };
  std::vector<double> xs(N + 1), fs(N + 1);
  int arg = 0;
  for (int n = 0; n <= N; ++n) {
    xs[n] = top * n / N;
    fs[n] = f(xs[n]);
    if (fs[n] > fs[arg]) arg = n;
  }
  {
    double lo = xs[std::max(arg - 1, 0)];
    double hi = xs[std::min(arg + 1, N)];
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 100; ++it) {
      const double x1 = hi - phi * (hi - lo);
      const double x2 = lo + phi * (hi - lo);
      if (curve.derivative(x1) < curve.derivative(x2))
        lo = x1;
      else
        hi = x2;
    }
    pts.m1 = 0.5 * (lo + hi);
    pts.max_slope = curve.derivative(pts.m1);
  }
  int first_ge = -1, last_ge = -1, first_gt = -1, last_gt = -1;
  for (int n = 0; n <= N; ++n) {
    if (fs[n] >= 0.0) {
      if (first_ge < 0) first_ge = n;
      last_ge = n;
    }
    if (fs[n] > 0.0) {
      if (first_gt < 0) first_gt = n;
      last_gt = n;
    }
  }
  if (first_ge < 0) return pts;
  pts.steep_region_exists = true;
  for (int n = first_ge; n <= last_ge; ++n)
    if (fs[n] < 0.0) pts.reduced_precision = true;
  auto left_edge = [&](int n) { return n == 0 ? 0.0 : bisect(f, xs[n - 1], xs[n]); };
  auto right_edge = [&](int n) { return n == N ? top : bisect(f, xs[n], xs[n + 1]); };
  pts.a = clampK(left_edge(first_ge));
  pts.b = clampK(right_edge(last_ge));
  if (first_gt >= 0) {
    pts.d = clampK(left_edge(first_gt));
    pts.e = clampK(right_edge(last_gt));
  } else {
    pts.d = pts.a;
    pts.e = pts.b;
  }
  return pts;
}

double u1_eval(const SCurve& curve, double k_min, double alpha, double c, double x) {
  return k_min + alpha * curve.value(x - c);
}

double u2_eval(const SCurve& curve, double k_max, double alpha, double c, double x) {
  return k_max + alpha * curve.value(x + c);
}

Checked pessimistic_return(const SCurve& curve, const MdpConstants& mc, double c, double x) {
  const Checked u = u_eval(curve, {0.0, mc.K + c, mc.K}, x - c);
  return {mc.k_min + mc.alpha * u.value, u.clamped};
}

Checked optimistic_return(const SCurve& curve, const MdpConstants& mc, double c, double x) {
  const Checked u = u_eval(curve, {0.0, mc.K + c, mc.K}, x + c);
  return {mc.k_max + mc.alpha * u.value, u.clamped};
}

RegionPoints find_g_and_b1(const SCurve& curve, const MdpConstants& mc, double c, RegionPoints points) {
  if (!points.steep_region_exists) return points;
  const double a = *points.a;
  const double b = *points.b;
  points.a_alt = (a - mc.k_max) / mc.alpha;
  points.b_alt = (b - mc.k_min) / mc.alpha;

  auto gap = [&](double x) { return u1_eval(curve, mc.k_min, mc.alpha, c, x) - x; };
  const double lo = b + c;
  if (lo <= mc.K) {
    const double at_lo = gap(lo);
    if (at_lo == 0.0) {
      points.g = lo;
    } else if (at_lo > 0.0 && gap(mc.K) < 0.0) {
      points.g = bisect(gap, lo, mc.K);
    } else if (at_lo > 0.0) {
      points.g = mc.K;
    }
  }

  constexpr int N = 10000;
  const double start = a + c;
  if (start <= mc.K) {
    for (int n = 0; n <= N; ++n) {
      const double x = start + (mc.K - start) * n / N;
      if (gap(x) >= 0.0) {
        points.b1 = (n == 0) ? x : bisect(gap, start + (mc.K - start) * (n - 1) / N, x);
        if (gap(*points.b1) < 0.0) points.b1 = x;
        break;
      }
    }
  }
  return points;
}

}  // namespace prospectq
