#pragma once

#include "prospectq/bellman.hpp"
#include "prospectq/mdp.hpp"
#include "prospectq/valuation.hpp"

#include <json.hpp>

#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace prospectq {

struct OdeOptions {
  double dt = 0.05;
  double t_max = 500.0;
  /// Stop once ||h(q)||_inf < tol.
  double tol = 1e-8;
  /// Abort when the state leaves the mode's box by more than this.
  double box_abort = 1e-6;
  /// Keep every n-th state (0 keeps only the endpoints).
  int record_every = 1;
};

struct OdeTrajectory {
  std::vector<double> times;
  std::vector<Vec> states;
  /// ||h||_inf at each recorded time.
  std::vector<double> residuals;
  double terminal_residual = 0.0;
  double dt = 0.0;
  bool converged = false;
  /// Largest box violation seen at any step.
  double max_box_violation = 0.0;
  std::int64_t steps = 0;

  const Vec& final_state() const { return states.back(); }
};

/// Called after every RK4 step with the current time and state.
using OdeObserver = std::function<void(double, const Vec&)>;

/// Classical fixed-step RK4 on dq/dt = F(q) - q.
OdeTrajectory integrate(const Vec& q0, const Operator& op, const OdeOptions& opt = {},
                        const OdeObserver& observer = {});

enum class Stability { stable, unstable, marginal };
enum class Region { upper_stable, lower_stable, unstable_region, mixed };

std::string to_string(Stability s);
std::string to_string(Region r);

struct Equilibrium {
  QTable q;
  double residual = 0.0;
  JacobianMatrix jacobian;
  /// Eigenvalues of J - I (empty when s*r exceeds the dense limit).
  std::vector<std::complex<double>> spectrum;
  double max_real = 0.0;
  /// Perron root of J.
  double dominant = 0.0;
  bool perron_from_power = true;
  Stability stability = Stability::marginal;
  Region region = Region::mixed;
  bool is_maximal = false;
  bool is_minimal = false;
  /// Seed description the point was first reached from.
  std::string origin;
};

struct PerronResult {
  double value = 0.0;
  bool converged = false;
  int sweeps = 0;
};

/// Dominant eigenvalue of a nonnegative matrix by power iteration, stopped
/// when the Collatz-Wielandt bounds agree to tol (relative).  Falls back to
/// the dense spectrum when the iteration stagnates or the iterate loses a
/// positive component.
PerronResult perron_root(const Mat& A, double tol = 1e-10, int max_sweeps = 10000);

/// Dense limit for the full spectrum.
inline constexpr int kDenseSpectrumLimit = 2000;

/// Jacobian, Perron root, spectrum and stability label at q.  Throws when the
/// residual exceeds residual_tol.  The region label is left as mixed.
Equilibrium classify(const Vec& q, const Operator& op, double residual_tol = 1e-8);

struct SearchOptions {
  int interior_seeds = 20;
  std::uint64_t seed = 0;
  double eta = 0.5;
  /// Residual an equilibrium must reach.
  double tol = 1e-8;
  std::int64_t max_iters = 100000;
  /// Residual at which damped iteration hands over to Newton.
  double newton_switch = 1e-6;
  /// Also follow the ODE from every seed.
  bool ode_seeds = true;
  OdeOptions ode{0.05, 200.0, 1e-6, 1e-6, 0};
  /// Newton from midpoints of ordered stable pairs.
  bool newton_hunt = true;
  double dedup = 1e-4;
  std::vector<Vec> extra_seeds;
};

struct SeedOutcome {
  std::string origin;
  bool converged = false;
  double residual = 0.0;
  std::int64_t iterations = 0;
};

/// Equilibria reached from a finite set of seeds.  Completeness is not
/// certified, hence the label.
struct Census {
  std::string label = "census";
  std::vector<Equilibrium> equilibria;
  std::vector<SeedOutcome> seeds;
  int failed_seeds = 0;
};

/// Damped fixed-point iteration q <- (1 - eta) q + eta F(q), finished by
/// Newton on h.  Returns nullopt when the budget runs out.
std::optional<Vec> solve_from(const Vec& q0, const Operator& op, const SearchOptions& opt,
                              SeedOutcome* outcome = nullptr);

/// Newton on h with backtracking, iterates clamped to the box.
std::optional<Vec> newton_solve(const Vec& q0, const Operator& op, double tol = 1e-8,
                                int max_iters = 60);

Census find_equilibria(const Operator& op, const SearchOptions& opt = {});

/// Region of q for the operator's mode: product sets above b + c, below
/// a - c, inside (d + c, e - c); in the total mode a and b are replaced by
/// (a - k_max)/alpha and (b - k_min)/alpha and there is no unstable region.
/// Without a steep set the whole box is one stable region (upper_stable).
Region region_of(const Vec& q, const RegionPoints& pts, const Operator& op);

struct OrderStructure {
  /// compare[i][j]: 1 if q_i >= q_j, -1 if q_i <= q_j, 0 on the diagonal,
  /// 2 when unordered.
  std::vector<std::vector<int>> compare;
  /// Elements not dominated by any other (resp. not dominating any other).
  std::vector<int> maximal;
  std::vector<int> minimal;
  std::optional<int> greatest;
  std::optional<int> least;
  bool third_predicted = false;
  bool third_located = false;
  /// "not predicted", "located" or "predicted but not located".
  std::string third_status = "not predicted";
};

OrderStructure order_structure(const std::vector<Equilibrium>& equilibria, double tol = 1e-9);

/// Sets is_maximal / is_minimal (greatest / least element) on every member.
void mark_extremes(std::vector<Equilibrium>& equilibria, double tol = 1e-9);

struct TheoremCheck {
  std::string name;
  bool hypothesis = false;
  bool passed = true;
  std::string detail;
};

struct RegionReport {
  Mode mode = Mode::future_distorted;
  RegionPoints points;
  double c = 0.0;
  Box box;
  /// Open lower end of the upper region, open upper end of the lower region.
  std::optional<double> upper_from;
  std::optional<double> lower_to;
  std::optional<double> unstable_from;
  std::optional<double> unstable_to;
  int upper_count = 0;
  int lower_count = 0;
  int unstable_count = 0;
  int mixed_count = 0;
  double u1_at_b_plus_c = 0.0;
  double u2_at_a_minus_c = 0.0;
  double u1_at_a_plus_c = 0.0;
  bool thm13_sufficiency = false;
  bool thm14_sufficiency = false;
  bool thm15_uniqueness = false;
  std::optional<bool> condition1;
  std::optional<bool> condition2;
  std::vector<TheoremCheck> checks;

  bool all_passed() const;
  const TheoremCheck* check(const std::string& name) const;
};

class TheoremViolation : public std::runtime_error {
 public:
  TheoremViolation(const std::string& what, nlohmann::json diagnostic)
      : std::runtime_error(what), diagnostic_(std::move(diagnostic)) {}
  const nlohmann::json& diagnostic() const { return diagnostic_; }

 private:
  nlohmann::json diagnostic_;
};

/// Labels each census member with its region and checks the stability and
/// region theorems against the census.  With strict set, a failed check
/// throws TheoremViolation carrying the full report.
RegionReport region_report(Census& census, const RegionPoints& points, const Operator& op,
                           bool strict = true);

nlohmann::json to_json(const Equilibrium& e);
nlohmann::json to_json(const Census& census, const OrderStructure& order);
nlohmann::json to_json(const RegionReport& report);
nlohmann::json to_json(const OrderStructure& order);

}  // namespace prospectq
