#include "prospectq/bellman.hpp"

#include "prospectq/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace prospectq {

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::classical: return "classical";
    case Mode::future_distorted: return "future_distorted";
    case Mode::total_distorted: return "total_distorted";
  }
  return "unknown";
}

Mode mode_from_string(const std::string& name) {
  if (name == "classical") return Mode::classical;
  if (name == "future_distorted" || name == "future") return Mode::future_distorted;
  if (name == "total_distorted" || name == "total" || name == "alt") return Mode::total_distorted;
  throw std::invalid_argument("unknown mode '" + name + "'");
}

std::string to_string(const Backend& b) {
  switch (b.kind) {
    case Backend::Kind::exact_c0: return "exact_c0";
    case Backend::Kind::quadrature: return "quadrature(" + std::to_string(b.order) + ")";
    case Backend::Kind::monte_carlo:
      return "monte_carlo(" + std::to_string(b.samples) + ", seed=" + std::to_string(b.seed) + ")";
  }
  return "unknown";
}

Backend default_backend(int r, double c) {
  (void)r;
  if (c == 0.0) return Backend::exact();
  return Backend::quadrature(16);
}

struct Operator::BlockResult {
  double value = 0.0;
  std::vector<double> grad;
};

// value = sum_k coeff_k f(z_k), grad_w = sum_{k: action_k = w} coeff_k f'(z_k).
struct Operator::BlockNodes {
  std::vector<int> action;
  std::vector<double> z;
  std::vector<double> coeff;

  void clear() {
    action.clear();
    z.clear();
    coeff.clear();
  }
  void add(int w, double zk, double ck) {
    action.push_back(w);
    z.push_back(zk);
    coeff.push_back(ck);
  }
};

namespace {

constexpr int kMaxOrder = 512;
constexpr std::int64_t kMaxCachedNoise = std::int64_t{1} << 24;

}  // namespace

Operator::Operator(std::shared_ptr<const Mdp> mdp, Mode mode, SCurve curve, NoiseModel noise,
                   double epsilon, Backend backend)
    : mdp_(std::move(mdp)),
      mode_(mode),
      curve_(std::move(curve)),
      noise_(noise),
      epsilon_(epsilon),
      backend_(backend) {
  if (!mdp_) throw std::invalid_argument("operator needs an MDP");
  if (!(epsilon_ > 0.0 && epsilon_ < 1.0)) throw std::invalid_argument("epsilon must lie in (0, 1)");
  const double c = noise_.half_width();
  if (c > mdp_->k_min()) throw std::invalid_argument("noise half-width must not exceed k_min");
  if (backend_.kind == Backend::Kind::exact_c0 && c > 0.0)
    throw std::invalid_argument("exact_c0 backend requires the noise-free model (c = 0)");
  if (backend_.kind == Backend::Kind::quadrature && (backend_.order < 1 || backend_.order > kMaxOrder))
    throw std::invalid_argument("quadrature order must lie in [1, " + std::to_string(kMaxOrder) + "]");
  if (backend_.kind == Backend::Kind::monte_carlo && backend_.samples < 1)
    throw std::invalid_argument("monte_carlo needs at least one sample");

  const double K = mdp_->K();
  if (mode_ == Mode::future_distorted) curve_.validate({0.0, K + c, K});
  if (mode_ == Mode::total_distorted) curve_.validate({0.0, K + mdp_->alpha() * c, K});

  if (c > 0.0 && backend_.kind == Backend::Kind::quadrature) {
    smooth_rule_ = noise_.nodes(backend_.order);
    piece_rule_ = gauss_legendre(backend_.order);
  }
  const std::int64_t cells = static_cast<std::int64_t>(mdp_->pairs()) * backend_.samples;
  if (c > 0.0 && backend_.kind == Backend::Kind::monte_carlo && cells <= kMaxCachedNoise) {
    auto table = std::make_shared<std::vector<double>>(static_cast<std::size_t>(cells));
    const int r = mdp_->actions();
    for (int j = 0; j < mdp_->states(); ++j) {
      Rng rng(substream_seed(backend_.seed, static_cast<std::uint64_t>(j)));
      double* out = table->data() + static_cast<std::int64_t>(j) * backend_.samples * r;
      for (std::int64_t n = 0; n < backend_.samples * r; ++n) out[n] = noise_.sample(rng);
    }
    mc_noise_ = std::move(table);
  }
}

Operator Operator::with_backend(Backend backend) const {
  return Operator(mdp_, mode_, curve_, noise_, epsilon_, backend);
}

Box Operator::box() const { return mode_ == Mode::total_distorted ? mdp_->total_box() : mdp_->box(); }

// Expectation over the noise of one action block (the r values of a single
// next state):
//
//   value = E[(1 - eps) f(z_{w*}) + eps/(r-1) sum_{w != w*} f(z_w)],
//   z_w = q_w - y_w,  w* = argmax_w z_w (lowest index on ties),
//   f(z) = u(shift + scale z),
//
// and, when requested, grad_w = d value / d q_w.
void Operator::expect_block(const double* q, double shift, double scale, bool want_grad,
                            int state, BlockResult& out) const {
  if (backend_.kind != Backend::Kind::monte_carlo || noise_.half_width() == 0.0) {
    thread_local BlockNodes nodes;
    block_nodes(q, nodes);
    eval_nodes(nodes, shift, scale, want_grad, out);
    return;
  }

  const int r = mdp_->actions();
  const double wg = r >= 2 ? 1.0 - epsilon_ : 1.0;
  const double wo = r >= 2 ? epsilon_ / (r - 1) : 0.0;
  auto f = [&](double z) { return curve_.value(shift + scale * z); };
  auto fp = [&](double z) { return scale * curve_.derivative(shift + scale * z); };
  out.value = 0.0;
  if (want_grad) out.grad.assign(r, 0.0);

  // Same draws as the cached table: one substream per next state.
  Rng rng(substream_seed(backend_.seed, static_cast<std::uint64_t>(state)));
  const double* cached =
      mc_noise_ ? mc_noise_->data() + static_cast<std::int64_t>(state) * backend_.samples * r : nullptr;
  std::vector<double> z(r);
  double acc = 0.0;
  std::vector<double> gacc(want_grad ? r : 0, 0.0);
  for (std::int64_t n = 0; n < backend_.samples; ++n) {
    int best = 0;
    for (int w = 0; w < r; ++w) {
      z[w] = q[w] - (cached ? cached[n * r + w] : noise_.sample(rng));
      if (z[w] > z[best]) best = w;
    }
    for (int w = 0; w < r; ++w) {
      const double weight = w == best ? wg : wo;
      if (weight == 0.0) continue;
      acc += weight * f(z[w]);
      if (want_grad) gacc[w] += weight * fp(z[w]);
    }
  }
  const double inv = 1.0 / static_cast<double>(backend_.samples);
  out.value = acc * inv;
  if (want_grad)
    for (int w = 0; w < r; ++w) out.grad[w] = gacc[w] * inv;
}

void Operator::eval_nodes(const BlockNodes& nodes, double shift, double scale, bool want_grad,
                          BlockResult& out) const {
  out.value = 0.0;
  if (want_grad) out.grad.assign(mdp_->actions(), 0.0);
  for (std::size_t k = 0; k < nodes.z.size(); ++k) {
    const double x = shift + scale * nodes.z[k];
    out.value += nodes.coeff[k] * curve_.value(x);
    if (want_grad) out.grad[nodes.action[k]] += nodes.coeff[k] * scale * curve_.derivative(x);
  }
}

// Nodes for the expectation over the noise of one action block (the r values
// of a single next state):
//
//   value = E[(1 - eps) f(z_{w*}) + eps/(r-1) sum_{w != w*} f(z_w)],
//   z_w = q_w - y_w,  w* = argmax_w z_w (lowest index on ties),
//   f(z) = u(shift + scale z).
void Operator::block_nodes(const double* q, BlockNodes& out) const {
  const int r = mdp_->actions();
  const double wg = r >= 2 ? 1.0 - epsilon_ : 1.0;
  const double wo = r >= 2 ? epsilon_ / (r - 1) : 0.0;
  out.clear();

  const double c = noise_.half_width();
  if (c == 0.0 || backend_.kind == Backend::Kind::exact_c0) {
    int best = 0;
    for (int w = 1; w < r; ++w)
      if (q[w] > q[best]) best = w;
    for (int w = 0; w < r; ++w) {
      const double weight = w == best ? wg : wo;
      if (weight != 0.0) out.add(w, q[w], weight);
    }
    return;
  }

  // Quadrature.  Writing S for the noise survival function,
  //   A_w = E[f(z_w) 1{w* = w}] = int f(q_w - y) phi(y) prod_{w'!=w} S(q_w' - q_w + y) dy,
  //   C_w = E[f(z_w)],
  // value = wg sum A + wo (sum C - sum A), so the A nodes carry wg - wo and
  // the C nodes wo.  Only actions within 2c of the best value can be the
  // perturbed argmax.
  double qmax = q[0];
  for (int w = 1; w < r; ++w) qmax = std::max(qmax, q[w]);
  thread_local std::vector<int> contenders;
  contenders.clear();
  for (int w = 0; w < r; ++w)
    if (q[w] > qmax - 2.0 * c) contenders.push_back(w);

  auto add_smooth = [&](int w, double weight) {
    for (std::size_t k = 0; k < smooth_rule_.size(); ++k)
      out.add(w, q[w] - smooth_rule_.nodes[k], weight * smooth_rule_.weights[k]);
  };

  if (wo > 0.0)
    for (int w = 0; w < r; ++w) add_smooth(w, wo);

  if (contenders.size() == 1) {
    add_smooth(contenders.front(), wg - wo);
    return;
  }
  thread_local std::vector<double> cuts;
  for (int w : contenders) {
    double y_hi = c;
    for (int o : contenders)
      if (o != w) y_hi = std::min(y_hi, q[w] - q[o] + c);
    if (y_hi <= -c) continue;
    cuts.assign({-c, y_hi});
    for (int o : contenders) {
      if (o == w) continue;
      const double y = q[w] - q[o] - c;
      if (y > -c && y < y_hi) cuts.push_back(y);
    }
    std::sort(cuts.begin(), cuts.end());
    for (std::size_t piece = 0; piece + 1 < cuts.size(); ++piece) {
      const double lo = cuts[piece];
      const double hi = cuts[piece + 1];
      if (!(hi > lo)) continue;
      const double half = 0.5 * (hi - lo);
      const double mid = 0.5 * (hi + lo);
      for (std::size_t k = 0; k < piece_rule_.size(); ++k) {
        const double y = mid + half * piece_rule_.nodes[k];
        double weight = half * piece_rule_.weights[k] * noise_.density(y);
        for (int o : contenders)
          if (o != w) weight *= noise_.survival(q[o] - q[w] + y);
        if (weight != 0.0) out.add(w, q[w] - y, (wg - wo) * weight);
      }
    }
  }
}

Vec Operator::apply(const Vec& q) const {
  const Mdp& m = *mdp_;
  const int s = m.states();
  const int r = m.actions();
  if (q.size() != m.pairs()) throw std::invalid_argument("Q-vector length does not match the MDP");

  if (mode_ == Mode::classical) return classical_F(q, m);

  if (mode_ == Mode::future_distorted) {
    Vec G(s);
    BlockResult block;
    for (int j = 0; j < s; ++j) {
      expect_block(q.data() + j * r, 0.0, 1.0, false, j, block);
      G(j) = block.value;
    }
    return m.rewards() + m.alpha() * (m.kernel() * G);
  }

  Vec F = Vec::Zero(m.pairs());
  BlockResult block;
  BlockNodes nodes;
  const bool cache = backend_.kind != Backend::Kind::monte_carlo || noise_.half_width() == 0.0;
  for (int j = 0; j < s; ++j) {
    if (cache) block_nodes(q.data() + j * r, nodes);
    for (int iv = 0; iv < m.pairs(); ++iv) {
      const double pj = m.kernel()(iv, j);
      if (pj == 0.0) continue;
      if (cache)
        eval_nodes(nodes, m.rewards()(iv), m.alpha(), false, block);
      else
        expect_block(q.data() + j * r, m.rewards()(iv), m.alpha(), false, j, block);
      F(iv) += pj * block.value;
    }
  }
  return F;
}

JacobianMatrix Operator::jacobian(const Vec& q) const {
  if (mode_ == Mode::classical) throw std::logic_error("the classical operator has no Jacobian");
  const Mdp& m = *mdp_;
  const int s = m.states();
  const int r = m.actions();
  const int n = m.pairs();
  if (q.size() != n) throw std::invalid_argument("Q-vector length does not match the MDP");

  JacobianMatrix J;
  J.backend = backend_;
  J.entries = Mat::Zero(n, n);
  BlockResult block;
  if (mode_ == Mode::future_distorted) {
    for (int j = 0; j < s; ++j) {
      expect_block(q.data() + j * r, 0.0, 1.0, true, j, block);
      for (int iv = 0; iv < n; ++iv) {
        const double pj = m.kernel()(iv, j);
        if (pj == 0.0) continue;
        for (int w = 0; w < r; ++w) J.entries(iv, j * r + w) = m.alpha() * pj * block.grad[w];
      }
    }
  } else {
    BlockNodes nodes;
    const bool cache = backend_.kind != Backend::Kind::monte_carlo || noise_.half_width() == 0.0;
    for (int j = 0; j < s; ++j) {
      if (cache) block_nodes(q.data() + j * r, nodes);
      for (int iv = 0; iv < n; ++iv) {
        const double pj = m.kernel()(iv, j);
        if (pj == 0.0) continue;
        if (cache)
          eval_nodes(nodes, m.rewards()(iv), m.alpha(), true, block);
        else
          expect_block(q.data() + j * r, m.rewards()(iv), m.alpha(), true, j, block);
        for (int w = 0; w < r; ++w) J.entries(iv, j * r + w) = pj * block.grad[w];
      }
    }
  }
  J.row_sums = J.entries.rowwise().sum();
  J.gamma_max = J.row_sums.maxCoeff();
  J.gamma_min = J.row_sums.minCoeff();
  return J;
}

Vec classical_F(const Vec& q, const Mdp& m) {
  const int s = m.states();
  const int r = m.actions();
  if (q.size() != m.pairs()) throw std::invalid_argument("Q-vector length does not match the MDP");
  Vec V(s);
  for (int j = 0; j < s; ++j) V(j) = q.segment(j * r, r).maxCoeff();
  return m.rewards() + m.alpha() * (m.kernel() * V);
}

Vec value_iteration(const Mdp& m, Vec q0, double tol, int max_iters) {
  Vec q = std::move(q0);
  for (int it = 0; it < max_iters; ++it) {
    Vec next = classical_F(q, m);
    const double diff = (next - q).lpNorm<Eigen::Infinity>();
    q = std::move(next);
    if (diff < tol) return q;
  }
  throw std::runtime_error("value iteration did not converge");
}

Vec prospect_F(const Vec& q, const Operator& op) {
  if (op.mode() != Mode::future_distorted) throw std::invalid_argument("prospect_F needs the future_distorted mode");
  return op.apply(q);
}

Vec alt_F(const Vec& q, const Operator& op) {
  if (op.mode() != Mode::total_distorted) throw std::invalid_argument("alt_F needs the total_distorted mode");
  return op.apply(q);
}

Vec vector_field(const Vec& q, const Operator& op) { return op.field(q); }

JacobianMatrix jacobian(const Vec& q, const Operator& op) { return op.jacobian(q); }

}  // namespace prospectq
