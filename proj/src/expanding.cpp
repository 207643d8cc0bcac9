#include "mixlab/expanding.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "mixlab/chain.hpp"

namespace mixlab {

// --- expression grammar -----------------------------------------------------

namespace {

class ExprParser {
 public:
  explicit ExprParser(const std::string& text) : s_(text) {}

  LiftFn parse() {
    LiftFn e = expr();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected trailing input");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw std::invalid_argument("map expression: " + what + " at position " + std::to_string(pos_));
  }
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  LiftFn expr() {
    LiftFn lhs = term();
    for (;;) {
      if (eat('+')) {
        lhs = [a = lhs, b = term()](Dual x) { return a(x) + b(x); };
      } else if (eat('-')) {
        lhs = [a = lhs, b = term()](Dual x) { return a(x) - b(x); };
      } else {
        return lhs;
      }
    }
  }

  LiftFn term() {
    LiftFn lhs = unary();
    for (;;) {
      if (eat('*')) {
        lhs = [a = lhs, b = unary()](Dual x) { return a(x) * b(x); };
      } else if (eat('/')) {
        lhs = [a = lhs, b = unary()](Dual x) { return a(x) / b(x); };
      } else {
        return lhs;
      }
    }
  }

  LiftFn unary() {
    if (eat('-')) return [a = unary()](Dual x) { return -a(x); };
    if (eat('+')) return unary();
    return primary();
  }

  LiftFn primary() {
    skip_ws();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    if (eat('(')) {
      LiftFn e = expr();
      if (!eat(')')) fail("expected ')'");
      return e;
    }
    const char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(s_.substr(pos_), &used);
      } catch (const std::exception&) {
        fail("bad number");
      }
      pos_ += used;
      return [v](Dual) { return Dual{v, 0.0}; };
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && std::isalpha(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      const std::string word = s_.substr(start, pos_ - start);
      if (word == "x") return [](Dual x) { return x; };
      if (word == "pi") return [](Dual) { return Dual{std::numbers::pi, 0.0}; };
      if (word == "sin" || word == "cos") {
        if (!eat('(')) fail("expected '(' after " + word);
        LiftFn arg = expr();
        if (!eat(')')) fail("expected ')'");
        if (word == "sin") return [arg](Dual x) { return sin(arg(x)); };
        return [arg](Dual x) { return cos(arg(x)); };
      }
      pos_ = start;
      fail("unknown identifier '" + word + "'");
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace

LiftFn parse_lift_expression(const std::string& text) { return ExprParser(text).parse(); }

// --- model ------------------------------------------------------------------

CircleMapModel::CircleMapModel(std::string name, int degree, LiftFn lift_fn, std::size_t grid)
    : name_(std::move(name)), degree_(degree), lift_(std::move(lift_fn)), grid_(grid) {
  if (degree_ < 2) throw std::invalid_argument("map degree must be >= 2");
  if (grid_ < 16) throw std::invalid_argument("density grid must have >= 16 points");
  double lam = std::numeric_limits<double>::infinity();
  constexpr int kCheck = 4096;
  for (int i = 0; i < kCheck; ++i) {
    const double x = (i + 0.5) / kCheck;
    const double d = derivative(x);
    if (!std::isfinite(d)) throw std::invalid_argument("map derivative is not finite");
    if (!(d > 0.0)) throw std::invalid_argument("map is not orientation preserving (f' <= 0)");
    lam = std::min(lam, d);
  }
  if (!(lam > 1.0)) throw std::invalid_argument("map is not expanding (min f' <= 1)");
  lambda_star_ = lam;
  for (int i = 0; i < 64; ++i) {
    const double x = i / 64.0;
    if (std::abs(lift(x + 1.0) - lift(x) - degree_) > 1e-9)
      throw std::invalid_argument("lift does not satisfy F(x+1) = F(x) + degree");
  }
}

CircleMapModel CircleMapModel::doubling(std::size_t grid) {
  return CircleMapModel("doubling", 2, [](Dual x) { return Dual{2.0 * x.v, 2.0 * x.d}; }, grid);
}

CircleMapModel CircleMapModel::tripling(std::size_t grid) {
  return CircleMapModel("tripling", 3, [](Dual x) { return Dual{3.0 * x.v, 3.0 * x.d}; }, grid);
}

CircleMapModel CircleMapModel::perturbed2(double eps, std::size_t grid) {
  if (!(std::abs(eps) < 1.0)) throw std::invalid_argument("perturbed2 needs |eps| < 1");
  return CircleMapModel(
      "perturbed2",
      2,
      [eps](Dual x) {
        const double a = kTwoPi * x.v;
        return Dual{2.0 * x.v + eps * std::sin(a) / kTwoPi, (2.0 + eps * std::cos(a)) * x.d};
      },
      grid);
}

CircleMapModel CircleMapModel::from_expression(const std::string& expr, int degree, std::size_t grid) {
  return CircleMapModel(expr, degree, parse_lift_expression(expr), grid);
}

double CircleMapModel::map(double x) const {
  const double v = lift(x);
  return v - std::floor(v);
}

// --- preimages --------------------------------------------------------------

namespace {

double mod1(double v) {
  v -= std::floor(v);
  return v >= 1.0 ? 0.0 : v;
}

double circle_gap(double a, double b) {
  const double d = std::abs(a - b);
  return std::min(d, 1.0 - d);
}

/// Root of F(y) = t on [0, 1] given F(0) <= t <= F(1), F increasing.
/// Newton steps that leave the bracket are replaced by bisection.
double solve_branch(const CircleMapModel& m, double t, double guess) {
  double a = 0.0, b = 1.0;
  double y = std::clamp(guess, a, b);
  for (int it = 0; it < 200; ++it) {
    const Dual F = m.lift_dual(y);
    const double r = F.v - t;
    if (r == 0.0) return y;
    if (r < 0.0) a = y;
    else b = y;
    double next = y - r / F.d;
    if (!(next > a && next < b)) next = 0.5 * (a + b);
    if (std::abs(next - y) <= 1e-16) return next;
    y = next;
  }
  return y;
}

}  // namespace

std::vector<double> preimages(const CircleMapModel& model, double x) {
  x = mod1(x);
  const int D = model.degree();
  const double F0 = model.lift(0.0);
  const double base = x + std::ceil(F0 - x);
  std::vector<double> ys;
  ys.reserve(static_cast<std::size_t>(D));
  for (int b = 0; b < D; ++b) {
    const double t = base + b;
    if (t < F0 - 1e-12 || t > F0 + D + 1e-12) throw std::runtime_error("branch solve failed");
    const double y = mod1(solve_branch(model, t, (t - F0) / D));
    if (circle_gap(model.map(y), x) >= 1e-12) throw std::runtime_error("branch solve failed");
    ys.push_back(y);
  }
  std::sort(ys.begin(), ys.end());
  for (int b = 0; b < D; ++b)
    if (circle_gap(ys[static_cast<std::size_t>(b)], ys[static_cast<std::size_t>((b + 1) % D)]) <= 1e-9)
      throw std::runtime_error("branch solve failed");
  return ys;
}

double interpolate(std::span<const double> values, double x) {
  const std::size_t G = values.size();
  const double u = mod1(x) * static_cast<double>(G) - 0.5;
  const double fl = std::floor(u);
  const double frac = u - fl;
  const auto i0 = static_cast<std::size_t>((static_cast<long long>(fl) % static_cast<long long>(G) + G) % G);
  const std::size_t i1 = (i0 + 1) % G;
  return (1.0 - frac) * values[i0] + frac * values[i1];
}

// --- transfer operator ------------------------------------------------------

TransferOperator::TransferOperator(const CircleMapModel& model)
    : grid_(model.grid()), per_row_(static_cast<std::size_t>(model.degree())) {
  const std::size_t G = grid_;
  taps_.reserve(G * per_row_);
  for (std::size_t i = 0; i < G; ++i) {
    const double x = (static_cast<double>(i) + 0.5) / static_cast<double>(G);
    for (double y : preimages(model, x)) {
      const double inv = 1.0 / model.derivative(y);
      const double u = y * static_cast<double>(G) - 0.5;
      const double fl = std::floor(u);
      const double frac = u - fl;
      const auto i0 = static_cast<std::uint32_t>((static_cast<long long>(fl) + static_cast<long long>(G)) %
                                                 static_cast<long long>(G));
      const auto i1 = static_cast<std::uint32_t>((i0 + 1) % G);
      taps_.push_back({i0, i1, (1.0 - frac) * inv, frac * inv});
    }
  }
}

double TransferOperator::row(std::size_t i, std::span<const double> h) const {
  double s = 0.0;
  for (std::size_t k = i * per_row_; k < (i + 1) * per_row_; ++k) {
    const Tap& t = taps_[k];
    s += t.w0 * h[t.i0] + t.w1 * h[t.i1];
  }
  return s;
}

std::vector<double> TransferOperator::apply(std::span<const double> h, ExecPolicy policy) const {
  if (h.size() != grid_) throw std::invalid_argument("grid function has the wrong size");
  return map_indices(grid_, policy, [&](std::size_t i) { return row(i, h); });
}

std::vector<double> TransferOperator::apply_serial(std::span<const double> h) const {
  if (h.size() != grid_) throw std::invalid_argument("grid function has the wrong size");
  return map_indices_serial(grid_, [&](std::size_t i) { return row(i, h); });
}

std::vector<double> TransferOperator::apply_transpose(std::span<const double> l) const {
  if (l.size() != grid_) throw std::invalid_argument("grid function has the wrong size");
  std::vector<double> out(grid_, 0.0);
  for (std::size_t i = 0; i < grid_; ++i)
    for (std::size_t k = i * per_row_; k < (i + 1) * per_row_; ++k) {
      const Tap& t = taps_[k];
      out[t.i0] += l[i] * t.w0;
      out[t.i1] += l[i] * t.w1;
    }
  return out;
}

std::vector<double> transfer_apply(std::span<const double> h, const CircleMapModel& model) {
  return TransferOperator(model).apply(h);
}

double grid_integral(std::span<const double> h) {
  if (h.empty()) throw std::invalid_argument("empty grid function");
  double s = 0.0;
  for (double v : h) s += v;
  return s / static_cast<double>(h.size());
}

std::vector<double> sample_on_grid(const std::function<double(double)>& fn, std::size_t G) {
  std::vector<double> v(G);
  for (std::size_t i = 0; i < G; ++i) v[i] = fn((static_cast<double>(i) + 0.5) / static_cast<double>(G));
  return v;
}

// --- invariant density ------------------------------------------------------

double InvariantDensity::min_value() const { return *std::min_element(values.begin(), values.end()); }

double InvariantDensity::stationary_mean(std::span<const double> h) const {
  if (h.size() != stationary.size()) throw std::invalid_argument("grid function has the wrong size");
  double s = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) s += stationary[i] * h[i];
  return s;
}

namespace {

double sup_diff(std::span<const double> a, std::span<const double> b, double scale_b = 1.0) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - scale_b * b[i]));
  return m;
}

}  // namespace

InvariantDensity invariant_density(const CircleMapModel& model, double tol, long max_iter, ExecPolicy policy) {
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
  const TransferOperator L(model);
  const std::size_t G = L.grid();
  std::vector<double> h(G, 1.0);
  InvariantDensity out{};
  for (long it = 0;; ++it) {
    std::vector<double> Lh = L.apply(h, policy);
    const double lambda = grid_integral(Lh);  // grid_integral(h) == 1
    const double eig_res = sup_diff(Lh, h, lambda);
    if (eig_res < tol) {
      out.values = h;
      out.eigenvalue = lambda;
      out.eigen_residual = eig_res;
      out.residual = sup_diff(Lh, h);
      out.iterations = it;
      break;
    }
    if (it >= max_iter) throw std::runtime_error("no convergence");
    for (double& v : Lh) v /= lambda;
    h = std::move(Lh);
  }
  if (!(out.min_value() > 0.0)) throw std::runtime_error("invariant density is not positive");

  // Left Perron vector of L, then stationary weights l_i g_i of Q.
  std::vector<double> l(G, 1.0 / static_cast<double>(G));
  for (long it = 0;; ++it) {
    std::vector<double> next = L.apply_transpose(l);
    double s = 0.0;
    for (double v : next) s += v;
    for (double& v : next) v /= s;
    const double diff = sup_diff(next, l) * static_cast<double>(G);
    l = std::move(next);
    if (diff < tol) break;
    if (it >= max_iter) throw std::runtime_error("no convergence");
  }
  out.stationary.resize(G);
  double s = 0.0;
  for (std::size_t i = 0; i < G; ++i) s += out.stationary[i] = l[i] * out.values[i];
  for (double& v : out.stationary) v /= s;

  out.cumulative.resize(G);
  double acc = 0.0;
  for (std::size_t i = 0; i < G; ++i) out.cumulative[i] = acc += out.values[i] / static_cast<double>(G);
  for (double& v : out.cumulative) v /= acc;
  return out;
}

// --- Markov kernel ----------------------------------------------------------

std::vector<KernelWeight> markov_kernel_weights(const CircleMapModel& model, const InvariantDensity& g, double x) {
  const double gx = g(x);
  std::vector<KernelWeight> out;
  for (double y : preimages(model, x)) out.push_back({y, g(y) / (g.eigenvalue * gx * model.derivative(y))});
  return out;
}

namespace {

std::vector<double> weighted(std::span<const double> h, const InvariantDensity& g) {
  if (h.size() != g.values.size()) throw std::invalid_argument("grid function has the wrong size");
  std::vector<double> hg(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) hg[i] = h[i] * g.values[i];
  return hg;
}

void unweight(std::vector<double>& v, const InvariantDensity& g) {
  for (std::size_t i = 0; i < v.size(); ++i) v[i] /= g.eigenvalue * g.values[i];
}

}  // namespace

std::vector<double> markov_apply(std::span<const double> h, const TransferOperator& L, const InvariantDensity& g,
                                 ExecPolicy policy) {
  auto out = L.apply(weighted(h, g), policy);
  unweight(out, g);
  return out;
}

std::vector<double> markov_apply_serial(std::span<const double> h, const TransferOperator& L,
                                        const InvariantDensity& g) {
  auto out = L.apply_serial(weighted(h, g));
  unweight(out, g);
  return out;
}

ExpMixing exp_decay_trace(const TransferOperator& L, const InvariantDensity& g, std::span<const double> phi,
                          long n_max, ExecPolicy policy) {
  if (n_max < 0) throw std::invalid_argument("n_max must be >= 0");
  ExpMixing out{{}, g.stationary_mean(phi), std::nullopt, 0};
  std::vector<double> q(phi.begin(), phi.end());
  for (long n = 0; n <= n_max; ++n) {
    if (n > 0) q = markov_apply(q, L, g, policy);
    double delta = 0.0;
    for (double v : q) delta = std::max(delta, std::abs(v - out.mean));
    out.rows.push_back({n, delta});
    if (delta < 1e-15) break;
  }
  return out;
}

ExpMixing mixing_rate_exp(const TransferOperator& L, const InvariantDensity& g, std::span<const double> phi,
                          long n_max, ExecPolicy policy) {
  if (n_max < 5) throw std::invalid_argument("n_max must be >= 5");
  ExpMixing out = exp_decay_trace(L, g, phi, n_max, policy);
  double log_sum = 0.0;
  long count = 0;
  for (std::size_t i = 5; i + 1 < out.rows.size(); ++i) {
    const double a = out.rows[i].delta, b = out.rows[i + 1].delta;
    if (a > 1e-12 && b > 1e-12) {
      log_sum += std::log(b / a);
      ++count;
    }
  }
  out.usable_ratios = count;
  if (count < 3) throw std::domain_error("no decay measured");
  out.sigma = std::exp(log_sum / static_cast<double>(count));
  if (!(*out.sigma < 1.0)) throw std::domain_error("no decay measured");
  return out;
}

// --- sampling and backward chains -------------------------------------------

double sample_from_density(const InvariantDensity& g, Rng& rng) {
  const double u = rng.uniform();
  const auto it = std::upper_bound(g.cumulative.begin(), g.cumulative.end(), u);
  const auto i = std::min(static_cast<std::size_t>(it - g.cumulative.begin()), g.cumulative.size() - 1);
  return (static_cast<double>(i) + rng.uniform()) / static_cast<double>(g.cumulative.size());
}

namespace {

double backward_step(const CircleMapModel& model, const InvariantDensity& g, double x, Rng& rng) {
  const auto kw = markov_kernel_weights(model, g, x);
  double total = 0.0;
  for (const auto& k : kw) total += k.w;
  double u = rng.uniform() * total;
  for (const auto& k : kw) {
    if (u < k.w) return k.y;
    u -= k.w;
  }
  return kw.back().y;
}

double backward_sum(const CircleMapModel& model, const InvariantDensity& g, const std::function<double(double)>& phi,
                    const BackwardChainConfig& cfg, Rng& rng) {
  double x = cfg.x0 ? mod1(*cfg.x0) : sample_from_density(g, rng);
  double s = 0.0;
  for (long j = 0; j < cfg.n_steps; ++j) {
    s += phi(x);
    if (j + 1 < cfg.n_steps) x = backward_step(model, g, x, rng);
  }
  return s;
}

void check_config(const BackwardChainConfig& cfg) {
  if (cfg.n_steps < 1 || cfg.n_trials < 1) throw std::invalid_argument("backward chain needs n_steps, n_trials >= 1");
}

}  // namespace

std::vector<double> backward_chain(const CircleMapModel& model, const InvariantDensity& g, double x0, long n,
                                   Rng& rng) {
  if (n < 0) throw std::invalid_argument("n must be >= 0");
  std::vector<double> xs{mod1(x0)};
  for (long j = 0; j < n; ++j) xs.push_back(backward_step(model, g, xs.back(), rng));
  return xs;
}

std::vector<double> backward_birkhoff_sums(const CircleMapModel& model, const InvariantDensity& g,
                                           const std::function<double(double)>& phi,
                                           const BackwardChainConfig& cfg, ExecPolicy policy) {
  check_config(cfg);
  return trial_values(static_cast<std::size_t>(cfg.n_trials), cfg.seed, policy,
                      [&](Rng& rng) { return backward_sum(model, g, phi, cfg, rng); });
}

std::vector<double> backward_birkhoff_sums_serial(const CircleMapModel& model, const InvariantDensity& g,
                                                  const std::function<double(double)>& phi,
                                                  const BackwardChainConfig& cfg) {
  check_config(cfg);
  return trial_values_serial(static_cast<std::size_t>(cfg.n_trials), cfg.seed,
                             [&](Rng& rng) { return backward_sum(model, g, phi, cfg, rng); });
}

double duality_defect(const CircleMapModel& model, const TransferOperator& L, std::size_t n_pairs,
                      std::uint64_t seed) {
  double worst = 0.0;
  const std::size_t G = L.grid();
  for (std::size_t t = 0; t < n_pairs; ++t) {
    Rng rng = stream_rng(seed, t);
    const double a = rng.uniform(), b = rng.uniform(), s = rng.uniform();
    const int ka = 1 + static_cast<int>(rng.below(3)), kb = 1 + static_cast<int>(rng.below(3));
    const auto hf = [&](double x) { return 1.0 + 0.5 * std::sin(kTwoPi * (ka * x + a)); };
    const auto pf = [&](double x) { return std::cos(kTwoPi * (kb * x + b)) + s; };
    const auto h = sample_on_grid(hf, G);
    const auto phi = sample_on_grid(pf, G);
    const auto phi_f = sample_on_grid([&](double x) { return pf(model.map(x)); }, G);
    const auto Lh = L.apply_serial(h);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < G; ++i) {
      lhs += Lh[i] * phi[i];
      rhs += h[i] * phi_f[i];
    }
    worst = std::max(worst, std::abs(lhs - rhs) / static_cast<double>(G));
  }
  return worst;
}

double grid_sigma2(const TransferOperator& L, const InvariantDensity& g, std::span<const double> phi,
                   long max_terms) {
  const double mean = g.stationary_mean(phi);
  std::vector<double> q(phi.begin(), phi.end());
  for (double& v : q) v -= mean;
  std::vector<double> psi(q.size(), 0.0);
  long n = 0;
  for (;; ++n) {
    double sup = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      psi[i] += q[i];
      sup = std::max(sup, std::abs(q[i]));
    }
    if (sup < 1e-14) break;
    if (n >= max_terms) throw std::runtime_error("no convergence");
    q = markov_apply(q, L, g);
    const double drift = g.stationary_mean(q);  // stays ~0; removed to stop round-off accumulating
    for (double& v : q) v -= drift;
  }
  const auto Qpsi = markov_apply(psi, L, g);
  double a = 0.0, b = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i) {
    a += g.stationary[i] * psi[i] * psi[i];
    b += g.stationary[i] * Qpsi[i] * Qpsi[i];
  }
  return a - b;
}

}  // namespace mixlab
