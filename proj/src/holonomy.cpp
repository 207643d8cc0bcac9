#include "mixlab/holonomy.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

namespace mixlab {

namespace {

constexpr double kSymbolTol = 1e-15;

bool same_symbol(const TorusPoint& a, const TorusPoint& b) { return torus_distance(a, b) <= kSymbolTol; }

TorusPoint uniform_point(std::size_t dim, Rng& rng) {
  TorusPoint p(dim);
  for (std::size_t i = 0; i < dim; ++i) p.set(i, rng.uniform());
  return p;
}

/// Copy of x whose stored range covers [lo, hi] (reads outside the old range
/// take the fills, exactly as before the copy).
SkewPoint materialize(const SkewPoint& x, long lo, long hi) {
  lo = std::min(lo, x.omega.lo());
  hi = std::max(hi, x.omega.hi());
  std::vector<TorusPoint> syms;
  syms.reserve(static_cast<std::size_t>(hi - lo + 1));
  for (long j = lo; j <= hi; ++j) syms.push_back(x.omega.at(j));
  return {BiSequence(lo, std::move(syms), x.omega.left_fill(), x.omega.right_fill()), x.theta};
}

}  // namespace

BiSequence::BiSequence(long lo, std::vector<TorusPoint> symbols, TorusPoint left_fill, TorusPoint right_fill)
    : lo_(lo), symbols_(std::move(symbols)), left_fill_(left_fill), right_fill_(right_fill) {
  if (left_fill_.dim() == 0 || left_fill_.dim() != right_fill_.dim())
    throw std::invalid_argument("fill symbols must share a positive dimension");
  for (const auto& s : symbols_)
    if (s.dim() != left_fill_.dim()) throw std::invalid_argument("symbol dimension mismatch");
}

BiSequence BiSequence::constant(long lo, long hi, const TorusPoint& fill) {
  if (hi < lo) throw std::invalid_argument("empty stored range");
  return BiSequence(lo, std::vector<TorusPoint>(static_cast<std::size_t>(hi - lo + 1), fill), fill, fill);
}

const TorusPoint& BiSequence::at(long j) const noexcept {
  if (j < lo_) return left_fill_;
  if (j > hi()) return right_fill_;
  return symbols_[static_cast<std::size_t>(j - lo_)];
}

void BiSequence::set(long j, const TorusPoint& value) {
  if (!stores(j)) throw std::out_of_range("index outside stored range");
  if (value.dim() != dim()) throw std::invalid_argument("symbol dimension mismatch");
  symbols_[static_cast<std::size_t>(j - lo_)] = value;
}

double shift_metric(const BiSequence& x, const BiSequence& y) {
  const long lo = std::min(x.lo(), y.lo());
  const long hi = std::max(x.hi(), y.hi());
  long best = -1;
  auto consider = [&](long j) {
    const long a = std::abs(j);
    if (best < 0 || a < best) best = a;
  };
  for (long j = lo; j <= hi; ++j)
    if (!same_symbol(x.at(j), y.at(j))) consider(j);
  if (!same_symbol(x.left_fill(), y.left_fill())) consider(lo - 1);
  if (!same_symbol(x.right_fill(), y.right_fill())) consider(hi + 1);
  return best < 0 ? 0.0 : std::ldexp(1.0, -static_cast<int>(best));
}

SkewPoint skew_forward(SkewPoint x) {
  x.theta += x.omega.at(0);
  x.omega.shift_left();
  return x;
}

SkewPoint skew_inverse(SkewPoint x) {
  if (!x.omega.stores(-1)) throw std::out_of_range("window exhausted");
  x.theta -= x.omega.at(-1);
  x.omega.shift_right();
  return x;
}

SkewPoint future_project(SkewPoint x, const TorusPoint& p_plus) {
  for (long j = std::max(1L, x.omega.lo()); j <= x.omega.hi(); ++j) x.omega.set(j, p_plus);
  x.omega.set_right_fill(p_plus);
  return x;
}

// --- WindowObservable -------------------------------------------------------

WindowObservable::WindowObservable(std::size_t dim, long lo, long hi, StateFn fn, std::optional<double> a, int)
    : alpha(a), dim_(dim), lo_(lo), hi_(hi), fn_(std::move(fn)) {
  if (dim == 0 || dim > kMaxDim) throw std::invalid_argument("observable dimension out of range");
  if (hi < lo) throw std::invalid_argument("window must satisfy lo <= hi");
}

WindowObservable::WindowObservable(std::size_t dim, long w, SliceFn fn, std::optional<double> a)
    : WindowObservable(dim, -w, w, std::move(fn), a) {
  if (w < 0) throw std::invalid_argument("window must be nonnegative");
}

WindowObservable::WindowObservable(std::size_t dim, long lo, long hi, SliceFn fn, std::optional<double> a)
    : WindowObservable(
          dim, lo, hi,
          StateFn([lo, hi, fn = std::move(fn)](const SkewPoint& x) {
            std::vector<TorusPoint> slice;
            slice.reserve(static_cast<std::size_t>(hi - lo + 1));
            for (long j = lo; j <= hi; ++j) slice.push_back(x.omega.at(j));
            return fn(slice, x.theta);
          }),
          a, 0) {}

WindowObservable WindowObservable::from_state(std::size_t dim, long lo, long hi, StateFn fn,
                                              std::optional<double> a) {
  WindowObservable obs(dim, lo, hi, std::move(fn), a, 0);
  Rng rng(0x5B07C4EC);
  for (int t = 0; t < 100; ++t) {
    SkewPoint x = random_state(dim, lo - 4, hi + 4, rng);
    const double base = obs(x);
    SkewPoint y = x;
    for (long j = lo - 4; j < lo; ++j)
      if (rng.below(2) == 0) y.omega.set(j, uniform_point(dim, rng));
    for (long j = hi + 1; j <= hi + 4; ++j)
      if (rng.below(2) == 0) y.omega.set(j, uniform_point(dim, rng));
    y.omega.set_left_fill(uniform_point(dim, rng));
    y.omega.set_right_fill(uniform_point(dim, rng));
    if (std::abs(obs(y) - base) > 1e-12)
      throw std::invalid_argument("observable depends on symbols outside its window");
  }
  return obs;
}

WindowObservable WindowObservable::constant(std::size_t dim, double c) {
  return WindowObservable(dim, 0, 0, StateFn([c](const SkewPoint&) { return c; }), std::nullopt, 0);
}

WindowObservable WindowObservable::on_theta(std::size_t dim, std::function<double(const TorusPoint&)> u) {
  return WindowObservable(dim, 0, 0, StateFn([u = std::move(u)](const SkewPoint& x) { return u(x.theta); }),
                          std::nullopt, 0);
}

long WindowObservable::window() const noexcept { return std::max(std::abs(lo_), std::abs(hi_)); }

WindowObservable WindowObservable::operator+(const WindowObservable& o) const {
  if (o.dim_ != dim_) throw std::invalid_argument("observable dimensions differ");
  std::optional<double> a;
  if (alpha && o.alpha) a = std::min(*alpha, *o.alpha);
  return WindowObservable(dim_, std::min(lo_, o.lo_), std::max(hi_, o.hi_),
                          StateFn([f = fn_, g = o.fn_](const SkewPoint& x) { return f(x) + g(x); }), a, 0);
}

WindowObservable WindowObservable::operator*(double c) const {
  return WindowObservable(dim_, lo_, hi_, StateFn([f = fn_, c](const SkewPoint& x) { return c * f(x); }), alpha,
                          0);
}

SkewPoint random_state(std::size_t dim, long lo, long hi, Rng& rng) {
  std::vector<TorusPoint> syms;
  for (long j = lo; j <= hi; ++j) syms.push_back(uniform_point(dim, rng));
  const TorusPoint left = uniform_point(dim, rng);
  const TorusPoint right = uniform_point(dim, rng);
  return {BiSequence(lo, std::move(syms), left, right), uniform_point(dim, rng)};
}

SkewPoint random_state(const TorusMeasure& mu, long lo, long hi, Rng& rng) {
  std::vector<TorusPoint> syms;
  for (long j = lo; j <= hi; ++j) syms.push_back(mu.sample(rng));
  const TorusPoint left = mu.sample(rng);
  const TorusPoint right = mu.sample(rng);
  return {BiSequence(lo, std::move(syms), left, right), uniform_point(mu.dim(), rng)};
}

// --- holonomies -------------------------------------------------------------

std::vector<double> holonomy_terms(const WindowObservable& phi, const SkewPoint& a, const SkewPoint& b,
                                   long n_terms) {
  std::vector<double> g;
  g.reserve(static_cast<std::size_t>(std::max(n_terms, 0L)));
  SkewPoint xa = a, xb = b;
  for (long n = 1; n <= n_terms; ++n) {
    xa = skew_inverse(std::move(xa));
    xb = skew_inverse(std::move(xb));
    g.push_back(phi(xb) - phi(xa));
  }
  return g;
}

double unstable_holonomy(const WindowObservable& phi, const SkewPoint& a, const SkewPoint& b) {
  if (!nearly_equal(a.theta, b.theta, kSymbolTol)) throw std::invalid_argument("not on same fiber");
  const long lo = std::min(a.omega.lo(), b.omega.lo());
  for (long j = lo; j <= 0; ++j)
    if (!same_symbol(a.omega.at(j), b.omega.at(j))) throw std::invalid_argument("not on same fiber");
  if (!same_symbol(a.omega.left_fill(), b.omega.left_fill())) throw std::invalid_argument("not on same fiber");
  double h = 0.0;
  for (double g : holonomy_terms(phi, a, b, std::max(phi.hi(), 0L))) h += g;
  return h;
}

HolonomyPropertyReport check_holonomy_properties(const WindowObservable& phi, const TorusMeasure& mu,
                                                 std::size_t n_pairs, std::uint64_t seed, ExecPolicy policy) {
  if (mu.dim() != phi.dim()) throw std::invalid_argument("measure and observable differ in dimension");
  const long H = std::max(phi.hi(), 0L);
  const long lo = std::min(phi.lo(), 0L) - H - 12;
  const long hi = H + 4;
  struct Row {
    double identity, antisymmetry, additivity, cocycle, tail;
  };
  const auto rows = map_indices(n_pairs, policy, [&](std::size_t i) {
    Rng rng = stream_rng(seed, i);
    const SkewPoint a = random_state(mu, lo, hi, rng);
    const auto redraw = [&](long from) {
      SkewPoint b = a;
      for (long j = from; j <= hi; ++j) b.omega.set(j, mu.sample(rng));
      b.omega.set_right_fill(mu.sample(rng));
      return b;
    };
    const SkewPoint b = redraw(1), c = redraw(1), b1 = redraw(2);
    const double hab = unstable_holonomy(phi, a, b);
    Row r{};
    r.identity = std::abs(unstable_holonomy(phi, a, a));
    r.antisymmetry = std::abs(hab + unstable_holonomy(phi, b, a));
    r.additivity = std::abs(unstable_holonomy(phi, a, c) - hab - unstable_holonomy(phi, b, c));
    r.cocycle = std::abs(unstable_holonomy(phi, a, b1) + phi(b1) - phi(a) -
                         unstable_holonomy(phi, skew_forward(a), skew_forward(b1)));
    const auto g = holonomy_terms(phi, a, b, H + 10);
    for (std::size_t n = static_cast<std::size_t>(H); n < g.size(); ++n) r.tail = std::max(r.tail, std::abs(g[n]));
    return r;
  });
  HolonomyPropertyReport rep{n_pairs, 0.0, 0.0, 0.0, 0.0, 0.0};
  for (const auto& r : rows) {
    rep.identity = std::max(rep.identity, r.identity);
    rep.antisymmetry = std::max(rep.antisymmetry, r.antisymmetry);
    rep.additivity = std::max(rep.additivity, r.additivity);
    rep.cocycle = std::max(rep.cocycle, r.cocycle);
    rep.tail = std::max(rep.tail, r.tail);
  }
  return rep;
}

namespace {

struct Reduction {
  WindowObservable phi;
  TorusPoint p_plus;
  long H;

  // Both eta and phi^- copy the state onto a stored range deep enough for
  // every inverse step, so they accept states with any storage.
  double eta(const SkewPoint& x) const {
    if (H == 0) return 0.0;
    const SkewPoint xm = materialize(x, phi.lo() - H - 1, phi.hi() + 1);
    return unstable_holonomy(phi, xm, future_project(xm, p_plus));
  }
  double phi_minus(const SkewPoint& x) const {
    const SkewPoint xm = materialize(x, phi.lo() - H - 2, phi.hi() + 1);
    const SkewPoint back = skew_inverse(xm);
    return eta(xm) - eta(back) + phi(back);
  }
};

double cohomology_residual(const WindowObservable& phi, const HolonomyPair& pair, const SkewPoint& a) {
  const SkewPoint fa = skew_forward(a);
  return std::abs(phi(a) - pair.phi_minus(fa) - pair.eta(a) + pair.eta(fa));
}

long sample_lo(const WindowObservable& phi, const HolonomyPair& pair) {
  return std::min({phi.lo(), pair.phi_minus.lo(), pair.eta.lo()}) - 2;
}

long sample_hi(const WindowObservable& phi, const HolonomyPair& pair) {
  return std::max({phi.hi(), pair.phi_minus.hi(), pair.eta.hi(), 1L}) + 2;
}

/// x with every stored omega_j, j >= 1, and the right fill redrawn.
SkewPoint perturb_future(SkewPoint x, Rng& rng) {
  const std::size_t d = x.omega.dim();
  for (long j = std::max(1L, x.omega.lo()); j <= x.omega.hi(); ++j) x.omega.set(j, uniform_point(d, rng));
  x.omega.set_right_fill(uniform_point(d, rng));
  return x;
}

}  // namespace

HolonomyPair reduce_to_past(const WindowObservable& phi, const HolonomyOptions& opts) {
  const std::size_t d = phi.dim();
  TorusPoint p_plus = opts.p_plus.dim() == 0 ? TorusPoint(d) : opts.p_plus;
  if (p_plus.dim() != d) throw std::invalid_argument("fixed future has the wrong dimension");

  const long H = std::max(phi.hi(), 0L);
  auto red = std::make_shared<const Reduction>(Reduction{phi, p_plus, H});
  const long eta_lo = H == 0 ? 0 : std::min(phi.lo(), 0L) - H;
  const long eta_hi = H == 0 ? 0 : phi.hi() - 1;
  const long pm_lo = std::min(eta_lo, std::min(phi.lo(), 0L)) - 1;
  const long pm_hi = std::max({eta_hi, phi.hi() - 1, 0L});

  HolonomyPair pair{
      WindowObservable::from_state(
          d, pm_lo, pm_hi, [red](const SkewPoint& x) { return red->phi_minus(x); }, phi.alpha),
      WindowObservable::from_state(
          d, eta_lo, eta_hi, [red](const SkewPoint& x) { return red->eta(x); }, phi.alpha),
      p_plus};
  if (phi.alpha) pair.phi_minus.alpha = *phi.alpha / 3.0;

  Rng rng(opts.check_seed);
  const long lo = sample_lo(phi, pair), hi = sample_hi(phi, pair);
  for (std::size_t t = 0; t < opts.check_states; ++t) {
    const SkewPoint x = random_state(d, lo, hi, rng);
    if (cohomology_residual(phi, pair, x) > opts.tolerance)
      throw std::logic_error("cohomological identity violated");
    const SkewPoint y = perturb_future(x, rng);
    if (std::abs(pair.phi_minus(x) - pair.phi_minus(y)) > opts.tolerance)
      throw std::logic_error("reduced observable depends on the future");
  }
  return pair;
}

double verify_cohomology(const WindowObservable& phi, const HolonomyPair& pair, std::size_t n_samples, Rng& rng,
                         ExecPolicy policy) {
  const std::uint64_t seed = rng.next();
  const long lo = sample_lo(phi, pair), hi = sample_hi(phi, pair);
  const auto res = map_indices(n_samples, policy, [&](std::size_t i) {
    Rng r = stream_rng(seed, i);
    return cohomology_residual(phi, pair, random_state(phi.dim(), lo, hi, r));
  });
  return res.empty() ? 0.0 : *std::max_element(res.begin(), res.end());
}

double future_dependence(const HolonomyPair& pair, std::size_t n_samples, Rng& rng) {
  const auto& pm = pair.phi_minus;
  double worst = 0.0;
  for (std::size_t t = 0; t < n_samples; ++t) {
    const SkewPoint x = random_state(pm.dim(), pm.lo() - 2, std::max(pm.hi(), 1L) + 2, rng);
    worst = std::max(worst, std::abs(pm(x) - pm(perturb_future(x, rng))));
  }
  return worst;
}

double holder_seminorm_estimate(const WindowObservable& psi, double beta, std::size_t n_pairs, Rng& rng) {
  if (n_pairs < 1) throw std::invalid_argument("n_pairs must be >= 1");
  if (!(beta > 0.0) || beta > 1.0) throw std::invalid_argument("beta must be in (0, 1]");
  const std::size_t d = psi.dim();
  const long w = psi.window();
  double best = 0.0;
  for (std::size_t t = 0; t < n_pairs; ++t) {
    const SkewPoint x = random_state(d, -w - 1, w + 1, rng);
    SkewPoint y = x;
    if (t % 2 == 0) {
      // Symbol pair: resample every |j| >= m, m in 0..w+1.
      const long m = static_cast<long>(rng.below(static_cast<std::uint64_t>(w + 2)));
      for (long j = -w - 1; j <= w + 1; ++j)
        if (std::abs(j) >= m) y.omega.set(j, uniform_point(d, rng));
      y.omega.set_left_fill(uniform_point(d, rng));
      y.omega.set_right_fill(uniform_point(d, rng));
      const double dist = shift_metric(x.omega, y.omega);
      if (dist > 0.0) best = std::max(best, std::abs(psi(x) - psi(y)) / std::pow(dist, beta));
    } else {
      // Theta pair at scale 10^-1 .. 10^-6.
      const double scale = std::pow(10.0, -1.0 - static_cast<double>(rng.below(6)));
      for (std::size_t a = 0; a < d; ++a) y.theta.set(a, y.theta[a] + scale * (2.0 * rng.uniform() - 1.0));
      const double dist = torus_distance(x.theta, y.theta);
      if (dist > 0.0) best = std::max(best, std::abs(psi(x) - psi(y)) / std::pow(dist, beta));
    }
  }
  return best;
}

MeanEstimate stationary_mean(const WindowObservable& psi, const TorusMeasure& mu, std::size_t n_samples,
                             std::uint64_t seed, ExecPolicy policy) {
  if (n_samples < 2) throw std::invalid_argument("mean estimate needs >= 2 samples");
  if (mu.dim() != psi.dim()) throw std::invalid_argument("measure and observable dimensions differ");
  const auto vals = map_indices(n_samples, policy, [&](std::size_t i) {
    Rng r = stream_rng(seed, i);
    return psi(random_state(mu, psi.lo() - 1, psi.hi() + 1, r));
  });
  double mean = 0.0;
  for (double v : vals) mean += v;
  mean /= static_cast<double>(n_samples);
  double ss = 0.0;
  for (double v : vals) ss += (v - mean) * (v - mean);
  const double var = ss / static_cast<double>(n_samples - 1);
  return {mean, std::sqrt(var / static_cast<double>(n_samples))};
}

// --- tabular observables ----------------------------------------------------

TabularObservable::TabularObservable(std::vector<TorusPoint> alphabet, long w, int K,
                                     std::vector<std::vector<double>> table)
    : alphabet_(std::move(alphabet)), w_(w), K_(K), table_(std::move(table)) {
  if (alphabet_.empty()) throw std::invalid_argument("empty alphabet");
  if (w < 0 || K < 0) throw std::invalid_argument("window and harmonic count must be nonnegative");
  const std::size_t d = alphabet_.front().dim();
  for (const auto& a : alphabet_)
    if (a.dim() != d) throw std::invalid_argument("alphabet dimension mismatch");
  const LatticeBox box(d, K);
  for (std::size_t i = box.center() + 1; i < box.size(); ++i) upper_.push_back(box.point(i));
  double tuples = 1.0;
  for (long j = -w; j <= w; ++j) tuples *= static_cast<double>(alphabet_.size());
  if (tuples > 1e7) throw std::length_error("tabular observable too large");
  if (table_.size() != static_cast<std::size_t>(tuples))
    throw std::invalid_argument("table needs one row per symbol tuple");
  for (const auto& row : table_)
    if (row.size() != basis_size()) throw std::invalid_argument("table row has the wrong number of coefficients");
}

TabularObservable TabularObservable::random(std::vector<TorusPoint> alphabet, long w, int K, Rng& rng) {
  if (alphabet.empty()) throw std::invalid_argument("empty alphabet");
  const LatticeBox box(alphabet.front().dim(), K);
  std::size_t tuples = 1;
  for (long j = -w; j <= w; ++j) tuples *= alphabet.size();
  const std::size_t half = (box.size() - 1) / 2;
  std::vector<std::vector<double>> table(tuples, std::vector<double>(1 + 2 * half));
  for (auto& row : table) {
    row[0] = 2.0 * rng.uniform() - 1.0;
    for (std::size_t h = 0; h < half; ++h) {
      const double damp = 1.0 / (1.0 + box.point(box.center() + 1 + h).sup_norm());
      row[1 + 2 * h] = damp * (2.0 * rng.uniform() - 1.0);
      row[2 + 2 * h] = damp * (2.0 * rng.uniform() - 1.0);
    }
  }
  return TabularObservable(std::move(alphabet), w, K, std::move(table));
}

std::size_t TabularObservable::nearest_atom(const TorusPoint& p) const {
  std::size_t best = 0;
  double best_d = torus_distance(p, alphabet_[0]);
  for (std::size_t i = 1; i < alphabet_.size(); ++i) {
    const double dist = torus_distance(p, alphabet_[i]);
    if (dist < best_d) {
      best_d = dist;
      best = i;
    }
  }
  return best;
}

double TabularObservable::evaluate(std::span<const TorusPoint> slice, const TorusPoint& theta) const {
  std::size_t idx = 0, stride = 1;
  for (const auto& s : slice) {
    idx += stride * nearest_atom(s);
    stride *= alphabet_.size();
  }
  const auto& row = table_[idx];
  double v = row[0];
  for (std::size_t h = 0; h < upper_.size(); ++h) {
    const double ph = kTwoPi * pairing(upper_[h], theta);
    v += row[1 + 2 * h] * std::cos(ph) + row[2 + 2 * h] * std::sin(ph);
  }
  return v;
}

WindowObservable TabularObservable::as_window_observable() const {
  auto self = std::make_shared<const TabularObservable>(*this);
  return WindowObservable(alphabet_.front().dim(), w_,
                          [self](std::span<const TorusPoint> s, const TorusPoint& th) { return self->evaluate(s, th); });
}

}  // namespace mixlab
