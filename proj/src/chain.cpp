#include "mixlab/chain.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mixlab/stats.hpp"

namespace mixlab {

std::vector<TorusPoint> SkewState::symbols() const {
  std::vector<TorusPoint> out;
  out.reserve(count_);
  for (std::size_t i = 0; i < count_; ++i) out.push_back(symbol(i));
  return out;
}

SkewState::SkewState(TorusPoint theta, std::size_t window, std::span<const TorusPoint> history)
    : SkewState(theta, window) {
  if (window == 0) return;
  const std::size_t skip = history.size() > window ? history.size() - window : 0;
  for (std::size_t i = skip; i < history.size(); ++i) {
    if (history[i].dim() != theta.dim()) throw std::invalid_argument("symbol dimension mismatch");
    buf_[count_++] = history[i];
  }
}

void SkewState::advance(const TorusPoint& omega) {
  theta_ += omega;
  if (buf_.empty()) return;
  if (count_ < buf_.size()) {
    buf_[(head_ + count_) % buf_.size()] = omega;
    ++count_;
  } else {
    buf_[head_] = omega;
    head_ = (head_ + 1) % buf_.size();
  }
}

StateObservable on_theta(FourierObservable phi) {
  return [phi = std::move(phi)](const SkewState& s) { return phi(s.theta()); };
}

void ChainConfig::validate() const {
  if (n_steps < 1) throw std::invalid_argument("n_steps must be >= 1");
  if (n_trials < 1) throw std::invalid_argument("n_trials must be >= 1");
  if (const auto* f = std::get_if<FixedStart>(&initial); f && f->theta.dim() != mu.dim())
    throw std::invalid_argument("fixed start dimension does not match the measure");
}

SkewState initial_state(const ChainConfig& cfg, Rng& rng) {
  const std::size_t d = cfg.mu.dim();
  if (const auto* f = std::get_if<FixedStart>(&cfg.initial)) {
    const std::vector<TorusPoint> zeros(cfg.window_w, TorusPoint(d));
    return SkewState(f->theta, cfg.window_w, zeros);
  }
  TorusPoint theta(d);
  for (std::size_t a = 0; a < d; ++a) theta.set(a, rng.uniform());
  std::vector<TorusPoint> history;
  history.reserve(cfg.window_w);
  for (std::size_t i = 0; i < cfg.window_w; ++i) history.push_back(cfg.mu.sample(rng));
  return SkewState(theta, cfg.window_w, history);
}

double birkhoff_sum(const ChainConfig& cfg, const StateObservable& phi, Rng& rng) {
  SkewState z = initial_state(cfg, rng);
  double s = 0.0;
  for (long j = 0; j < cfg.n_steps; ++j) {
    s += phi(z);
    if (j + 1 < cfg.n_steps) z.advance(cfg.mu.sample(rng));
  }
  return s;
}

std::vector<double> birkhoff_sums(const ChainConfig& cfg, const StateObservable& phi, ExecPolicy policy) {
  cfg.validate();
  return trial_values(static_cast<std::size_t>(cfg.n_trials), cfg.seed, policy,
                      [&](Rng& rng) { return birkhoff_sum(cfg, phi, rng); });
}

std::vector<double> birkhoff_sums_serial(const ChainConfig& cfg, const StateObservable& phi) {
  cfg.validate();
  return trial_values_serial(static_cast<std::size_t>(cfg.n_trials), cfg.seed,
                             [&](Rng& rng) { return birkhoff_sum(cfg, phi, rng); });
}

DeviationEstimate deviation_from_sums(std::span<const double> sums, long n, double mean, double epsilon) {
  if (sums.empty() || n < 1) throw std::invalid_argument("deviation estimate needs sums and n >= 1");
  std::size_t hits = 0;
  for (double s : sums)
    if (std::abs(s / static_cast<double>(n) - mean) > epsilon) ++hits;
  const auto trials = static_cast<double>(sums.size());
  const double p = static_cast<double>(hits) / trials;
  const double ci = std::max(1.96 * std::sqrt(p * (1.0 - p) / trials), 1.0 / trials);
  return {epsilon, n, p, ci, DeviationEstimate::Method::monte_carlo};
}

DeviationEstimate deviation_probability(const ChainConfig& cfg, const StateObservable& phi, double mean_value,
                                        double epsilon, ExecPolicy policy) {
  const auto sums = birkhoff_sums(cfg, phi, policy);
  return deviation_from_sums(sums, cfg.n_steps, mean_value, epsilon);
}

namespace {

struct ExactWalk {
  const std::vector<Atom>& atoms;
  const StateObservable& phi;
  long n;
  double mean;
  double epsilon;
  double mass = 0.0;

  void visit(const SkewState& z, long depth, double sum, double weight) {
    sum += phi(z);
    if (depth + 1 == n) {
      if (std::abs(sum / static_cast<double>(n) - mean) > epsilon) mass += weight;
      return;
    }
    for (const auto& a : atoms) visit(step(z, a.point), depth + 1, sum, weight * a.weight);
  }
};

}  // namespace

DeviationEstimate exact_deviation(const TorusMeasure& mu, const StateObservable& phi, const TorusPoint& theta0,
                                  double mean_value, double epsilon, long n, std::size_t window_w) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  const auto& atoms = mu.atoms();
  double paths = 1.0;
  for (long j = 0; j < n; ++j) {
    paths *= static_cast<double>(atoms.size());
    if (paths > 1e7) throw std::length_error("state space too large");
  }
  const std::vector<TorusPoint> zeros(window_w, TorusPoint(mu.dim()));
  const SkewState z(theta0, window_w, zeros);
  ExactWalk walk{atoms, phi, n, mean_value, epsilon};
  walk.visit(z, 0, 0.0, 1.0);
  return {epsilon, n, std::min(walk.mass, 1.0), 0.0, DeviationEstimate::Method::exact};
}

double estimate_holder_norm(const FourierObservable& phi, double alpha, std::uint64_t seed) {
  double sup = 0.0;
  for (double v : phi.evaluate_grid(phi.dim() == 1 ? 4096 : 64)) sup = std::max(sup, std::abs(v));
  const double v_alpha =
      holder_seminorm_sampled([&](const TorusPoint& x) { return phi(x); }, phi.dim(), alpha, 10000, seed);
  return sup + v_alpha;
}

double fit_power_constant(const FourierObservable& phi, const TorusMeasure& mu, double p, long n_max,
                          ExecPolicy policy) {
  if (n_max < 1) throw std::invalid_argument("n_max must be positive");
  std::vector<long> ns;
  for (long i = 0; i < 200; ++i) {
    const long n = std::lround(std::exp(static_cast<double>(i) / 199.0 * std::log(static_cast<double>(n_max))));
    if (ns.empty() || n > ns.back()) ns.push_back(n);
  }
  // only the bound column matters here, so the grid stays coarse
  const auto trace = decay_trace(phi, mu, ns, 64, policy);
  double c = 0.0;
  for (const auto& r : trace.rows) c = std::max(c, std::pow(static_cast<double>(r.n), p) * r.bound_value);
  return c;
}

LdtConstants ldt_constants(double C, double L, double p) {
  if (!(C > 0.0) || !(L > 0.0) || !(p > 0.0)) throw std::invalid_argument("LDT constants need C, L, p > 0");
  LdtConstants k{};
  k.clamped = C < 4.0 / 3.0;
  k.C = k.clamped ? 4.0 / 3.0 : C;
  k.L = L;
  k.p = p;
  const double base = 3.0 * k.C * L;
  k.c_bar = k.C * std::pow(base, -(2.0 + 1.0 / p));
  k.n_bar = std::pow(base, 1.0 / p);
  return k;
}

double ldt_threshold(const LdtConstants& k, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  return k.n_bar * std::pow(epsilon, -1.0 / k.p);
}

std::optional<double> ldt_bound(const LdtConstants& k, double epsilon, long n) {
  const double threshold = ldt_threshold(k, epsilon);
  if (static_cast<double>(n) < threshold * (1.0 - 1e-12)) return std::nullopt;
  return 8.0 * std::exp(-k.c_bar * std::pow(epsilon, 2.0 + 1.0 / k.p) * static_cast<double>(n));
}

LdtReport verify_ldt(const ChainConfig& cfg, const StateObservable& phi, double mean_value, double epsilon,
                     std::span<const long> n_grid, const LdtConstants& consts, ExecPolicy policy,
                     bool decay_expected) {
  LdtReport report{{}, std::nullopt, decay_expected, true};
  std::vector<double> xs, ys;
  for (long n : n_grid) {
    ChainConfig c = cfg;
    c.n_steps = n;
    const auto est = deviation_probability(c, phi, mean_value, epsilon, policy);
    const auto bound = ldt_bound(consts, epsilon, n);
    const bool pass = !bound || *bound >= est.p_hat - 3.0 * est.ci_halfwidth;
    report.rows.push_back({est, bound, pass});
    report.overall_pass = report.overall_pass && pass;
    if (est.p_hat > 0.0) {
      xs.push_back(static_cast<double>(n));
      ys.push_back(std::log(est.p_hat));
    }
  }
  if (xs.size() >= 2) report.slope = least_squares_line(xs, ys).slope;
  if (decay_expected && xs.size() >= 3 && !(*report.slope < 0.0)) report.overall_pass = false;
  return report;
}

}  // namespace mixlab
