#include "mixlab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "mixlab/rng.hpp"
#include "mixlab/stats.hpp"

namespace mixlab {

namespace {

constexpr double kHermitianTol = 1e-12;

// z^j for j in [0, N], z = e^{2 pi i x}. Negative powers are conjugates.
void unit_powers(double x, int N, std::vector<std::complex<double>>& out) {
  out.resize(static_cast<std::size_t>(N) + 1);
  out[0] = {1.0, 0.0};
  if (N == 0) return;
  const std::complex<double> z = std::polar(1.0, kTwoPi * wrap01(x));
  for (int j = 1; j <= N; ++j) {
    // re-anchor every 64 steps to keep the recurrence error flat
    out[static_cast<std::size_t>(j)] =
        (j % 64 == 0) ? std::polar(1.0, kTwoPi * wrap01(static_cast<double>(j) * x))
                      : out[static_cast<std::size_t>(j) - 1] * z;
  }
}

std::complex<double> power_entry(const std::vector<std::complex<double>>& pw, int j) {
  return j >= 0 ? pw[static_cast<std::size_t>(j)] : std::conj(pw[static_cast<std::size_t>(-j)]);
}

// Sum of the series at x, using Hermitian symmetry: c_0 + 2 Re sum_{upper half}.
double evaluate_series(const LatticeBox& box, std::span<const std::complex<double>> c, const TorusPoint& x,
                       std::vector<std::vector<std::complex<double>>>& scratch) {
  const std::size_t dim = box.dim();
  const int N = box.radius();
  scratch.resize(dim);
  for (std::size_t a = 0; a < dim; ++a) unit_powers(x[a], N, scratch[a]);
  double s = 0.0;
  if (dim == 1) {
    for (int k = 1; k <= N; ++k) {
      const auto& ck = c[static_cast<std::size_t>(k + N)];
      const auto& zk = scratch[0][static_cast<std::size_t>(k)];
      s += ck.real() * zk.real() - ck.imag() * zk.imag();
    }
  } else {
    for (std::size_t i = box.center() + 1; i < box.size(); ++i) {
      if (c[i] == std::complex<double>{}) continue;
      const LatticeVector k = box.point(i);
      std::complex<double> e{1.0, 0.0};
      for (std::size_t a = 0; a < dim; ++a) e *= power_entry(scratch[a], k[a]);
      s += (c[i] * e).real();
    }
  }
  return c[box.center()].real() + 2.0 * s;
}

std::vector<std::complex<double>> coefficient_powers(const LatticeBox& box,
                                                     const std::vector<std::complex<double>>& mu_hat,
                                                     std::span<const std::complex<double>> c, long n,
                                                     double& bound) {
  std::vector<std::complex<double>> out(box.size(), {0.0, 0.0});
  const auto nd = static_cast<double>(n);
  double b = 0.0;
  for (std::size_t i = box.center() + 1; i < box.size(); ++i) {
    if (c[i] == std::complex<double>{}) continue;
    const double r = std::abs(mu_hat[i]);
    const double rn = n == 0 ? 1.0 : std::pow(r, nd);
    const std::complex<double> mn = n == 0 ? std::complex<double>{1.0, 0.0} : std::polar(rn, nd * std::arg(mu_hat[i]));
    out[i] = mn * c[i];
    out[box.negated(i)] = std::conj(out[i]);
    b += 2.0 * rn * std::abs(c[i]);
  }
  bound = b;
  return out;
}

Deviation deviation_from_table(const FourierObservable& phi, const std::vector<std::complex<double>>& mu_hat,
                               long n, std::size_t grid) {
  if (n < 0) throw std::invalid_argument("n must be nonnegative");
  Deviation dev{};
  auto coeffs = coefficient_powers(phi.box(), mu_hat, phi.coefficients(), n, dev.bound);
  const FourierObservable centered(phi.dim(), phi.radius(), std::move(coeffs));
  const auto values = centered.evaluate_grid(grid);
  double sup = 0.0;
  for (double v : values) sup = std::max(sup, std::abs(v));
  dev.grid_sup = sup;
  return dev;
}

void validate_n_list(std::span<const long> n_list) {
  for (std::size_t i = 0; i < n_list.size(); ++i) {
    if (n_list[i] < 1) throw std::invalid_argument("trace n values must be positive");
    if (i > 0 && n_list[i] <= n_list[i - 1]) throw std::invalid_argument("trace n values must be strictly increasing");
  }
}

void enforce_trace_invariants(const DecayTrace& trace) {
  for (std::size_t i = 0; i < trace.rows.size(); ++i) {
    const auto& r = trace.rows[i];
    if (r.bound_value < r.grid_sup_value - 1e-9)
      throw std::logic_error("decay trace: grid sup exceeds coefficient bound at n=" + std::to_string(r.n));
    if (i > 0 && r.bound_value > trace.rows[i - 1].bound_value * (1.0 + 1e-14))
      throw std::logic_error("decay trace: bound increased at n=" + std::to_string(r.n));
  }
}

}  // namespace

FourierObservable::FourierObservable(std::size_t dim, int radius, std::vector<std::complex<double>> coeffs)
    : box_(dim, radius), coeffs_(std::move(coeffs)) {
  if (coeffs_.size() != box_.size())
    throw std::invalid_argument("expected " + std::to_string(box_.size()) + " Fourier coefficients");
  for (std::size_t i = box_.center(); i < box_.size(); ++i) {
    if (std::abs(coeffs_[box_.negated(i)] - std::conj(coeffs_[i])) > kHermitianTol)
      throw std::invalid_argument("coefficients are not Hermitian-symmetric at k=" + box_.point(i).to_string());
  }
}

FourierObservable FourierObservable::constant(std::size_t dim, double value) {
  return FourierObservable(dim, 0, {{value, 0.0}});
}

FourierObservable FourierObservable::cosine(const LatticeVector& k, double amplitude) {
  const LatticeBox box(k.dim(), k.sup_norm());
  std::vector<std::complex<double>> c(box.size());
  if (k.is_zero()) {
    c[box.center()] = amplitude;
  } else {
    c[box.index(k)] += amplitude / 2.0;
    c[box.index(-k)] += amplitude / 2.0;
  }
  return FourierObservable(k.dim(), k.sup_norm(), std::move(c));
}

FourierObservable FourierObservable::sine(const LatticeVector& k, double amplitude) {
  const LatticeBox box(k.dim(), k.sup_norm());
  std::vector<std::complex<double>> c(box.size());
  if (!k.is_zero()) {
    // sin t = (e^{it} - e^{-it}) / 2i
    c[box.index(k)] = {0.0, -amplitude / 2.0};
    c[box.index(-k)] = {0.0, amplitude / 2.0};
  }
  return FourierObservable(k.dim(), k.sup_norm(), std::move(c));
}

FourierObservable FourierObservable::sum_cos_k2(int K) {
  if (K < 1) throw std::invalid_argument("sum_cos_k2 needs K >= 1");
  std::vector<std::complex<double>> c(static_cast<std::size_t>(2 * K + 1));
  for (int k = 1; k <= K; ++k) {
    const double v = 0.5 / (static_cast<double>(k) * k);
    c[static_cast<std::size_t>(K + k)] = v;
    c[static_cast<std::size_t>(K - k)] = v;
  }
  return FourierObservable(1, K, std::move(c));
}

FourierObservable FourierObservable::triangle(int N) {
  if (N < 1) throw std::invalid_argument("triangle needs N >= 1");
  std::vector<std::complex<double>> c(static_cast<std::size_t>(2 * N + 1));
  for (int k = 1; k <= N; k += 2) {
    const double v = 1.0 / (std::numbers::pi * std::numbers::pi * k * k);
    c[static_cast<std::size_t>(N + k)] = v;
    c[static_cast<std::size_t>(N - k)] = v;
  }
  FourierObservable phi(1, N, std::move(c));
  phi.holder_alpha = 1.0;
  return phi;
}

std::complex<double> FourierObservable::coefficient(const LatticeVector& k) const {
  if (k.dim() != dim()) throw std::invalid_argument("lattice vector dimension mismatch");
  if (!box_.contains(k)) return {0.0, 0.0};
  return coeffs_[box_.index(k)];
}

double FourierObservable::operator()(const TorusPoint& x) const {
  if (x.dim() != dim()) throw std::invalid_argument("evaluation point dimension mismatch");
  thread_local std::vector<std::vector<std::complex<double>>> scratch;
  return evaluate_series(box_, coeffs_, x, scratch);
}

std::vector<double> FourierObservable::evaluate_grid(std::size_t resolution) const {
  if (dim() > 2) throw std::invalid_argument("grid evaluation supports d <= 2");
  if (resolution == 0) throw std::invalid_argument("grid resolution must be positive");
  std::size_t total = resolution;
  if (dim() == 2) total *= resolution;
  std::vector<double> out(total);
  std::vector<std::vector<std::complex<double>>> scratch;
  const auto r = static_cast<double>(resolution);
  for (std::size_t flat = 0; flat < total; ++flat) {
    TorusPoint x(dim());
    x.set(0, static_cast<double>(flat % resolution) / r);
    if (dim() == 2) x.set(1, static_cast<double>(flat / resolution) / r);
    out[flat] = evaluate_series(box_, coeffs_, x, scratch);
  }
  return out;
}

FourierObservable FourierObservable::operator+(const FourierObservable& o) const {
  if (o.dim() != dim()) throw std::invalid_argument("observable dimension mismatch");
  const int R = std::max(radius(), o.radius());
  const LatticeBox box(dim(), R);
  std::vector<std::complex<double>> c(box.size());
  for (const auto* src : {this, &o}) {
    for (std::size_t i = 0; i < src->box_.size(); ++i) c[box.index(src->box_.point(i))] += src->coeffs_[i];
  }
  return FourierObservable(dim(), R, std::move(c));
}

FourierObservable FourierObservable::operator*(double a) const {
  auto c = coeffs_;
  for (auto& v : c) v *= a;
  return FourierObservable(dim(), radius(), std::move(c));
}

FourierObservable apply_markov(const FourierObservable& phi, const TorusMeasure& mu) {
  if (phi.dim() != mu.dim()) throw std::invalid_argument("observable and measure dimensions differ");
  const auto mu_hat = fourier_table(mu, phi.box());
  std::vector<std::complex<double>> c(phi.coefficients().begin(), phi.coefficients().end());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] *= mu_hat[i];
  FourierObservable out(phi.dim(), phi.radius(), std::move(c));
  out.holder_alpha = phi.holder_alpha;
  return out;
}

Deviation deviation_after_n(const FourierObservable& phi, const TorusMeasure& mu, long n, std::size_t grid) {
  if (phi.dim() != mu.dim()) throw std::invalid_argument("observable and measure dimensions differ");
  return deviation_from_table(phi, fourier_table(mu, phi.box()), n, grid);
}

DecayTrace decay_trace(const FourierObservable& phi, const TorusMeasure& mu, std::span<const long> n_list,
                       std::size_t grid, ExecPolicy policy) {
  if (phi.dim() != mu.dim()) throw std::invalid_argument("observable and measure dimensions differ");
  validate_n_list(n_list);
  const auto mu_hat = fourier_table(mu, phi.box());
  const auto devs = map_indices(n_list.size(), policy, [&](std::size_t i) {
    return deviation_from_table(phi, mu_hat, n_list[i], grid);
  });
  DecayTrace trace;
  trace.rows.reserve(n_list.size());
  for (std::size_t i = 0; i < n_list.size(); ++i) trace.rows.push_back({n_list[i], devs[i].bound, devs[i].grid_sup});
  enforce_trace_invariants(trace);
  return trace;
}

DecayTrace decay_trace_serial(const FourierObservable& phi, const TorusMeasure& mu, std::span<const long> n_list,
                              std::size_t grid) {
  if (phi.dim() != mu.dim()) throw std::invalid_argument("observable and measure dimensions differ");
  validate_n_list(n_list);
  const auto mu_hat = fourier_table(mu, phi.box());
  DecayTrace trace;
  for (long n : n_list) {
    const auto d = deviation_from_table(phi, mu_hat, n, grid);
    trace.rows.push_back({n, d.bound, d.grid_sup});
  }
  enforce_trace_invariants(trace);
  return trace;
}

MixingProfile fit_power_rate(const DecayTrace& trace, long n_lo, long n_hi) {
  std::vector<double> xs, ys;
  for (const auto& r : trace.rows) {
    if (r.n < n_lo || r.n > n_hi || !(r.bound_value > 1e-300)) continue;
    xs.push_back(std::log(static_cast<double>(r.n)));
    ys.push_back(std::log(r.bound_value));
  }
  if (xs.size() < 3) throw std::domain_error("insufficient points");
  const auto line = least_squares_line(xs, ys);
  MixingProfile prof;
  prof.rate_kind = MixingProfile::Rate::power;
  prof.p = -line.slope;
  prof.C = std::exp(line.intercept);
  prof.provenance = MixingProfile::Provenance::fitted;
  return prof;
}

long jackson_degree(long n, double gamma, double tau) {
  if (n < 1 || !(gamma > 0.0) || !(tau > 0.0)) throw std::invalid_argument("jackson_degree needs n >= 1, gamma > 0, tau > 0");
  const double v = std::pow(static_cast<double>(n) * gamma, 9.0 / (10.0 * tau));
  // exact powers such as 1024^0.3 = 8 can land one ulp low
  const auto N = static_cast<long>(std::floor(v * (1.0 + 1e-12)));
  return std::max(N, 1L);
}

std::vector<double> jackson_taper(int N) {
  if (N < 0) throw std::invalid_argument("Jackson degree must be nonnegative");
  const int m = N / 2 + 1;
  auto a = [m](int j) { return std::abs(j) < m ? 1.0 - static_cast<double>(std::abs(j)) / m : 0.0; };
  auto b = [&](int k) {
    double s = 0.0;
    for (int j = -(m - 1); j <= m - 1; ++j) s += a(j) * a(k - j);
    return s;
  };
  const double b0 = b(0);
  std::vector<double> rho(static_cast<std::size_t>(2 * N + 1));
  for (int k = -N; k <= N; ++k) rho[static_cast<std::size_t>(k + N)] = b(k) / b0;
  return rho;
}

double holder_seminorm_sampled(const TorusFunction& f, std::size_t dim, double alpha, std::size_t n_pairs,
                               std::uint64_t seed) {
  Rng rng(seed);
  double best = 0.0;
  for (std::size_t i = 0; i < n_pairs; ++i) {
    TorusPoint x(dim), y(dim);
    const bool close = (i % 2) == 1;
    const double scale = close ? std::pow(10.0, -1.0 - 5.0 * rng.uniform()) : 1.0;
    for (std::size_t a = 0; a < dim; ++a) {
      x.set(a, rng.uniform());
      y.set(a, close ? x[a] + scale * (2.0 * rng.uniform() - 1.0) : rng.uniform());
    }
    const double d = torus_distance(x, y);
    if (d <= 0.0) continue;
    best = std::max(best, std::abs(f(x) - f(y)) / std::pow(d, alpha));
  }
  return best;
}

FourierObservable holder_to_fourier(const TorusFunction& f, std::size_t dim, double alpha, int N,
                                    std::size_t sample_resolution, const HolderToFourierOptions& opts) {
  if (dim < 1 || dim > 2) throw std::invalid_argument("holder_to_fourier supports d <= 2");
  if (N < 0) throw std::invalid_argument("degree must be nonnegative");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0,1]");
  if (sample_resolution <= static_cast<std::size_t>(2 * N)) throw std::invalid_argument("resolution too low");

  const std::size_t M = sample_resolution;
  const std::size_t total = dim == 1 ? M : M * M;
  std::vector<double> samples(total);
  double sup = 0.0;
  for (std::size_t flat = 0; flat < total; ++flat) {
    TorusPoint x(dim);
    x.set(0, static_cast<double>(flat % M) / static_cast<double>(M));
    if (dim == 2) x.set(1, static_cast<double>(flat / M) / static_cast<double>(M));
    samples[flat] = f(x);
    sup = std::max(sup, std::abs(samples[flat]));
  }

  // e^{-2 pi i k j / M} for k in [-N, N], j in [0, M)
  const std::size_t side = static_cast<std::size_t>(2 * N + 1);
  std::vector<std::complex<double>> twiddle(side * M);
  for (int k = -N; k <= N; ++k)
    for (std::size_t j = 0; j < M; ++j) {
      const double phase = wrap01(-static_cast<double>(k) * static_cast<double>(j) / static_cast<double>(M));
      twiddle[static_cast<std::size_t>(k + N) * M + j] = std::polar(1.0, kTwoPi * phase);
    }

  const LatticeBox box(dim, N);
  std::vector<std::complex<double>> raw(box.size());
  if (dim == 1) {
    for (std::size_t kk = 0; kk < side; ++kk) {
      std::complex<double> s{};
      for (std::size_t j = 0; j < M; ++j) s += samples[j] * twiddle[kk * M + j];
      raw[kk] = s / static_cast<double>(M);
    }
  } else {
    // transform along axis 0, then axis 1
    std::vector<std::complex<double>> partial(side * M);  // [k0][j1]
    for (std::size_t k0 = 0; k0 < side; ++k0)
      for (std::size_t j1 = 0; j1 < M; ++j1) {
        std::complex<double> s{};
        for (std::size_t j0 = 0; j0 < M; ++j0) s += samples[j1 * M + j0] * twiddle[k0 * M + j0];
        partial[k0 * M + j1] = s;
      }
    for (std::size_t k1 = 0; k1 < side; ++k1)
      for (std::size_t k0 = 0; k0 < side; ++k0) {
        std::complex<double> s{};
        for (std::size_t j1 = 0; j1 < M; ++j1) s += partial[k0 * M + j1] * twiddle[k1 * M + j1];
        raw[k1 * side + k0] = s / static_cast<double>(M * M);
      }
  }

  const auto rho = jackson_taper(N);
  std::vector<std::complex<double>> c(box.size());
  for (std::size_t i = 0; i < box.size(); ++i) {
    const LatticeVector k = box.point(i);
    double w = 1.0;
    for (std::size_t a = 0; a < dim; ++a) w *= rho[static_cast<std::size_t>(k[a] + N)];
    c[i] = w * raw[i];
  }
  c[box.center()] = c[box.center()].real();
  for (std::size_t i = box.center() + 1; i < box.size(); ++i) c[box.negated(i)] = std::conj(c[i]);

  FourierObservable phi(dim, N, std::move(c));
  const double v_alpha = holder_seminorm_sampled(f, dim, alpha, opts.n_pairs, opts.seed);

  // int_{-1/2}^{1/2} |t|^alpha J_N(t) dt by the midpoint rule
  constexpr std::size_t kQuad = 8192;
  double moment = 0.0;
  for (std::size_t q = 0; q < kQuad; ++q) {
    const double t = -0.5 + (static_cast<double>(q) + 0.5) / kQuad;
    double kernel = rho[static_cast<std::size_t>(N)];
    for (int k = 1; k <= N; ++k) kernel += 2.0 * rho[static_cast<std::size_t>(k + N)] * std::cos(kTwoPi * k * t);
    moment += std::pow(std::abs(t), alpha) * kernel;
  }
  moment /= kQuad;

  phi.holder_alpha = alpha;
  phi.holder_norm_bound = sup + v_alpha;
  phi.truncation_bound = v_alpha * static_cast<double>(dim) * moment;
  return phi;
}

}  // namespace mixlab
