#include "mixlab/measure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace mixlab {

namespace {

std::size_t cell_count(const std::vector<std::size_t>& resolution) {
  std::size_t n = 1;
  for (auto r : resolution) n *= r;
  return n;
}

std::size_t categorical(const std::vector<double>& cumulative, double u) {
  const double target = u * cumulative.back();
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
  if (it == cumulative.end()) --it;
  return static_cast<std::size_t>(it - cumulative.begin());
}

}  // namespace

TorusMeasure TorusMeasure::atomic(std::vector<Atom> atoms, double sum_tol) {
  if (atoms.empty()) throw std::invalid_argument("atomic measure needs at least one atom");
  const std::size_t dim = atoms.front().point.dim();
  double total = 0.0;
  std::vector<double> cumulative;
  cumulative.reserve(atoms.size());
  for (const auto& a : atoms) {
    if (a.point.dim() != dim) throw std::invalid_argument("atoms have mixed dimensions");
    if (!(a.weight > 0.0)) throw std::invalid_argument("atom weights must be strictly positive");
    total += a.weight;
    cumulative.push_back(total);
  }
  if (std::abs(total - 1.0) > sum_tol)
    throw std::invalid_argument("atom weights must sum to 1 (got " + std::to_string(total) + ")");
  return TorusMeasure(dim, Atomic{std::move(atoms), std::move(cumulative)});
}

TorusMeasure TorusMeasure::dirac(const TorusPoint& x) { return atomic({Atom{x, 1.0}}); }

TorusMeasure TorusMeasure::density(std::vector<std::size_t> resolution, std::vector<double> values) {
  if (resolution.empty() || resolution.size() > kMaxDim)
    throw std::invalid_argument("density grid dimension out of range");
  for (auto r : resolution)
    if (r == 0) throw std::invalid_argument("density grid resolution must be positive");
  const std::size_t cells = cell_count(resolution);
  if (values.size() != cells)
    throw std::invalid_argument("density grid expects " + std::to_string(cells) + " values");
  std::vector<double> cumulative(cells);
  double running = 0.0;
  for (std::size_t i = 0; i < cells; ++i) {
    if (!(values[i] >= 0.0) || !std::isfinite(values[i]))
      throw std::invalid_argument("density values must be finite and nonnegative");
    running += values[i];
    cumulative[i] = running;
  }
  const double integral = running / static_cast<double>(cells);
  if (std::abs(integral - 1.0) > 1e-10)
    throw std::invalid_argument("density must integrate to 1 (got " + std::to_string(integral) + ")");
  const std::size_t dim = resolution.size();
  return TorusMeasure(dim, DensityGrid{std::move(resolution), std::move(values), std::move(cumulative)});
}

TorusMeasure TorusMeasure::lebesgue(std::size_t dim, std::size_t resolution) {
  if (resolution == 0) resolution = dim == 1 ? 1024 : 128;
  std::vector<std::size_t> res(dim, resolution);
  return density(res, std::vector<double>(cell_count(res), 1.0));
}

TorusMeasure TorusMeasure::mixture(double t, TorusMeasure first, TorusMeasure second) {
  if (!(t > 0.0 && t <= 1.0)) throw std::invalid_argument("mixture weight t must lie in (0,1]");
  if (first.dim() != second.dim()) throw std::invalid_argument("mixture components differ in dimension");
  const std::size_t dim = first.dim();
  return TorusMeasure(dim, Mixture{t, std::make_shared<const TorusMeasure>(std::move(first)),
                                   std::make_shared<const TorusMeasure>(std::move(second))});
}

const std::vector<Atom>& TorusMeasure::atoms() const {
  if (const auto* a = std::get_if<Atomic>(&rep_)) return a->atoms;
  throw std::logic_error("measure is not atomic");
}

std::complex<double> TorusMeasure::fourier_coefficient(const LatticeVector& k) const {
  if (k.dim() != dim_) throw std::invalid_argument("lattice vector dimension does not match measure");
  if (const auto* a = std::get_if<Atomic>(&rep_)) {
    std::complex<double> s{0.0, 0.0};
    for (const auto& atom : a->atoms) s += atom.weight * character(k, atom.point);
    return s;
  }
  if (const auto* g = std::get_if<DensityGrid>(&rep_)) {
    // separable characters: one table per axis
    std::vector<std::vector<std::complex<double>>> axis(dim_);
    for (std::size_t ax = 0; ax < dim_; ++ax) {
      const std::size_t r = g->resolution[ax];
      axis[ax].resize(r);
      for (std::size_t j = 0; j < r; ++j) {
        const double x = (static_cast<double>(j) + 0.5) / static_cast<double>(r);
        axis[ax][j] = std::polar(1.0, kTwoPi * wrap01(static_cast<double>(k[ax]) * x));
      }
    }
    std::complex<double> s{0.0, 0.0};
    const std::size_t cells = g->values.size();
    for (std::size_t flat = 0; flat < cells; ++flat) {
      std::size_t rest = flat;
      std::complex<double> e{1.0, 0.0};
      for (std::size_t ax = 0; ax < dim_; ++ax) {
        e *= axis[ax][rest % g->resolution[ax]];
        rest /= g->resolution[ax];
      }
      s += g->values[flat] * e;
    }
    return s / static_cast<double>(cells);
  }
  const auto& m = std::get<Mixture>(rep_);
  return m.t * m.first->fourier_coefficient(k) + (1.0 - m.t) * m.second->fourier_coefficient(k);
}

TorusPoint TorusMeasure::sample(Rng& rng) const {
  if (const auto* a = std::get_if<Atomic>(&rep_)) {
    if (a->atoms.size() == 1) return a->atoms.front().point;
    return a->atoms[categorical(a->cumulative, rng.uniform())].point;
  }
  if (const auto* g = std::get_if<DensityGrid>(&rep_)) {
    std::size_t flat = categorical(g->cumulative, rng.uniform());
    TorusPoint x(dim_);
    for (std::size_t ax = 0; ax < dim_; ++ax) {
      const std::size_t r = g->resolution[ax];
      const std::size_t j = flat % r;
      flat /= r;
      x.set(ax, (static_cast<double>(j) + rng.uniform()) / static_cast<double>(r));
    }
    return x;
  }
  const auto& m = std::get<Mixture>(rep_);
  return rng.uniform() < m.t ? m.first->sample(rng) : m.second->sample(rng);
}

std::vector<std::complex<double>> fourier_table(const TorusMeasure& mu, const LatticeBox& box) {
  if (box.dim() != mu.dim()) throw std::invalid_argument("lattice box dimension does not match measure");
  std::vector<std::complex<double>> table(box.size());
  const std::size_t c = box.center();
  table[c] = mu.fourier_coefficient(box.point(c));
  // Hermitian symmetry of a real measure: fill the negative half by conjugation
  for (std::size_t i = c + 1; i < box.size(); ++i) {
    table[i] = mu.fourier_coefficient(box.point(i));
    table[box.negated(i)] = std::conj(table[i]);
  }
  return table;
}

DCReport check_mixing_dc(const TorusMeasure& mu, const MixingDCParams& params) {
  if (!(params.gamma > 0.0) || !(params.tau > 0.0) || params.k_max < 1)
    throw std::invalid_argument("mixing DC parameters need gamma > 0, tau > 0, k_max >= 1");
  const LatticeBox box(mu.dim(), params.k_max);
  DCReport report{true, LatticeVector(mu.dim()), std::numeric_limits<double>::infinity()};
  // |mu-hat(-k)| = |mu-hat(k)| and |-k| = |k|: the upper half of the box suffices
  for (std::size_t i = box.center() + 1; i < box.size(); ++i) {
    const LatticeVector k = box.point(i);
    const double modulus = std::abs(mu.fourier_coefficient(k));
    const double margin = (1.0 - modulus) * std::pow(static_cast<double>(k.sup_norm()), params.tau) - params.gamma;
    if (margin < report.worst_margin) {
      report.worst_margin = margin;
      report.worst_k = k;
    }
  }
  report.holds_up_to_kmax = report.worst_margin >= 0.0;
  return report;
}

DCFit fit_mixing_dc(const TorusMeasure& mu, int k_max, std::span<const double> tau_grid) {
  if (tau_grid.empty()) throw std::invalid_argument("tau grid must be nonempty");
  for (double tau : tau_grid)
    if (!(tau > 0.0)) throw std::invalid_argument("tau grid entries must be positive");
  if (k_max < 1) throw std::invalid_argument("k_max must be >= 1");

  const LatticeBox box(mu.dim(), k_max);
  std::vector<double> gaps;   // 1 - |mu-hat(k)|
  std::vector<double> norms;  // |k|
  for (std::size_t i = box.center() + 1; i < box.size(); ++i) {
    const LatticeVector k = box.point(i);
    gaps.push_back(1.0 - std::abs(mu.fourier_coefficient(k)));
    norms.push_back(static_cast<double>(k.sup_norm()));
  }

  DCFit fit{0.0, 0.0, {}};
  bool found = false;
  for (double tau : tau_grid) {
    double gamma = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < gaps.size(); ++j) gamma = std::min(gamma, gaps[j] * std::pow(norms[j], tau));
    fit.gamma_by_tau.push_back(gamma);
    if (gamma > 1e-9 && (!found || tau < fit.tau_star)) {
      fit.gamma_star = gamma;
      fit.tau_star = tau;
      found = true;
    }
  }
  if (!found) throw std::domain_error("degenerate measure");
  return fit;
}

bool is_ergodic_condition(const TorusMeasure& mu, int k_max) {
  if (k_max < 1) throw std::invalid_argument("k_max must be >= 1");
  const LatticeBox box(mu.dim(), k_max);
  for (std::size_t i = box.center() + 1; i < box.size(); ++i)
    if (std::abs(mu.fourier_coefficient(box.point(i)) - 1.0) <= 1e-12) return false;
  return true;
}

}  // namespace mixlab
