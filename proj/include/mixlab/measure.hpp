#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mixlab/rng.hpp"
#include "mixlab/torus.hpp"

namespace mixlab {

struct Atom {
  TorusPoint point;
  double weight;
};

/// Probability measure on T^d: finitely many atoms, a density sampled on a
/// uniform midpoint grid, or a convex mixture of two such measures.
/// Immutable after construction.
class TorusMeasure {
 public:
  struct Atomic {
    std::vector<Atom> atoms;
    std::vector<double> cumulative;  // for categorical draws
  };
  struct DensityGrid {
    std::vector<std::size_t> resolution;  // per axis
    std::vector<double> values;           // first axis fastest
    std::vector<double> cumulative;       // cell masses, running sum
  };
  struct Mixture {
    double t;
    std::shared_ptr<const TorusMeasure> first;
    std::shared_ptr<const TorusMeasure> second;
  };

  /// Weights must be positive and sum to 1 within `sum_tol`.
  static TorusMeasure atomic(std::vector<Atom> atoms, double sum_tol = 1e-12);
  static TorusMeasure dirac(const TorusPoint& x);
  /// Midpoint-rule density; values >= 0 with grid integral 1 within 1e-10.
  static TorusMeasure density(std::vector<std::size_t> resolution, std::vector<double> values);
  /// Haar measure as a constant density; resolution 0 picks 1024 (d=1) or 128.
  static TorusMeasure lebesgue(std::size_t dim = 1, std::size_t resolution = 0);
  /// t * first + (1 - t) * second, t in (0,1].
  static TorusMeasure mixture(double t, TorusMeasure first, TorusMeasure second);

  std::size_t dim() const noexcept { return dim_; }
  const auto& representation() const noexcept { return rep_; }
  bool is_atomic() const noexcept { return std::holds_alternative<Atomic>(rep_); }
  /// Atoms of an Atomic measure; throws for other kinds.
  const std::vector<Atom>& atoms() const;

  /// integral of e^{2 pi i <k,x>} d mu(x)
  std::complex<double> fourier_coefficient(const LatticeVector& k) const;

  TorusPoint sample(Rng& rng) const;

 private:
  TorusMeasure(std::size_t dim, std::variant<Atomic, DensityGrid, Mixture> rep)
      : dim_(dim), rep_(std::move(rep)) {}

  std::size_t dim_;
  std::variant<Atomic, DensityGrid, Mixture> rep_;
};

inline std::complex<double> fourier_coefficient(const TorusMeasure& mu, const LatticeVector& k) {
  return mu.fourier_coefficient(k);
}

/// mu-hat on every point of a lattice box, in box index order.
std::vector<std::complex<double>> fourier_table(const TorusMeasure& mu, const LatticeBox& box);

struct MixingDCParams {
  double gamma;
  double tau;
  int k_max;
};

struct DCReport {
  bool holds_up_to_kmax;
  LatticeVector worst_k;
  /// min over 0 < |k| <= k_max of (1 - |mu-hat(k)|) |k|^tau - gamma
  double worst_margin;
};

/// Scan of the mixing Diophantine inequality |mu-hat(k)| <= 1 - gamma/|k|^tau
/// over the box 0 < |k|_inf <= k_max.
DCReport check_mixing_dc(const TorusMeasure& mu, const MixingDCParams& params);

struct DCFit {
  double gamma_star;
  double tau_star;
  std::vector<double> gamma_by_tau;  // aligned with the tau grid
};

/// For each tau: gamma(tau) = min (1 - |mu-hat(k)|) |k|^tau over the box.
/// Picks the smallest tau with gamma(tau) > 1e-9 (largest proxy exponent 1/tau).
/// Throws std::domain_error("degenerate measure") when no tau qualifies.
DCFit fit_mixing_dc(const TorusMeasure& mu, int k_max, std::span<const double> tau_grid);

/// True iff |mu-hat(k) - 1| > 1e-12 for every 0 < |k|_inf <= k_max.
bool is_ergodic_condition(const TorusMeasure& mu, int k_max);

}  // namespace mixlab
