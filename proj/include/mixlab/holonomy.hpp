#pragma once

// Skew product f(omega, theta) = (sigma omega, theta + omega_0) on
// Sigma x T^d with Sigma = (T^d)^Z and (sigma omega)_j = omega_{j+1}.
// Everything here works with window observables, so every series is finite.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "mixlab/measure.hpp"
#include "mixlab/parallel.hpp"
#include "mixlab/rng.hpp"
#include "mixlab/torus.hpp"

namespace mixlab {

/// Two-sided symbol sequence stored on [lo, hi]. Reads left of lo return
/// left_fill, reads right of hi return right_fill.
class BiSequence {
 public:
  BiSequence(long lo, std::vector<TorusPoint> symbols, TorusPoint left_fill, TorusPoint right_fill);
  /// All fills and stored symbols equal to `fill`.
  static BiSequence constant(long lo, long hi, const TorusPoint& fill);

  std::size_t dim() const noexcept { return left_fill_.dim(); }
  long lo() const noexcept { return lo_; }
  long hi() const noexcept { return lo_ + static_cast<long>(symbols_.size()) - 1; }
  bool stores(long j) const noexcept { return j >= lo() && j <= hi(); }
  const TorusPoint& at(long j) const noexcept;
  void set(long j, const TorusPoint& value);
  const TorusPoint& left_fill() const noexcept { return left_fill_; }
  const TorusPoint& right_fill() const noexcept { return right_fill_; }
  void set_left_fill(const TorusPoint& p) { left_fill_ = p; }
  void set_right_fill(const TorusPoint& p) { right_fill_ = p; }

  /// sigma: new(j) = old(j+1). Only relabels indices.
  void shift_left() noexcept { --lo_; }
  /// sigma^{-1}: new(j) = old(j-1).
  void shift_right() noexcept { ++lo_; }

 private:
  long lo_;
  std::vector<TorusPoint> symbols_;
  TorusPoint left_fill_;
  TorusPoint right_fill_;
};

struct SkewPoint {
  BiSequence omega;
  TorusPoint theta;
};

/// 2^{-m}, m = min |j| with omega_j != omega'_j (torus distance > 1e-15),
/// fills included; 0 when the sequences agree everywhere.
double shift_metric(const BiSequence& x, const BiSequence& y);

/// (sigma omega, theta + omega_0).
SkewPoint skew_forward(SkewPoint x);
/// (sigma^{-1} omega, theta - omega_{-1}). Throws std::out_of_range("window
/// exhausted") unless omega_{-1} is stored.
SkewPoint skew_inverse(SkewPoint x);
/// Replaces omega_j, j >= 1, and the right fill by p_plus.
SkewPoint future_project(SkewPoint x, const TorusPoint& p_plus);

/// Real function of (omega_lo, ..., omega_hi, theta).
class WindowObservable {
 public:
  using SliceFn = std::function<double(std::span<const TorusPoint>, const TorusPoint&)>;
  using StateFn = std::function<double(const SkewPoint&)>;

  /// Symmetric window |j| <= w.
  WindowObservable(std::size_t dim, long w, SliceFn fn, std::optional<double> alpha = std::nullopt);
  WindowObservable(std::size_t dim, long lo, long hi, SliceFn fn, std::optional<double> alpha = std::nullopt);
  /// Wraps a function of the whole state that is claimed to read only
  /// [lo, hi]. The claim is spot-checked with 100 random perturbations outside
  /// the window; throws std::invalid_argument if any changes the value by
  /// more than 1e-12.
  static WindowObservable from_state(std::size_t dim, long lo, long hi, StateFn fn,
                                     std::optional<double> alpha = std::nullopt);
  static WindowObservable constant(std::size_t dim, double c);
  /// u(theta), window 0.
  static WindowObservable on_theta(std::size_t dim, std::function<double(const TorusPoint&)> u);

  double operator()(const SkewPoint& x) const { return fn_(x); }

  std::size_t dim() const noexcept { return dim_; }
  long lo() const noexcept { return lo_; }
  long hi() const noexcept { return hi_; }
  /// Smallest w with [lo, hi] inside [-w, w].
  long window() const noexcept;

  std::optional<double> alpha;

  WindowObservable operator+(const WindowObservable& o) const;
  WindowObservable operator*(double a) const;

 private:
  WindowObservable(std::size_t dim, long lo, long hi, StateFn fn, std::optional<double> alpha, int);

  std::size_t dim_;
  long lo_, hi_;
  StateFn fn_;
};

/// Random state with omega_j uniform on T^d for j in [lo, hi], uniform fills
/// and theta uniform.
SkewPoint random_state(std::size_t dim, long lo, long hi, Rng& rng);
/// Stationary-law state: omega_j i.i.d. mu on [lo, hi], fills drawn from mu,
/// theta uniform.
SkewPoint random_state(const TorusMeasure& mu, long lo, long hi, Rng& rng);

/// g_n = phi(f^{-n} b) - phi(f^{-n} a) for n = 1..n_terms.
std::vector<double> holonomy_terms(const WindowObservable& phi, const SkewPoint& a, const SkewPoint& b,
                                   long n_terms);

/// h^u(a, b) = sum_{n >= 1} [phi(f^{-n} b) - phi(f^{-n} a)] for a, b with
/// the same theta and the same omega_j, j <= 0. Terms vanish once n >= hi, so
/// the sum runs over n = 1..max(hi, 0). Throws std::invalid_argument("not on
/// same fiber") and propagates "window exhausted".
double unstable_holonomy(const WindowObservable& phi, const SkewPoint& a, const SkewPoint& b);

struct HolonomyPropertyReport {
  std::size_t pairs;
  double identity;      ///< max |h(a,a)|
  double antisymmetry;  ///< max |h(a,b) + h(b,a)|
  double additivity;    ///< max |h(a,c) - h(a,b) - h(b,c)|
  double cocycle;       ///< max |h(a,b) + phi(b) - phi(a) - h(fa,fb)|, b agreeing with a up to index 1
  double tail;          ///< max |term n| for n in H+1 .. H+10
};

/// Randomized check of the holonomy properties on `n_pairs` fiber pairs drawn
/// from mu (symbols and fills), pair i from stream (seed, i).
HolonomyPropertyReport check_holonomy_properties(const WindowObservable& phi, const TorusMeasure& mu,
                                                 std::size_t n_pairs, std::uint64_t seed, ExecPolicy policy = {});

struct HolonomyOptions {
  TorusPoint p_plus;  ///< fixed future; dimension 0 means the zero symbol
  std::uint64_t check_seed = 0xC0C7C;
  std::size_t check_states = 1000;
  double tolerance = 1e-12;
};

struct HolonomyPair {
  WindowObservable phi_minus;
  WindowObservable eta;
  TorusPoint p_plus;
};

/// eta(x) = h^u(x, P x) and phi^- = eta - eta o f^{-1} + phi o f^{-1}, so that
/// phi - phi^- o f = eta - eta o f. For phi on [lo, hi] with H = max(hi, 0),
/// eta reads [lo - H, hi - 1] and phi^- reads [lo - H - 1, hi - 1] while
/// being independent of omega_j, j >= 1. Future independence and the
/// cohomological identity are checked at construction on random states;
/// failures throw std::logic_error.
HolonomyPair reduce_to_past(const WindowObservable& phi, const HolonomyOptions& opts = {});

/// max |phi(a) - phi^-(f a) - eta(a) + eta(f a)| over n_samples random states.
double verify_cohomology(const WindowObservable& phi, const HolonomyPair& pair, std::size_t n_samples, Rng& rng,
                         ExecPolicy policy = {});

/// max |phi^-(x) - phi^-(x')| over n_samples random x, x' differing only in
/// omega_j, j >= 1.
double future_dependence(const HolonomyPair& pair, std::size_t n_samples, Rng& rng);

/// Sampled Hoelder quotient: half the pairs differ in symbols (|d psi| /
/// d_shift^beta), half in theta (|d psi| / |d theta|^beta). Under-estimates
/// the seminorm.
double holder_seminorm_estimate(const WindowObservable& psi, double beta, std::size_t n_pairs, Rng& rng);

struct MeanEstimate {
  double mean;
  double standard_error;
};

/// Monte Carlo mean of psi under mu^Z x Lebesgue.
MeanEstimate stationary_mean(const WindowObservable& psi, const TorusMeasure& mu, std::size_t n_samples,
                             std::uint64_t seed, ExecPolicy policy = {});

/// phi(omega, theta) = sum_b T[s][b] e_b(theta), where s indexes the tuple of
/// nearest alphabet atoms to omega_{-w..w} (first index fastest) and e_b runs
/// over 1, cos(2 pi <k,theta>), sin(2 pi <k,theta>) for k in the upper half
/// of the box |k|_inf <= K.
class TabularObservable {
 public:
  TabularObservable(std::vector<TorusPoint> alphabet, long w, int K, std::vector<std::vector<double>> table);
  /// Entries uniform in [-1, 1] damped by 1 / (1 + |k|_inf).
  static TabularObservable random(std::vector<TorusPoint> alphabet, long w, int K, Rng& rng);

  const std::vector<TorusPoint>& alphabet() const noexcept { return alphabet_; }
  long window() const noexcept { return w_; }
  int harmonics() const noexcept { return K_; }
  std::size_t basis_size() const noexcept { return 1 + 2 * upper_.size(); }
  std::size_t tuple_count() const noexcept { return table_.size(); }
  const std::vector<std::vector<double>>& table() const noexcept { return table_; }

  std::size_t nearest_atom(const TorusPoint& p) const;
  double evaluate(std::span<const TorusPoint> slice, const TorusPoint& theta) const;
  WindowObservable as_window_observable() const;

 private:
  std::vector<TorusPoint> alphabet_;
  long w_;
  int K_;
  std::vector<LatticeVector> upper_;  // upper half of the harmonic box
  std::vector<std::vector<double>> table_;
};

}  // namespace mixlab
