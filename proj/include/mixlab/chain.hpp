#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "mixlab/measure.hpp"
#include "mixlab/parallel.hpp"
#include "mixlab/rng.hpp"
#include "mixlab/spectral.hpp"
#include "mixlab/torus.hpp"

namespace mixlab {

/// State of the random-translation chain: torus point plus the last `window`
/// translations drawn (oldest first). window = 0 is the plain chain on T^d.
class SkewState {
 public:
  SkewState(TorusPoint theta, std::size_t window) : theta_(theta), buf_(window, TorusPoint(theta.dim())) {}
  /// Window pre-filled with `history` (oldest first, at most `window` kept).
  SkewState(TorusPoint theta, std::size_t window, std::span<const TorusPoint> history);

  const TorusPoint& theta() const noexcept { return theta_; }
  std::size_t window() const noexcept { return buf_.size(); }
  std::size_t size() const noexcept { return count_; }
  /// i = 0 is the oldest stored symbol, size() - 1 the most recent.
  const TorusPoint& symbol(std::size_t i) const {
    if (i >= count_) throw std::out_of_range("symbol index beyond stored window");
    return buf_[(head_ + i) % buf_.size()];
  }
  std::vector<TorusPoint> symbols() const;

  /// theta += omega (mod 1); omega is pushed, evicting the oldest when full.
  void advance(const TorusPoint& omega);

 private:
  TorusPoint theta_;
  std::vector<TorusPoint> buf_;
  std::size_t head_ = 0;
  std::size_t count_ = 0;
};

/// Value-returning form of SkewState::advance.
inline SkewState step(SkewState state, const TorusPoint& omega) {
  state.advance(omega);
  return state;
}

using StateObservable = std::function<double(const SkewState&)>;

/// phi(state) = phi(theta).
StateObservable on_theta(FourierObservable phi);

struct FixedStart {
  TorusPoint theta;
};
struct StationaryStart {};
using StartMode = std::variant<FixedStart, StationaryStart>;

struct ChainConfig {
  TorusMeasure mu;
  StartMode initial = StationaryStart{};
  long n_steps = 1;
  long n_trials = 1;
  std::uint64_t seed = 0;
  std::size_t window_w = 0;

  void validate() const;
};

/// Z_0 per cfg.initial. Stationary: theta uniform, window pre-filled with w
/// i.i.d. mu-draws. Fixed: the given theta, window pre-filled with the symbol 0.
SkewState initial_state(const ChainConfig& cfg, Rng& rng);

/// S_n = phi(Z_0) + ... + phi(Z_{n-1}) along one trajectory.
double birkhoff_sum(const ChainConfig& cfg, const StateObservable& phi, Rng& rng);

/// One value fn(rng_i) per trial i, rng_i = stream_rng(seed, i). This is the
/// hook other chains (e.g. backward chains of circle maps) plug into.
template <class SumFn>
std::vector<double> trial_values(std::size_t trials, std::uint64_t seed, ExecPolicy policy, SumFn&& fn) {
  return map_indices(trials, policy, [&](std::size_t i) {
    Rng rng = stream_rng(seed, i);
    return fn(rng);
  });
}

template <class SumFn>
std::vector<double> trial_values_serial(std::size_t trials, std::uint64_t seed, SumFn&& fn) {
  return map_indices_serial(trials, [&](std::size_t i) {
    Rng rng = stream_rng(seed, i);
    return fn(rng);
  });
}

/// Birkhoff sums of cfg.n_trials independent trajectories.
std::vector<double> birkhoff_sums(const ChainConfig& cfg, const StateObservable& phi, ExecPolicy policy = {});
std::vector<double> birkhoff_sums_serial(const ChainConfig& cfg, const StateObservable& phi);

struct DeviationEstimate {
  enum class Method { monte_carlo, exact };
  double epsilon;
  long n;
  double p_hat;
  double ci_halfwidth;  ///< 95% normal approximation, floored at 1/trials
  Method method;
};

/// Frequency of |S/n - mean| > epsilon among the given sums.
DeviationEstimate deviation_from_sums(std::span<const double> sums, long n, double mean, double epsilon);

DeviationEstimate deviation_probability(const ChainConfig& cfg, const StateObservable& phi, double mean_value,
                                        double epsilon, ExecPolicy policy = {});

/// Exact probability of |S_n/n - mean| > epsilon from a fixed start by
/// enumerating every symbol path of an atomic mu. Throws
/// std::length_error("state space too large") when m^n > 1e7.
DeviationEstimate exact_deviation(const TorusMeasure& mu, const StateObservable& phi, const TorusPoint& theta0,
                                  double mean_value, double epsilon, long n, std::size_t window_w = 0);

struct LdtConstants {
  double C;
  double L;
  double p;
  double c_bar;  ///< C (3 C L)^{-(2 + 1/p)}
  double n_bar;  ///< (3 C L)^{1/p}
  bool clamped;  ///< C was raised to 4/3
};

LdtConstants ldt_constants(double C, double L, double p);

/// L = sup |phi| on a 4096 grid (d = 1; 64^d otherwise) plus the sampled
/// alpha-Hoelder seminorm over 10^4 pairs.
double estimate_holder_norm(const FourierObservable& phi, double alpha, std::uint64_t seed);

/// max n^p bound(n) over about 200 log-spaced n in [1, n_max].
double fit_power_constant(const FourierObservable& phi, const TorusMeasure& mu, double p, long n_max,
                          ExecPolicy policy = {});

/// n(eps) = n_bar eps^{-1/p}
double ldt_threshold(const LdtConstants& k, double epsilon);

/// 8 exp(-c_bar eps^{2+1/p} n) for n >= n(eps); nullopt below the threshold.
std::optional<double> ldt_bound(const LdtConstants& k, double epsilon, long n);

struct LdtRow {
  DeviationEstimate estimate;
  std::optional<double> bound;
  bool pass;
};

struct LdtReport {
  std::vector<LdtRow> rows;
  std::optional<double> slope;  ///< of log p_hat against n, rows with p_hat > 0
  bool decay_expected;
  bool overall_pass;
};

/// Monte Carlo deviation at every n in n_grid against the explicit bound. A row
/// passes when bound >= p_hat - 3 ci or the bound is below threshold; the slope
/// must be negative when >= 3 rows have p_hat > 0 and decay is expected.
LdtReport verify_ldt(const ChainConfig& cfg, const StateObservable& phi, double mean_value, double epsilon,
                     std::span<const long> n_grid, const LdtConstants& consts, ExecPolicy policy = {},
                     bool decay_expected = true);

}  // namespace mixlab
