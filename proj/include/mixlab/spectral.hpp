#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mixlab/measure.hpp"
#include "mixlab/parallel.hpp"
#include "mixlab/torus.hpp"

namespace mixlab {

/// Real observable on T^d stored as a truncated Fourier series
///   phi(x) = sum_{|k|_inf <= N} c_k e^{2 pi i <k,x>},   c_{-k} = conj(c_k).
class FourierObservable {
 public:
  /// Coefficients in LatticeBox(dim, radius) order. Throws unless they are
  /// Hermitian-symmetric within 1e-12.
  FourierObservable(std::size_t dim, int radius, std::vector<std::complex<double>> coeffs);

  static FourierObservable constant(std::size_t dim, double value);
  /// cos(2 pi <k,x>)
  static FourierObservable cosine(const LatticeVector& k, double amplitude = 1.0);
  /// sin(2 pi <k,x>)
  static FourierObservable sine(const LatticeVector& k, double amplitude = 1.0);
  /// sum_{k=1..K} cos(2 pi k x) / k^2 on T^1
  static FourierObservable sum_cos_k2(int K);
  /// |x - 1/2| - 1/4 on T^1 truncated at radius N: c_k = 1/(pi k)^2 for odd k
  static FourierObservable triangle(int N);

  std::size_t dim() const noexcept { return box_.dim(); }
  int radius() const noexcept { return box_.radius(); }
  const LatticeBox& box() const noexcept { return box_; }
  std::span<const std::complex<double>> coefficients() const noexcept { return coeffs_; }
  std::complex<double> coefficient(const LatticeVector& k) const;
  double mean() const noexcept { return coeffs_[box_.center()].real(); }

  double operator()(const TorusPoint& x) const;
  /// Values on the uniform grid j/resolution per axis (d <= 2), first axis fastest.
  std::vector<double> evaluate_grid(std::size_t resolution) const;

  FourierObservable operator+(const FourierObservable& o) const;
  FourierObservable operator*(double a) const;

  // Optional Hoelder metadata.
  std::optional<double> holder_alpha;
  std::optional<double> holder_norm_bound;  ///< estimated L = sup|phi| + v_alpha
  std::optional<double> truncation_bound;   ///< estimated sup |phi - series|

 private:
  LatticeBox box_;
  std::vector<std::complex<double>> coeffs_;
};

struct MixingProfile {
  enum class Rate { power, exponential };
  enum class Provenance { declared, fitted };
  Rate rate_kind = Rate::power;
  double C = 1.0;
  double p = 1.0;      ///< power rate exponent
  double sigma = 0.5;  ///< exponential rate base
  Provenance provenance = Provenance::declared;
};

struct DecayRow {
  long n;
  double bound_value;     ///< sum_{k != 0} |mu-hat(k)|^n |c_k|
  double grid_sup_value;  ///< max over the grid of |Q^n phi - c_0|
};

struct DecayTrace {
  std::vector<DecayRow> rows;
};

/// Coefficientwise Q: c_k -> mu-hat(k) c_k.
FourierObservable apply_markov(const FourierObservable& phi, const TorusMeasure& mu);

struct Deviation {
  double bound;
  double grid_sup;
};

/// Sup-norm bound and grid sup of Q^n phi - integral(phi), with mu-hat(k)^n
/// taken directly. `grid` is the per-axis grid resolution (d <= 2).
Deviation deviation_after_n(const FourierObservable& phi, const TorusMeasure& mu, long n,
                            std::size_t grid = 1024);

/// deviation_after_n for each n (strictly increasing, positive). Parallel over n.
DecayTrace decay_trace(const FourierObservable& phi, const TorusMeasure& mu, std::span<const long> n_list,
                       std::size_t grid = 1024, ExecPolicy policy = {});
/// Serial reference for decay_trace.
DecayTrace decay_trace_serial(const FourierObservable& phi, const TorusMeasure& mu,
                              std::span<const long> n_list, std::size_t grid = 1024);

/// Least squares of log(bound) on log(n) over rows with n in [n_lo, n_hi] and
/// bound > 1e-300. Throws std::domain_error("insufficient points") below 3 rows.
MixingProfile fit_power_rate(const DecayTrace& trace, long n_lo, long n_hi);

/// Trigonometric degree floor((n gamma)^{9/(10 tau)}), at least 1.
long jackson_degree(long n, double gamma, double tau);

/// Multipliers rho_k, |k| <= N, of the normalized degree-N Jackson kernel:
/// with m = floor(N/2) + 1 and Fejer weights a_j = 1 - |j|/m (|j| < m),
/// rho_k = (sum_j a_j a_{k-j}) / (sum_j a_j^2). rho_0 = 1, rho_k = 0 for |k| > 2m - 2.
std::vector<double> jackson_taper(int N);

struct HolderToFourierOptions {
  std::uint64_t seed = 0x1F00D;  ///< for the random-pair seminorm estimate
  std::size_t n_pairs = 10000;
};

using TorusFunction = std::function<double(const TorusPoint&)>;

/// Sampled DFT of f on a resolution^d grid followed by Jackson tapering at
/// degree N (d <= 2). Fills alpha, L = sup|f| + v_alpha (sampled estimates)
/// and the kernel-moment truncation bound v_alpha * sum_axes int |t|^alpha J_N(t) dt.
/// Throws std::invalid_argument("resolution too low") unless resolution > 2N.
FourierObservable holder_to_fourier(const TorusFunction& f, std::size_t dim, double alpha, int N,
                                    std::size_t sample_resolution, const HolderToFourierOptions& opts = {});

/// Random-pair estimate of the Hoelder seminorm sup |f(x)-f(y)| / d(x,y)^alpha
/// (half uniform pairs, half close pairs). Always an under-estimate.
double holder_seminorm_sampled(const TorusFunction& f, std::size_t dim, double alpha, std::size_t n_pairs,
                               std::uint64_t seed);

}  // namespace mixlab
