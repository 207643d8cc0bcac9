#pragma once

// Uniformly expanding, orientation-preserving circle maps given by a lift
// F: R -> R with F(x + 1) = F(x) + D. Densities live on the midpoint grid
// x_i = (i + 1/2) / G and are read between grid points by periodic linear
// interpolation.

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mixlab/parallel.hpp"
#include "mixlab/rng.hpp"

namespace mixlab {

/// Forward-mode dual number: value and first derivative.
struct Dual {
  double v;
  double d;
};

inline Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.d + b.d}; }
inline Dual operator-(Dual a, Dual b) { return {a.v - b.v, a.d - b.d}; }
inline Dual operator-(Dual a) { return {-a.v, -a.d}; }
inline Dual operator*(Dual a, Dual b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
inline Dual operator/(Dual a, Dual b) { return {a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v)}; }
inline Dual sin(Dual a) { return {std::sin(a.v), std::cos(a.v) * a.d}; }
inline Dual cos(Dual a) { return {std::cos(a.v), -std::sin(a.v) * a.d}; }

using LiftFn = std::function<Dual(Dual)>;

/// Parses an arithmetic expression in x: numbers, x, pi, + - * /, unary
/// minus, parentheses, sin(.) and cos(.). Throws std::invalid_argument with
/// the offending position on a syntax error.
LiftFn parse_lift_expression(const std::string& text);

class CircleMapModel {
 public:
  /// Validates: F'(x) > 0 and min F' = lambda_star > 1 on a 4096-point grid,
  /// F(x + 1) = F(x) + degree within 1e-9 on 64 points, degree >= 2.
  /// Throws std::invalid_argument naming the failed condition.
  CircleMapModel(std::string name, int degree, LiftFn lift, std::size_t grid = 2048);

  static CircleMapModel doubling(std::size_t grid = 2048);
  static CircleMapModel tripling(std::size_t grid = 2048);
  /// F(x) = 2x + eps sin(2 pi x) / (2 pi), |eps| < 1.
  static CircleMapModel perturbed2(double eps, std::size_t grid = 2048);
  static CircleMapModel from_expression(const std::string& expr, int degree, std::size_t grid = 2048);

  const std::string& name() const noexcept { return name_; }
  int degree() const noexcept { return degree_; }
  double lambda_star() const noexcept { return lambda_star_; }
  std::size_t grid() const noexcept { return grid_; }

  double lift(double x) const { return lift_({x, 0.0}).v; }
  Dual lift_dual(double x) const { return lift_({x, 1.0}); }
  double derivative(double x) const { return lift_dual(x).d; }
  /// f(x) = F(x) mod 1
  double map(double x) const;

 private:
  std::string name_;
  int degree_;
  LiftFn lift_;
  std::size_t grid_;
  double lambda_star_ = 0.0;
};

/// The D preimages of x in [0,1), ascending, each with |f(y) - x| mod 1 <
/// 1e-12. Branch b solves F(y) = t_b on [0, 1] for the D lifts t_b of x in
/// [F(0), F(0) + D) by safeguarded Newton with bisection fallback. Throws
/// std::runtime_error("branch solve failed").
std::vector<double> preimages(const CircleMapModel& model, double x);

/// Periodic linear interpolation of midpoint-grid values at x.
double interpolate(std::span<const double> values, double x);

/// L h(x_i) = sum_{f(y) = x_i} h(y) / f'(y) as a sparse stencil: two
/// interpolation taps per preimage.
class TransferOperator {
 public:
  explicit TransferOperator(const CircleMapModel& model);

  std::size_t grid() const noexcept { return grid_; }
  std::vector<double> apply(std::span<const double> h, ExecPolicy policy = {}) const;
  std::vector<double> apply_serial(std::span<const double> h) const;
  /// Adjoint stencil (l L)_j, used for the discrete stationary weights.
  std::vector<double> apply_transpose(std::span<const double> l) const;

 private:
  struct Tap {
    std::uint32_t i0, i1;
    double w0, w1;
  };
  double row(std::size_t i, std::span<const double> h) const;

  std::size_t grid_;
  std::size_t per_row_;
  std::vector<Tap> taps_;
};

std::vector<double> transfer_apply(std::span<const double> h, const CircleMapModel& model);

/// Midpoint integral (1/G) sum h_i.
double grid_integral(std::span<const double> h);

/// Values of a function on the midpoint grid of size G.
std::vector<double> sample_on_grid(const std::function<double(double)>& fn, std::size_t G);

/// Invariant density from power iteration. The discretized L is not exactly
/// mass preserving, so the iteration converges to L g = lambda g with lambda
/// within O(G^-2) of 1; both residuals are reported.
struct InvariantDensity {
  std::vector<double> values;       ///< midpoint values, grid integral 1
  double eigenvalue;                ///< lambda
  double residual;                  ///< sup |L g - g|
  double eigen_residual;            ///< sup |L g - lambda g|
  long iterations;
  std::vector<double> stationary;   ///< discrete stationary weights of Q, sum 1
  std::vector<double> cumulative;   ///< running sum of values / G, last = 1

  double operator()(double x) const { return interpolate(values, x); }
  double min_value() const;
  /// sum_i stationary_i h_i: the mean Q^n h converges to.
  double stationary_mean(std::span<const double> h) const;
};

/// Iterates h <- L h / mean(L h) from h = 1 until sup |L h - lambda h| < tol.
/// Throws std::runtime_error("no convergence") after max_iter steps.
InvariantDensity invariant_density(const CircleMapModel& model, double tol = 1e-12, long max_iter = 5000,
                                   ExecPolicy policy = {});

struct KernelWeight {
  double y;
  double w;
};

/// w_i = g(y_i) / (lambda g(x) f'(y_i)) over the preimages y_i of x.
std::vector<KernelWeight> markov_kernel_weights(const CircleMapModel& model, const InvariantDensity& g, double x);

/// Q h = L(h g) / (lambda g) on the grid.
std::vector<double> markov_apply(std::span<const double> h, const TransferOperator& L, const InvariantDensity& g,
                                 ExecPolicy policy = {});
std::vector<double> markov_apply_serial(std::span<const double> h, const TransferOperator& L,
                                        const InvariantDensity& g);

struct ExpDecayRow {
  long n;
  double delta;  ///< max_i |Q^n phi - mean|
};

struct ExpMixing {
  std::vector<ExpDecayRow> rows;
  double mean;                  ///< stationary mean subtracted
  std::optional<double> sigma;  ///< geometric-mean ratio
  long usable_ratios;
};

/// delta_n for n = 0..n_max. Stops early once delta_n < 1e-15.
ExpMixing exp_decay_trace(const TransferOperator& L, const InvariantDensity& g, std::span<const double> phi,
                          long n_max, ExecPolicy policy = {});

/// exp_decay_trace plus sigma = exp(mean log(delta_{n+1} / delta_n)) over
/// n in [5, n_max) with both deltas > 1e-12. Throws
/// std::domain_error("no decay measured") below 3 usable ratios or if sigma >= 1.
ExpMixing mixing_rate_exp(const TransferOperator& L, const InvariantDensity& g, std::span<const double> phi,
                          long n_max, ExecPolicy policy = {});

/// Inverse-CDF draw from the grid density (uniform within the chosen cell).
double sample_from_density(const InvariantDensity& g, Rng& rng);

/// x_0 = x0, x_{j+1} drawn among the preimages of x_j with kernel weights.
std::vector<double> backward_chain(const CircleMapModel& model, const InvariantDensity& g, double x0, long n,
                                   Rng& rng);

struct BackwardChainConfig {
  std::optional<double> x0;  ///< fixed start; stationary (x0 ~ g) when empty
  long n_steps = 1;
  long n_trials = 1;
  std::uint64_t seed = 0;
};

/// Birkhoff sums phi(x_0) + ... + phi(x_{n-1}) of independent backward
/// chains; trial i uses stream_rng(seed, i).
std::vector<double> backward_birkhoff_sums(const CircleMapModel& model, const InvariantDensity& g,
                                           const std::function<double(double)>& phi,
                                           const BackwardChainConfig& cfg, ExecPolicy policy = {});
std::vector<double> backward_birkhoff_sums_serial(const CircleMapModel& model, const InvariantDensity& g,
                                                  const std::function<double(double)>& phi,
                                                  const BackwardChainConfig& cfg);

/// Asymptotic variance of a grid function under the backward chain:
/// psi = sum_n Q^n (phi - mean) summed until sup |Q^n(phi - mean)| < 1e-14,
/// sigma2 = <psi^2> - <(Q psi)^2> with the stationary weights.
/// max over n_pairs random smooth pairs (h, phi) of
/// |int (L h) phi dm - int h (phi o f) dm| on the model grid; pair i draws its
/// harmonics and phases from stream (seed, i).
double duality_defect(const CircleMapModel& model, const TransferOperator& L, std::size_t n_pairs,
                      std::uint64_t seed);

double grid_sigma2(const TransferOperator& L, const InvariantDensity& g, std::span<const double> phi,
                   long max_terms = 10000);

}  // namespace mixlab
