#pragma once

#include <cstddef>
#include <span>

#include "mixlab/chain.hpp"
#include "mixlab/measure.hpp"
#include "mixlab/parallel.hpp"
#include "mixlab/spectral.hpp"

namespace mixlab {

struct VarianceResult {
  enum class Method { closed_form, truncated_series };
  double sigma2;
  Method method;
  long series_terms;     ///< T for the series method, 0 otherwise
  double residual_bound; ///< bound on |sigma2 - sigma2_T|; 0 for the closed form
};

/// Asymptotic variance ||psi||_2^2 - ||Q psi||_2^2, psi = sum_n Q^n phi, of a
/// zero-mean Fourier observable under the random translation by mu.
///
/// closed_form: psi-hat(k) = c_k / (1 - mu-hat(k)), so by Parseval
///   sigma2 = sum_{k != 0} |c_k|^2 (1 - |mu-hat(k)|^2) / |1 - mu-hat(k)|^2.
/// truncated_series: psi_T = sum_{n <= T} Q^n phi,
///   sigma2_T = ||psi_T||^2 - ||Q psi_T||^2, with the rigorous tail bound
///   sum_k |c_k|^2 (1 - r_k^2) * 2 r_k^{T+1} / (1 - r_k)^2,  r_k = |mu-hat(k)|.
///
/// Throws std::domain_error("nonzero mean") if |c_0| > 1e-12 and
/// std::domain_error("summability violated") if a supported k has
/// |mu-hat(k)| >= 1 - 1e-9.
VarianceResult gordin_livsic_sigma2(const FourierObservable& phi, const TorusMeasure& mu,
                                    VarianceResult::Method method = VarianceResult::Method::closed_form,
                                    long series_terms = 200);

/// sigma2(phi) > 1e-12 for a non-constant zero-mean phi. Throws
/// std::invalid_argument for a constant phi and std::logic_error if the
/// variance vanishes despite nonzero coefficients.
bool positivity_check(const FourierObservable& phi, const TorusMeasure& mu);

struct CltReport {
  long n;
  long trials;
  double ks_statistic;
  double sample_mean;
  double sample_variance;
};

/// KS distance to N(0,1) and moments of S / (sigma sqrt n) for precomputed sums.
CltReport clt_from_sums(std::span<const double> sums, long n, double sigma2);

/// Draws `trials` stationary trajectories of length n and normalizes their
/// Birkhoff sums by the supplied sigma.
CltReport clt_experiment(const ChainConfig& cfg, const StateObservable& phi, double sigma2, long n, long trials,
                         ExecPolicy policy = {});

}  // namespace mixlab
