#include "mixlab/clt.hpp"

#include <cmath>
#include <stdexcept>

#include "mixlab/stats.hpp"

namespace mixlab {

VarianceResult gordin_livsic_sigma2(const FourierObservable& phi, const TorusMeasure& mu,
                                    VarianceResult::Method method, long series_terms) {
  if (phi.dim() != mu.dim()) throw std::invalid_argument("observable and measure dimensions differ");
  if (std::abs(phi.mean()) > 1e-12) throw std::domain_error("nonzero mean");
  if (method == VarianceResult::Method::truncated_series && series_terms < 0)
    throw std::invalid_argument("series_terms must be >= 0");

  const auto& box = phi.box();
  const auto c = phi.coefficients();
  const auto mu_hat = fourier_table(mu, box);

  double sigma2 = 0.0, residual = 0.0;
  for (std::size_t i = 0; i < box.size(); ++i) {
    if (i == box.center()) continue;
    const double c2 = std::norm(c[i]);
    if (c2 == 0.0) continue;
    const std::complex<double> m = mu_hat[i];
    const double r = std::abs(m);
    if (r >= 1.0 - 1e-9) throw std::domain_error("summability violated");
    const double contraction = 1.0 - r * r;
    if (method == VarianceResult::Method::closed_form) {
      sigma2 += c2 * contraction / std::norm(1.0 - m);
    } else {
      // Direct partial sum of the geometric series, not its closed form.
      std::complex<double> acc = 0.0, power = 1.0;
      for (long n = 0; n <= series_terms; ++n) {
        acc += power;
        power *= m;
      }
      sigma2 += c2 * std::norm(acc) * contraction;
      residual += c2 * contraction * 2.0 * std::pow(r, static_cast<double>(series_terms + 1)) /
                  ((1.0 - r) * (1.0 - r));
    }
  }
  if (method == VarianceResult::Method::closed_form) return {sigma2, method, 0, 0.0};
  return {sigma2, method, series_terms, residual};
}

bool positivity_check(const FourierObservable& phi, const TorusMeasure& mu) {
  bool any = false;
  const auto c = phi.coefficients();
  for (std::size_t i = 0; i < c.size(); ++i)
    if (i != phi.box().center() && std::abs(c[i]) > 0.0) any = true;
  if (!any) throw std::invalid_argument("constant observable");
  const double s2 = gordin_livsic_sigma2(phi, mu).sigma2;
  if (!(s2 > 1e-12)) throw std::logic_error("variance vanishes for a non-constant observable");
  return true;
}

CltReport clt_from_sums(std::span<const double> sums, long n, double sigma2) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("sigma2 must be positive");
  if (n < 1 || sums.empty()) throw std::invalid_argument("CLT needs n >= 1 and sums");
  const double scale = 1.0 / std::sqrt(sigma2 * static_cast<double>(n));
  std::vector<double> z(sums.begin(), sums.end());
  for (double& v : z) v *= scale;
  const auto mom = sample_moments(z);
  return {n, static_cast<long>(z.size()), ks_statistic_normal(z), mom.mean, mom.variance};
}

CltReport clt_experiment(const ChainConfig& cfg, const StateObservable& phi, double sigma2, long n, long trials,
                         ExecPolicy policy) {
  ChainConfig c = cfg;
  c.initial = StationaryStart{};
  c.n_steps = n;
  c.n_trials = trials;
  const auto sums = birkhoff_sums(c, phi, policy);
  return clt_from_sums(sums, n, sigma2);
}

}  // namespace mixlab
