#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace mixlab {

struct Line {
  double slope;
  double intercept;
};

/// Ordinary least squares y = slope * x + intercept; needs >= 2 distinct x.
Line least_squares_line(std::span<const double> xs, std::span<const double> ys);

double standard_normal_cdf(double x);

/// sup_x |F_n(x) - F(x)| for the empirical CDF of `samples` (sorted internally).
double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);
double ks_statistic_normal(std::vector<double> samples);
/// Two-sample sup distance between empirical CDFs.
double ks_two_sample(std::vector<double> a, std::vector<double> b);

struct ChiSquareResult {
  double statistic;
  double p_value;
};

/// Pearson chi-square test of uniformity on [0,1) with `bins` equal bins.
ChiSquareResult chi_square_uniform(std::span<const double> samples, std::size_t bins);

struct SampleMoments {
  double mean;
  double variance;  ///< unbiased; 0 for a single sample
};

SampleMoments sample_moments(std::span<const double> xs);

}  // namespace mixlab
