#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "mixlab/measure.hpp"
#include "mixlab/rng.hpp"
#include "mixlab/torus.hpp"

using namespace mixlab;
using Catch::Approx;

namespace {

const double kGolden = (std::sqrt(5.0) - 1.0) / 2.0;

TorusMeasure two_atom_golden() {
  return TorusMeasure::atomic({{TorusPoint{0.0}, 0.5}, {TorusPoint{kGolden}, 0.5}});
}

}  // namespace

TEST_CASE("torus points stay in [0,1)") {
  TorusPoint p{0.9};
  p += TorusPoint{0.3};
  CHECK(p[0] == Approx(0.2).margin(1e-15));
  p -= TorusPoint{0.5};
  CHECK(p[0] == Approx(0.7).margin(1e-15));
  CHECK(wrap01(-1e-18) < 1.0);
  CHECK(wrap01(-0.25) == 0.75);
  CHECK(torus_distance(TorusPoint{0.05}, TorusPoint{0.95}) == Approx(0.1));
  CHECK_THROWS(TorusPoint(0));
  CHECK_THROWS(TorusPoint(kMaxDim + 1));
}

TEST_CASE("lattice box indexing round-trips") {
  for (std::size_t d = 1; d <= 3; ++d) {
    const LatticeBox box(d, 3);
    for (std::size_t i = 0; i < box.size(); ++i) {
      const LatticeVector k = box.point(i);
      CHECK(box.index(k) == i);
      CHECK(box.point(box.negated(i)) == -k);
    }
    CHECK(box.point(box.center()).is_zero());
  }
  CHECK(LatticeBox(1, 4).index(LatticeVector{-4}) == 0);
}

TEST_CASE("fourier coefficients of simple measures") {
  const auto d0 = TorusMeasure::dirac(TorusPoint{0.0});
  CHECK(std::abs(d0.fourier_coefficient(LatticeVector{5}) - std::complex<double>(1.0, 0.0)) < 1e-15);

  const auto leb = TorusMeasure::lebesgue();
  CHECK(std::abs(leb.fourier_coefficient(LatticeVector{3})) < 1e-12);
  CHECK(std::abs(leb.fourier_coefficient(LatticeVector{0}) - 1.0) < 1e-12);

  const auto half = TorusMeasure::atomic({{TorusPoint{0.0}, 0.5}, {TorusPoint{0.5}, 0.5}});
  for (int k = -6; k <= 6; ++k) {
    const double expect = (k % 2 == 0) ? 1.0 : 0.0;
    CHECK(std::abs(half.fourier_coefficient(LatticeVector{k}) - expect) < 1e-12);
  }
}

TEST_CASE("fourier coefficients are hermitian and bounded") {
  const auto two = two_atom_golden();
  const auto leb2 = TorusMeasure::lebesgue(2, 32);
  const auto mix = TorusMeasure::mixture(0.3, two, TorusMeasure::dirac(TorusPoint{0.2}));
  for (int k = -20; k <= 20; ++k) {
    for (const auto* mu : {&two, &mix}) {
      const auto a = mu->fourier_coefficient(LatticeVector{k});
      const auto b = mu->fourier_coefficient(LatticeVector{-k});
      CHECK(std::abs(a - std::conj(b)) < 1e-12);
      CHECK(std::abs(a) <= 1.0 + 1e-12);
    }
  }
  const auto a = leb2.fourier_coefficient(LatticeVector{2, -3});
  CHECK(std::abs(a) < 1e-12);
  CHECK(std::abs(TorusMeasure::dirac(TorusPoint{0.123}).fourier_coefficient(LatticeVector{7})) == Approx(1.0));
}

TEST_CASE("mixture coefficients are convex combinations") {
  const auto m1 = two_atom_golden();
  const auto m2 = TorusMeasure::atomic({{TorusPoint{0.1}, 0.25}, {TorusPoint{0.7}, 0.75}});
  const auto mix = TorusMeasure::mixture(0.4, m1, m2);
  Rng rng(11);
  for (int t = 0; t < 100; ++t) {
    const LatticeVector k{static_cast<int>(rng.below(201)) - 100};
    const auto expect = 0.4 * m1.fourier_coefficient(k) + 0.6 * m2.fourier_coefficient(k);
    CHECK(std::abs(mix.fourier_coefficient(k) - expect) < 1e-12);
  }
}

TEST_CASE("measure construction is validated") {
  CHECK_THROWS_AS(TorusMeasure::atomic({{TorusPoint{0.0}, 0.5}, {TorusPoint{0.5}, 0.4}}), std::invalid_argument);
  CHECK_THROWS_AS(TorusMeasure::atomic({{TorusPoint{0.0}, 1.2}, {TorusPoint{0.5}, -0.2}}), std::invalid_argument);
  CHECK_THROWS_AS(TorusMeasure::density({4}, {1.0, 1.0, 1.0, 2.0}), std::invalid_argument);
  CHECK_THROWS_AS(TorusMeasure::mixture(0.0, TorusMeasure::lebesgue(), TorusMeasure::lebesgue()),
                  std::invalid_argument);
  CHECK_NOTHROW(TorusMeasure::density({4}, {0.5, 1.5, 1.0, 1.0}));
}

TEST_CASE("mixing DC scan") {
  const auto dirac = TorusMeasure::dirac(TorusPoint{kGolden});
  CHECK_FALSE(check_mixing_dc(dirac, {0.05, 2.0, 20}).holds_up_to_kmax);

  const auto rep = check_mixing_dc(two_atom_golden(), {0.05, 2.0, 64});
  CHECK(rep.holds_up_to_kmax);
  CHECK(rep.worst_margin >= 0.0);

  const auto leb = check_mixing_dc(TorusMeasure::lebesgue(), {0.5, 1.0, 64});
  CHECK(leb.holds_up_to_kmax);
  CHECK(leb.worst_margin == Approx(0.5).margin(1e-9));
}

TEST_CASE("mixing DC is monotone in gamma") {
  const auto mu = two_atom_golden();
  for (double tau : {1.0, 1.5, 2.0}) {
    bool held = true;
    for (double gamma : {0.001, 0.01, 0.05, 0.1, 0.5, 1.0}) {
      const bool h = check_mixing_dc(mu, {gamma, tau, 32}).holds_up_to_kmax;
      if (!held) CHECK_FALSE(h);
      held = h;
    }
  }
}

TEST_CASE("mixing DC fit") {
  const std::vector<double> taus{1.0, 2.0};
  const auto leb = fit_mixing_dc(TorusMeasure::lebesgue(), 8, taus);
  CHECK(leb.tau_star == 1.0);
  CHECK(leb.gamma_star == Approx(1.0).margin(1e-9));

  CHECK_THROWS_WITH(fit_mixing_dc(TorusMeasure::dirac(TorusPoint{kGolden}), 16, taus), "degenerate measure");

  // Brute-force oracle for the two-atom measure: |mu-hat(k)| = |cos(pi k g)|.
  const std::vector<double> grid{1.0, 1.5, 2.0, 3.0};
  const auto fit = fit_mixing_dc(two_atom_golden(), 64, grid);
  for (std::size_t t = 0; t < grid.size(); ++t) {
    double best = 1e300;
    for (int k = 1; k <= 64; ++k)
      best = std::min(best, (1.0 - std::abs(std::cos(std::numbers::pi * k * kGolden))) * std::pow(k, grid[t]));
    CHECK(fit.gamma_by_tau[t] == Approx(best).epsilon(1e-9));
  }
  CHECK(fit.tau_star == 1.0);
  CHECK(fit.gamma_star == Approx(0.017941387).epsilon(1e-6));
}

TEST_CASE("ergodicity condition") {
  CHECK(is_ergodic_condition(TorusMeasure::dirac(TorusPoint{kGolden}), 64));
  CHECK_FALSE(is_ergodic_condition(TorusMeasure::dirac(TorusPoint{0.5}), 4));
  CHECK(is_ergodic_condition(TorusMeasure::lebesgue(), 64));
}

TEST_CASE("sampling") {
  Rng rng(3);
  const auto d = TorusMeasure::dirac(TorusPoint{0.3});
  CHECK(d.sample(rng)[0] == Approx(0.3));

  const auto leb = TorusMeasure::lebesgue();
  const int N = 100000;
  int in_band = 0;
  for (int i = 0; i < N; ++i) {
    const double x = leb.sample(rng)[0];
    if (x >= 0.49 && x < 0.51) ++in_band;
  }
  const double se = std::sqrt(0.02 * 0.98 / N);
  CHECK(std::abs(in_band / double(N) - 0.02) < 3.0 * se);

  const auto two = two_atom_golden();
  int zeros = 0;
  for (int i = 0; i < N; ++i)
    if (two.sample(rng)[0] == 0.0) ++zeros;
  CHECK(std::abs(zeros / double(N) - 0.5) < 3.0 * std::sqrt(0.25 / N));

  Rng a(99), b(99);
  for (int i = 0; i < 10; ++i) CHECK(leb.sample(a) == leb.sample(b));
}
