#include <catch_amalgamated.hpp>

#include <cmath>

#include "mixlab/chain.hpp"
#include "mixlab/stats.hpp"

using namespace mixlab;
using Catch::Approx;

namespace {

const double kGolden = (std::sqrt(5.0) - 1.0) / 2.0;

TorusMeasure two_atom_golden() {
  return TorusMeasure::atomic({{TorusPoint{0.0}, 0.5}, {TorusPoint{kGolden}, 0.5}});
}

StateObservable cos_theta() { return on_theta(FourierObservable::cosine(LatticeVector{1})); }

ChainConfig fixed_config(TorusMeasure mu, double theta0, long n, long trials, std::uint64_t seed = 1) {
  ChainConfig cfg{std::move(mu)};
  cfg.initial = FixedStart{TorusPoint{theta0}};
  cfg.n_steps = n;
  cfg.n_trials = trials;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("skew state steps") {
  const auto s1 = step(SkewState(TorusPoint{0.2}, 0), TorusPoint{0.5});
  CHECK(s1.theta()[0] == Approx(0.7));
  CHECK(s1.size() == 0);
  const auto s2 = step(SkewState(TorusPoint{0.9}, 0), TorusPoint{0.3});
  CHECK(s2.theta()[0] == Approx(0.2));

  const std::vector<TorusPoint> hist{TorusPoint{0.1}};
  const auto s3 = step(SkewState(TorusPoint{0.0}, 2, hist), TorusPoint{0.4});
  REQUIRE(s3.size() == 2);
  CHECK(s3.symbol(0)[0] == Approx(0.1));
  CHECK(s3.symbol(1)[0] == Approx(0.4));
  CHECK(s3.theta()[0] == Approx(0.4));
  const auto s4 = step(s3, TorusPoint{0.25});
  CHECK(s4.size() == 2);
  CHECK(s4.symbol(0)[0] == Approx(0.4));
  CHECK(s4.symbol(1)[0] == Approx(0.25));
  CHECK_THROWS(s4.symbol(2));
}

TEST_CASE("birkhoff sums of frozen and periodic chains") {
  Rng rng(5);
  const auto one = [](const SkewState&) { return 1.0; };
  CHECK(birkhoff_sum(fixed_config(TorusMeasure::lebesgue(), 0.3, 100, 1), one, rng) == 100.0);
  CHECK(birkhoff_sum(fixed_config(TorusMeasure::dirac(TorusPoint{0.0}), 0.0, 4, 1), cos_theta(), rng) ==
        Approx(4.0));
  CHECK(birkhoff_sum(fixed_config(TorusMeasure::dirac(TorusPoint{0.5}), 0.0, 4, 1), cos_theta(), rng) ==
        Approx(0.0).margin(1e-12));
}

TEST_CASE("deviation probability trivial cases") {
  const auto half = TorusMeasure::dirac(TorusPoint{0.5});
  const auto est = deviation_probability(fixed_config(half, 0.0, 10, 200), cos_theta(), 0.0, 0.1);
  CHECK(est.p_hat == 0.0);
  CHECK(est.ci_halfwidth == Approx(1.0 / 200));

  ChainConfig leb{TorusMeasure::lebesgue()};
  leb.n_steps = 20;
  leb.n_trials = 500;
  CHECK(deviation_probability(leb, cos_theta(), 0.0, 2.1).p_hat == 0.0);
  const auto fixed = fixed_config(TorusMeasure::lebesgue(), 0.37, 20, 500);
  CHECK(deviation_probability(fixed, cos_theta(), 0.0, 2.1).p_hat == 0.0);
}

TEST_CASE("stationary start is uniform for Lebesgue steps") {
  ChainConfig cfg{TorusMeasure::lebesgue()};
  cfg.n_trials = 100000;
  cfg.seed = 2024;
  for (long n : {1L, 10L}) {
    cfg.n_steps = n + 1;  // theta_n is the last visited state
    const auto thetas = trial_values(static_cast<std::size_t>(cfg.n_trials), cfg.seed, {}, [&](Rng& rng) {
      SkewState z = initial_state(cfg, rng);
      for (long j = 0; j < n; ++j) z.advance(cfg.mu.sample(rng));
      return z.theta()[0];
    });
    CHECK(chi_square_uniform(thetas, 64).p_value > 1e-4);
  }
}

TEST_CASE("exact enumeration") {
  const auto half = TorusMeasure::atomic({{TorusPoint{0.0}, 0.5}, {TorusPoint{0.5}, 0.5}});
  const auto ex = exact_deviation(half, cos_theta(), TorusPoint{0.0}, 0.0, 0.5, 2);
  CHECK(ex.p_hat == Approx(0.5));
  CHECK(ex.method == DeviationEstimate::Method::exact);

  const auto d0 = TorusMeasure::dirac(TorusPoint{0.0});
  CHECK(exact_deviation(d0, cos_theta(), TorusPoint{0.0}, 0.0, 0.9, 5).p_hat == Approx(1.0));

  CHECK_THROWS_AS(exact_deviation(two_atom_golden(), cos_theta(), TorusPoint{0.0}, 0.0, 0.1, 30),
                  std::length_error);
}

TEST_CASE("exact enumeration agrees with Monte Carlo") {
  Rng scen(77);
  for (int s = 0; s < 10; ++s) {
    const int m = 2 + static_cast<int>(scen.below(2));
    std::vector<Atom> atoms;
    double total = 0.0;
    for (int a = 0; a < m; ++a) {
      atoms.push_back({TorusPoint{scen.uniform()}, 0.2 + scen.uniform()});
      total += atoms.back().weight;
    }
    for (auto& a : atoms) a.weight /= total;
    const auto mu = TorusMeasure::atomic(atoms);
    const long n = m == 2 ? 12 : 8;
    const double theta0 = scen.uniform();
    const double eps = 0.1 + 0.3 * scen.uniform();
    const auto exact = exact_deviation(mu, cos_theta(), TorusPoint{theta0}, 0.0, eps, n);
    const auto mc =
        deviation_probability(fixed_config(mu, theta0, n, 20000, 1000 + s), cos_theta(), 0.0, eps);
    CHECK(std::abs(mc.p_hat - exact.p_hat) <= 3.5 * mc.ci_halfwidth);
  }
}

TEST_CASE("LDT constants and bound") {
  const auto k = ldt_constants(2.0, 1.0, 1.0);
  CHECK(k.c_bar == Approx(1.0 / 108.0).epsilon(1e-14));
  CHECK(k.n_bar == Approx(6.0).epsilon(1e-14));
  CHECK_FALSE(k.clamped);

  const auto one = ldt_constants(1.5, 2.0 / 9.0, 1.0);  // 3CL = 1
  CHECK(one.c_bar == Approx(1.5));
  CHECK(one.n_bar == Approx(1.0));

  const auto clamped = ldt_constants(1.0, 1.0 / 3.0, 1.0);
  CHECK(clamped.clamped);
  CHECK(clamped.C == Approx(4.0 / 3.0));

  CHECK(ldt_threshold(k, 0.5) == Approx(12.0));
  const auto b12 = ldt_bound(k, 0.5, 12);
  REQUIRE(b12.has_value());
  CHECK(*b12 == Approx(8.0 * std::exp(-1.0 / 72.0)).epsilon(1e-14));
  CHECK_FALSE(ldt_bound(k, 0.5, 11).has_value());

  // c(eps) n(eps) = C (eps / 3CL)^{2 + 1/p} (3CL / eps)^{1/p} = C (eps / 3CL)^2
  for (double p : {0.5, 1.0, 2.5}) {
    const auto kk = ldt_constants(3.0, 0.7, p);
    const double eps = 0.3;
    const double n_eps = ldt_threshold(kk, eps);
    const double c_eps = kk.c_bar * std::pow(eps, 2.0 + 1.0 / p);
    const double base = eps / (3.0 * kk.C * kk.L);
    CHECK(c_eps == Approx(kk.C * std::pow(base, 2.0 + 1.0 / p)).epsilon(1e-12));
    CHECK(c_eps * n_eps == Approx(kk.C * base * base).epsilon(1e-12));
  }
}

TEST_CASE("LDT verification on the two-atom family") {
  ChainConfig cfg{two_atom_golden()};
  cfg.n_trials = 4000;
  cfg.seed = 17;
  const std::vector<long> ns{10, 20, 40, 80};
  const auto consts = ldt_constants(2.0, 1.0 + 2.0 * 3.14159, 1.0);
  const auto rep = verify_ldt(cfg, cos_theta(), 0.0, 0.25, ns, consts);
  REQUIRE(rep.rows.size() == ns.size());
  REQUIRE(rep.slope.has_value());
  CHECK(*rep.slope < 0.0);
  CHECK(rep.overall_pass);

  ChainConfig dcfg{TorusMeasure::dirac(TorusPoint{0.0})};
  dcfg.initial = FixedStart{TorusPoint{0.0}};
  dcfg.n_trials = 50;
  const auto drep = verify_ldt(dcfg, cos_theta(), 0.0, 0.25, ns, consts, {}, false);
  CHECK_FALSE(drep.decay_expected);
  for (const auto& row : drep.rows) CHECK(row.estimate.p_hat == 1.0);
}
