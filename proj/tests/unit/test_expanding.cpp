#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "mixlab/expanding.hpp"
#include "mixlab/stats.hpp"

using namespace mixlab;
using Catch::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

double cos1(double x) { return std::cos(2.0 * kPi * x); }

}  // namespace

TEST_CASE("lift expressions") {
  const auto f = parse_lift_expression("2*x + 0.5*sin(2*pi*x)/(2*pi)");
  const Dual v = f({0.3, 1.0});
  CHECK(v.v == Approx(0.6 + 0.5 * std::sin(2 * kPi * 0.3) / (2 * kPi)));
  CHECK(v.d == Approx(2.0 + 0.5 * std::cos(2 * kPi * 0.3)));
  CHECK(parse_lift_expression("-(x - 3) * -2")({1.0, 1.0}).v == Approx(-4.0));
  CHECK(parse_lift_expression("cos(x)")({0.0, 1.0}).d == Approx(0.0));
  CHECK_THROWS_AS(parse_lift_expression("2*y"), std::invalid_argument);
  CHECK_THROWS_AS(parse_lift_expression("2*(x"), std::invalid_argument);
  CHECK_THROWS_AS(parse_lift_expression("2*x)"), std::invalid_argument);
}

TEST_CASE("map validation") {
  CHECK(CircleMapModel::doubling().lambda_star() == 2.0);
  CHECK(CircleMapModel::perturbed2(0.5).lambda_star() == Approx(1.5).epsilon(1e-6));
  CHECK_THROWS_AS(CircleMapModel::from_expression("-2*x", 2), std::invalid_argument);
  CHECK_THROWS_AS(CircleMapModel::from_expression("2*x + 0.3", 3), std::invalid_argument);
  CHECK_THROWS_AS(CircleMapModel::from_expression("2*x + 1.5*sin(2*pi*x)/(2*pi)", 2), std::invalid_argument);
  CHECK_THROWS_AS(CircleMapModel::perturbed2(1.2), std::invalid_argument);
  const auto m = CircleMapModel::from_expression("3*x + 0.2*sin(2*pi*x)", 3);
  CHECK(m.degree() == 3);
}

TEST_CASE("preimages") {
  const auto d = CircleMapModel::doubling();
  auto p = preimages(d, 0.5);
  REQUIRE(p.size() == 2);
  CHECK(p[0] == 0.25);
  CHECK(p[1] == 0.75);
  p = preimages(d, 0.0);
  CHECK(p[0] == 0.0);
  CHECK(p[1] == 0.5);

  const auto m = CircleMapModel::perturbed2(0.5);
  Rng rng(1);
  for (int t = 0; t < 1000; ++t) {
    const double x = t == 0 ? 0.3 : rng.uniform();
    const auto ys = preimages(m, x);
    REQUIRE(ys.size() == 2);
    CHECK(ys[0] < ys[1]);
    for (double y : ys) {
      const double r = std::abs(m.map(y) - x);
      CHECK(std::min(r, 1.0 - r) < 1e-12);
    }
  }
  const auto t3 = preimages(CircleMapModel::tripling(), 0.9);
  CHECK(t3.size() == 3);
  CHECK(t3[0] == Approx(0.3));
}

TEST_CASE("transfer operator on the doubling map") {
  const auto d = CircleMapModel::doubling();
  const TransferOperator L(d);
  const std::vector<double> one(d.grid(), 1.0);
  for (double v : L.apply(one)) CHECK(v == 1.0);
  const auto c = sample_on_grid(cos1, d.grid());
  for (double v : L.apply(c)) CHECK(std::abs(v) < 1e-10);

  // Harmonic k = 2 maps to harmonic 1: L e_2 = e_1.
  const auto c2 = sample_on_grid([](double x) { return std::cos(4.0 * kPi * x); }, d.grid());
  const auto Lc2 = L.apply(c2);
  for (std::size_t i = 0; i < Lc2.size(); i += 97) CHECK(Lc2[i] == Approx(c[i]).margin(1e-5));
}

TEST_CASE("transfer operator on the perturbed map") {
  const auto m = CircleMapModel::perturbed2(0.5);
  const TransferOperator L(m);
  const std::vector<double> one(m.grid(), 1.0);
  const auto L1 = L.apply(one);
  CHECK(grid_integral(L1) == Approx(1.0).margin(1e-4));
  for (std::size_t i = 0; i < L1.size(); i += 101) {
    const double x = (i + 0.5) / double(m.grid());
    double expect = 0.0;
    for (double y : preimages(m, x)) expect += 1.0 / m.derivative(y);
    CHECK(L1[i] == Approx(expect).epsilon(1e-12));
  }
  const auto h = sample_on_grid([](double x) { return 1.0 + 0.5 * std::sin(2 * kPi * x) + 0.2 * cos1(3 * x); }, m.grid());
  CHECK(std::abs(grid_integral(L.apply(h)) - grid_integral(h)) <= 1e-4);
}

TEST_CASE("duality with composition") {
  const auto m = CircleMapModel::perturbed2(0.5);
  const TransferOperator L(m);
  Rng rng(2);
  for (int t = 0; t < 10; ++t) {
    const double a = rng.uniform(), b = rng.uniform(), s = rng.uniform();
    const int ka = 1 + int(rng.below(3)), kb = 1 + int(rng.below(3));
    const auto hf = [&](double x) { return 1.0 + 0.5 * std::sin(2 * kPi * (ka * x + a)); };
    const auto phif = [&](double x) { return std::cos(2 * kPi * (kb * x + b)) + s; };
    const auto h = sample_on_grid(hf, m.grid());
    const auto phi = sample_on_grid(phif, m.grid());
    const auto phif_of_f = sample_on_grid([&](double x) { return phif(m.map(x)); }, m.grid());
    const auto Lh = L.apply(h);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
      lhs += Lh[i] * phi[i];
      rhs += h[i] * phif_of_f[i];
    }
    CHECK(std::abs(lhs - rhs) / double(h.size()) < 1e-5);
  }
}

TEST_CASE("invariant densities") {
  const auto d = invariant_density(CircleMapModel::doubling());
  for (double v : d.values) CHECK(std::abs(v - 1.0) < 1e-8);
  const auto t = invariant_density(CircleMapModel::tripling());
  for (double v : t.values) CHECK(std::abs(v - 1.0) < 1e-8);

  const auto m = CircleMapModel::perturbed2(0.5);
  const auto g = invariant_density(m);
  CHECK(g.residual < 1e-6);
  CHECK(g.eigen_residual < 1e-12);
  CHECK(grid_integral(g.values) == Approx(1.0).epsilon(1e-12));
  CHECK(g.min_value() > 0.0);
  CHECK(std::abs(g.eigenvalue - 1.0) < 1e-4);
  double s = 0.0;
  for (double w : g.stationary) s += w;
  CHECK(s == Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_WITH(invariant_density(m, 1e-12, 2), "no convergence");
}

TEST_CASE("Markov kernel weights") {
  const auto d = CircleMapModel::doubling();
  const auto gd = invariant_density(d);
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const auto kw = markov_kernel_weights(d, gd, rng.uniform());
    REQUIRE(kw.size() == 2);
    CHECK(std::abs(kw[0].w - 0.5) < 1e-12);
    CHECK(std::abs(kw[1].w - 0.5) < 1e-12);
  }
  const auto m = CircleMapModel::perturbed2(0.5);
  const auto g = invariant_density(m);
  for (int t = 0; t < 100; ++t) {
    const auto kw = markov_kernel_weights(m, g, rng.uniform());
    double s = 0.0;
    for (const auto& k : kw) {
      CHECK(k.w > 0.0);
      s += k.w;
    }
    CHECK(std::abs(s - 1.0) < 1e-6);
  }
}

TEST_CASE("Markov operator is unital, positive and stationary") {
  const auto m = CircleMapModel::perturbed2(0.5);
  const TransferOperator L(m);
  const auto g = invariant_density(m);
  const std::vector<double> one(m.grid(), 1.0);
  for (double v : markov_apply(one, L, g)) CHECK(std::abs(v - 1.0) < 1e-10);
  Rng rng(4);
  for (int t = 0; t < 10; ++t) {
    const double a = rng.uniform(), k = 1 + double(rng.below(4));
    const auto h = sample_on_grid([&](double x) { return std::pow(std::sin(kPi * (k * x + a)), 2); }, m.grid());
    const auto Qh = markov_apply(h, L, g);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
      CHECK(Qh[i] >= -1e-12);
      lhs += Qh[i] * g.values[i];
      rhs += h[i] * g.values[i];
    }
    CHECK(std::abs(lhs - rhs) / double(h.size()) < 1e-6);
  }

  const auto d = CircleMapModel::doubling();
  const TransferOperator Ld(d);
  const auto gd = invariant_density(d);
  for (double v : markov_apply(sample_on_grid(cos1, d.grid()), Ld, gd)) CHECK(std::abs(v) < 1e-10);
}

TEST_CASE("exponential mixing") {
  const auto d = CircleMapModel::doubling();
  const TransferOperator Ld(d);
  const auto gd = invariant_density(d);
  const auto tr = exp_decay_trace(Ld, gd, sample_on_grid(cos1, d.grid()), 20);
  REQUIRE(tr.rows.size() >= 2);
  CHECK(tr.rows[1].delta < 1e-10);
  CHECK_THROWS_WITH(mixing_rate_exp(Ld, gd, sample_on_grid(cos1, d.grid()), 20), "no decay measured");

  const auto two = exp_decay_trace(Ld, gd, sample_on_grid([](double x) { return cos1(x) + cos1(2 * x); }, d.grid()), 20);
  CHECK(two.rows[1].delta == Approx(1.0).margin(1e-5));
  CHECK(two.rows[2].delta < 1e-10);

  const auto m = CircleMapModel::perturbed2(0.5);
  const TransferOperator L(m);
  const auto g = invariant_density(m);
  const auto fit = mixing_rate_exp(L, g, sample_on_grid(cos1, m.grid()), 40);
  REQUIRE(fit.sigma.has_value());
  CHECK(*fit.sigma > 0.0);
  CHECK(*fit.sigma < 1.0);
  CHECK(fit.usable_ratios >= 3);
}

TEST_CASE("sampling from a grid density") {
  const auto m = CircleMapModel::perturbed2(0.5);
  const auto g = invariant_density(m);
  Rng rng(5);
  std::vector<double> xs(100000);
  for (double& x : xs) x = sample_from_density(g, rng);
  const auto cdf = [&](double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double u = x * double(g.cumulative.size());
    const auto i = static_cast<std::size_t>(u);
    const double below = i == 0 ? 0.0 : g.cumulative[i - 1];
    return below + (u - double(i)) * (g.cumulative[i] - below);
  };
  CHECK(ks_statistic(xs, cdf) < 0.01);

  const auto u = invariant_density(CircleMapModel::doubling());
  std::vector<double> us(20000);
  for (double& x : us) x = sample_from_density(u, rng);
  CHECK(ks_statistic(us, [](double x) { return std::clamp(x, 0.0, 1.0); }) < 0.015);
}

TEST_CASE("backward chains") {
  const auto d = CircleMapModel::doubling();
  const auto gd = invariant_density(d);
  Rng rng(6);
  int low = 0;
  const int N = 20000;
  for (int t = 0; t < N; ++t) {
    const auto xs = backward_chain(d, gd, 0.0, 1, rng);
    REQUIRE(xs.size() == 2);
    CHECK((xs[1] == 0.0 || xs[1] == 0.5));
    if (xs[1] == 0.0) ++low;
  }
  CHECK(std::abs(low / double(N) - 0.5) < 3.0 * std::sqrt(0.25 / N));

  // Backward doubling prepends binary digits: x_{j+1} = (x_j + b) / 2.
  const auto xs = backward_chain(d, gd, 0.3, 10, rng);
  for (std::size_t j = 0; j + 1 < xs.size(); ++j) {
    const double b = 2.0 * xs[j + 1] - xs[j];
    CHECK(std::abs(b - std::round(b)) < 1e-12);
  }

  // x_20 is uniform from a fixed start.
  std::vector<double> ends(100000);
  for (std::size_t i = 0; i < ends.size(); ++i) {
    Rng r = stream_rng(77, i);
    ends[i] = backward_chain(d, gd, 0.123, 20, r).back();
  }
  CHECK(chi_square_uniform(ends, 64).p_value > 1e-4);
}

TEST_CASE("backward chain preserves the invariant law") {
  const auto m = CircleMapModel::perturbed2(0.5);
  const auto g = invariant_density(m);
  std::vector<double> x0(50000), x1(50000), fx(50000);
  Rng rng(7);
  for (std::size_t i = 0; i < x0.size(); ++i) {
    x0[i] = sample_from_density(g, rng);
    x1[i] = backward_chain(m, g, x0[i], 1, rng).back();
    fx[i] = m.map(sample_from_density(g, rng));
  }
  std::vector<double> fresh(50000);
  for (double& v : fresh) v = sample_from_density(g, rng);
  CHECK(ks_two_sample(x0, x1) < 0.015);
  CHECK(ks_two_sample(fresh, fx) < 0.015);
}

TEST_CASE("grid sigma2 for the doubling map") {
  // cos(2 pi x) under the backward doubling chain: Q cos = 0, so the sums
  // are martingale-like with sigma2 = E[cos^2] = 1/2.
  const auto d = CircleMapModel::doubling();
  const TransferOperator L(d);
  const auto g = invariant_density(d);
  CHECK(grid_sigma2(L, g, sample_on_grid(cos1, d.grid())) == Approx(0.5).epsilon(1e-9));
}
