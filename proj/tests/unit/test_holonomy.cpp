#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "mixlab/holonomy.hpp"

using namespace mixlab;
using Catch::Approx;

namespace {

const TorusPoint kZero{0.0};

TorusPoint pt(double x) { return TorusPoint{x}; }

double u_theta(const TorusPoint& t) { return std::cos(2.0 * std::numbers::pi * t[0]) + 0.3 * std::sin(4.0 * std::numbers::pi * t[0]); }

TabularObservable random_tabular(long w, int K, std::uint64_t seed) {
  Rng rng(seed);
  return TabularObservable::random({pt(0.0), pt(0.5)}, w, K, rng);
}

/// Random state whose symbols are alphabet atoms, fills included.
SkewPoint atom_state(long lo, long hi, Rng& rng) {
  const auto mu = TorusMeasure::atomic({{pt(0.0), 0.5}, {pt(0.5), 0.5}});
  return random_state(mu, lo, hi, rng);
}

/// b agrees with a on j <= 0 and theta; future symbols redrawn from atoms.
SkewPoint same_fiber(const SkewPoint& a, Rng& rng, long from = 1) {
  SkewPoint b = a;
  for (long j = std::max(from, b.omega.lo()); j <= b.omega.hi(); ++j) b.omega.set(j, pt(0.5 * double(rng.below(2))));
  b.omega.set_right_fill(pt(0.5 * double(rng.below(2))));
  return b;
}

}  // namespace

TEST_CASE("shift metric") {
  const auto x = BiSequence::constant(-6, 6, kZero);
  CHECK(shift_metric(x, x) == 0.0);
  auto y = x;
  y.set(3, pt(0.2));
  y.set(-5, pt(0.7));
  CHECK(shift_metric(x, y) == 0.125);
  auto z = x;
  z.set(0, pt(0.1));
  CHECK(shift_metric(x, z) == 1.0);
  auto f = x;
  f.set_right_fill(pt(0.4));
  CHECK(shift_metric(x, f) == std::ldexp(1.0, -7));
}

TEST_CASE("skew maps are inverse to each other") {
  Rng rng(4);
  for (int t = 0; t < 50; ++t) {
    const SkewPoint x = random_state(1, -5, 5, rng);
    const SkewPoint y = skew_forward(skew_inverse(x));
    CHECK(torus_distance(y.theta, x.theta) < 1e-15);
    for (long j = -5; j <= 5; ++j) CHECK(y.omega.at(j) == x.omega.at(j));
    const SkewPoint z = skew_inverse(skew_forward(x));
    CHECK(torus_distance(z.theta, x.theta) < 1e-15);
  }

  SkewPoint c{BiSequence::constant(-10, 2, pt(0.25)), pt(0.6)};
  for (int n = 1; n <= 8; ++n) {
    c = skew_inverse(c);
    CHECK(torus_distance(c.theta, pt(0.6 - 0.25 * n)) < 1e-14);
  }

  SkewPoint shallow{BiSequence::constant(0, 3, kZero), kZero};
  CHECK_THROWS_WITH(skew_inverse(shallow), "window exhausted");

  const SkewPoint a = random_state(1, -4, 4, rng);
  SkewPoint b = a;
  for (long j = 1; j <= 4; ++j) b.omega.set(j, pt(rng.uniform()));
  CHECK(shift_metric(skew_inverse(a).omega, skew_inverse(b).omega) <= 0.5);
}

TEST_CASE("future projection") {
  Rng rng(6);
  const SkewPoint x = random_state(1, -4, 4, rng);
  const TorusPoint p = pt(0.375);
  const SkewPoint px = future_project(x, p);
  const SkewPoint ppx = future_project(px, p);
  for (long j = -6; j <= 6; ++j) {
    CHECK(ppx.omega.at(j) == px.omega.at(j));
    if (j <= 0) CHECK(px.omega.at(j) == x.omega.at(j));
    else CHECK(px.omega.at(j) == p);
  }
  CHECK(px.theta == x.theta);
}

TEST_CASE("window observables check their window") {
  const auto ok = WindowObservable::from_state(1, -1, 1, [](const SkewPoint& x) {
    return x.omega.at(-1)[0] + 2.0 * x.omega.at(1)[0] + x.theta[0];
  });
  CHECK(ok.window() == 1);
  CHECK_THROWS_AS(WindowObservable::from_state(1, -1, 1, [](const SkewPoint& x) { return x.omega.at(2)[0]; }),
                  std::invalid_argument);
}

TEST_CASE("unstable holonomy properties") {
  const auto phi = random_tabular(3, 4, 12).as_window_observable();
  Rng rng(21);
  for (int t = 0; t < 200; ++t) {
    const SkewPoint a = atom_state(-20, 6, rng);
    const SkewPoint b = same_fiber(a, rng);
    const SkewPoint c = same_fiber(a, rng);
    CHECK(unstable_holonomy(phi, a, a) == 0.0);
    const double hab = unstable_holonomy(phi, a, b);
    CHECK(unstable_holonomy(phi, b, a) == Approx(-hab).margin(1e-12));
    CHECK(unstable_holonomy(phi, a, c) == Approx(hab + unstable_holonomy(phi, b, c)).margin(1e-12));
    // Terms past the window vanish exactly.
    const auto g = holonomy_terms(phi, a, b, phi.hi() + 10);
    for (std::size_t n = static_cast<std::size_t>(phi.hi()); n < g.size(); ++n) CHECK(std::abs(g[n]) < 1e-15);

    // Cocycle relation for pairs agreeing up to index 1.
    const SkewPoint b1 = same_fiber(a, rng, 2);
    const double lhs = unstable_holonomy(phi, a, b1) + phi(b1);
    const double rhs = phi(a) + unstable_holonomy(phi, skew_forward(a), skew_forward(b1));
    CHECK(lhs == Approx(rhs).margin(1e-12));
  }
  SkewPoint a = atom_state(-8, 6, rng);
  SkewPoint b = a;
  b.omega.set(-1, pt(0.37));
  CHECK_THROWS_WITH(unstable_holonomy(phi, a, b), "not on same fiber");
}

TEST_CASE("reduction of a theta-only observable") {
  const auto phi = WindowObservable::on_theta(1, u_theta);
  const auto pair = reduce_to_past(phi);
  Rng rng(8);
  for (int t = 0; t < 100; ++t) {
    const SkewPoint x = random_state(1, -4, 4, rng);
    CHECK(pair.eta(x) == 0.0);
    CHECK(pair.phi_minus(x) == Approx(u_theta(x.theta - x.omega.at(-1))).margin(1e-14));
  }
  CHECK(verify_cohomology(phi, pair, 1000, rng) < 1e-14);
}

TEST_CASE("reduction of a future-symbol observable") {
  const auto v = [](const TorusPoint& s) { return std::sin(2.0 * std::numbers::pi * s[0]) + s[0] * s[0]; };
  const WindowObservable phi(1, 1, [v](std::span<const TorusPoint> s, const TorusPoint&) { return v(s[2]); });
  const auto pair = reduce_to_past(phi);
  Rng rng(9);
  for (int t = 0; t < 100; ++t) {
    const SkewPoint x = random_state(1, -5, 5, rng);
    CHECK(std::abs(pair.eta(x)) < 1e-15);
    CHECK(pair.phi_minus(x) == Approx(v(x.omega.at(0))).margin(1e-14));
  }
  CHECK(future_dependence(pair, 500, rng) < 1e-12);
}

TEST_CASE("reduction of a constant") {
  const auto pair = reduce_to_past(WindowObservable::constant(1, 2.5));
  Rng rng(10);
  const SkewPoint x = random_state(1, -3, 3, rng);
  CHECK(pair.phi_minus(x) == 2.5);
  CHECK(pair.eta(x) == 0.0);
  CHECK(verify_cohomology(WindowObservable::constant(1, 2.5), pair, 100, rng) == 0.0);
}

TEST_CASE("tabular reduction is exact, future independent and mean preserving") {
  const auto tab = random_tabular(3, 4, 99);
  CHECK(tab.tuple_count() == 128);
  CHECK(tab.basis_size() == 9);
  const auto phi = tab.as_window_observable();
  const auto pair = reduce_to_past(phi);
  Rng rng(12);
  CHECK(verify_cohomology(phi, pair, 2000, rng) < 1e-12);
  CHECK(future_dependence(pair, 500, rng) < 1e-12);
  const auto mu = TorusMeasure::atomic({{pt(0.0), 0.5}, {pt(0.5), 0.5}});
  const auto m1 = stationary_mean(phi, mu, 20000, 1);
  const auto m2 = stationary_mean(pair.phi_minus, mu, 20000, 2);
  CHECK(std::abs(m1.mean - m2.mean) < 4.0 * std::hypot(m1.standard_error, m2.standard_error));
}

TEST_CASE("reduction is linear") {
  const auto p1 = random_tabular(2, 2, 1).as_window_observable();
  const auto p2 = random_tabular(1, 3, 2).as_window_observable();
  const auto r1 = reduce_to_past(p1);
  const auto r2 = reduce_to_past(p2);
  const auto r = reduce_to_past(p1 * 2.0 + p2 * -0.5);
  Rng rng(13);
  for (int t = 0; t < 200; ++t) {
    const SkewPoint x = random_state(1, -8, 8, rng);
    CHECK(r.phi_minus(x) == Approx(2.0 * r1.phi_minus(x) - 0.5 * r2.phi_minus(x)).margin(1e-12));
    CHECK(r.eta(x) == Approx(2.0 * r1.eta(x) - 0.5 * r2.eta(x)).margin(1e-12));
  }
}

TEST_CASE("Hoelder seminorm estimate") {
  Rng rng(14);
  CHECK(holder_seminorm_estimate(WindowObservable::constant(1, 3.0), 0.5, 1000, rng) == 0.0);
  const auto c = WindowObservable::on_theta(1, [](const TorusPoint& t) { return std::cos(2.0 * std::numbers::pi * t[0]); });
  const double est = holder_seminorm_estimate(c, 1.0, 4000, rng);
  CHECK(est <= 2.0 * std::numbers::pi + 1e-6);
  CHECK(est > 5.0);

  const auto phi = random_tabular(2, 2, 3).as_window_observable();
  double prev = 0.0;
  for (double beta : {0.1, 0.3, 0.6, 1.0}) {
    Rng same(15);
    const double e = holder_seminorm_estimate(phi, beta, 2000, same);
    CHECK(e >= prev * (1.0 - 1e-12));
    prev = e;
  }
}
