#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "mixlab/config.hpp"
#include "mixlab/definitions.hpp"
#include "mixlab/runner.hpp"

using namespace mixlab;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mixlab_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config parsing") {
  const auto cfg = Config::parse(
      "# comment\n[run]\ncommand = ldt   # trailing\nseed = 0x10\n\n[ldt]\nepsilons = 0.1, 0.2 0.3\nn_grid = 4,8\n");
  CHECK(cfg.get_string("run.command") == "ldt");
  CHECK(cfg.get_u64("run.seed") == 16);
  CHECK(cfg.get_doubles("ldt.epsilons") == std::vector<double>{0.1, 0.2, 0.3});
  CHECK(cfg.get_longs("ldt.n_grid") == std::vector<long>{4, 8});
  CHECK(cfg.get_long("ldt.trials", 7) == 7);
  CHECK_THROWS_WITH(cfg.get_string("ldt.measure"), "ldt.measure: missing required key");
  CHECK_THROWS_WITH(cfg.get_double("run.command"), Catch::Matchers::StartsWith("run.command: expected a number"));
  CHECK_NOTHROW(cfg.reject_unused());
}

TEST_CASE("config errors name the key") {
  CHECK_THROWS_WITH(Config::parse("[a]\nx = 1\nx = 2\n"), "a.x: duplicate key");
  CHECK_THROWS_AS(Config::parse("[a\n"), ConfigError);
  CHECK_THROWS_AS(Config::parse("justtext\n"), ConfigError);
  const auto cfg = Config::parse("[a]\nused = 1\nstray = 2\n");
  (void)cfg.get_long("a.used");
  CHECK_THROWS_WITH(cfg.reject_unused(), "a.stray: unknown key");
  CHECK_THROWS_WITH(Config::parse("[b]\ns = -1\n").get_u64("b.s"), Catch::Matchers::StartsWith("b.s"));
}

TEST_CASE("FNV-1a reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(hex64(fnv1a64("foobar")) == "85944171f73967e8");
}

TEST_CASE("measure definition files") {
  const auto dir = scratch("measures");
  write_file(dir / "ok.measure", "kind = atomic\n0.0 0.25\n0.5 0.75\n");
  write_file(dir / "bad.measure", "kind = atomic\n0.0 0.25\n0.5 0.7\n");
  write_file(dir / "slack.measure", "kind = atomic\n0.0 0.3333333333\n0.5 0.3333333333\n0.25 0.3333333334\n");
  write_file(dir / "mix.measure", "kind = mixture\nt = 0.25\nfirst = lebesgue\nsecond = ok.measure\n");
  write_file(dir / "dens.measure", "kind = density\nresolution = 4\nvalues = 0.5, 1.5, 1.5, 0.5\n");
  write_file(dir / "leb.measure", "kind = density\npreset = lebesgue\nresolution = 64\n");

  const auto ok = resolve_measure("ok.measure", dir);
  CHECK(ok.fourier_coefficient(LatticeVector{1}).real() == Approx(0.25 - 0.75));
  CHECK_THROWS_WITH(resolve_measure("bad.measure", dir), Catch::Matchers::ContainsSubstring("within 1e-9"));
  CHECK_NOTHROW(resolve_measure("slack.measure", dir));
  const auto mix = resolve_measure("mix.measure", dir);
  CHECK(std::abs(mix.fourier_coefficient(LatticeVector{1}) - 0.75 * ok.fourier_coefficient(LatticeVector{1})) < 1e-12);
  const auto dens = resolve_measure("dens.measure", dir);
  CHECK_FALSE(dens.is_atomic());
  CHECK(std::abs(resolve_measure("leb.measure", dir).fourier_coefficient(LatticeVector{2})) < 1e-12);

  CHECK(resolve_measure("two-atom-golden", dir).atoms().size() == 2);
  CHECK(resolve_measure("dirac 0.25", dir).atoms()[0].point[0] == 0.25);
  CHECK_THROWS_WITH(resolve_measure("dirac", dir, "ldt.measure"), Catch::Matchers::StartsWith("ldt.measure"));
  CHECK_THROWS_WITH(resolve_measure("no-such-thing", dir, "ldt.measure"),
                    Catch::Matchers::StartsWith("ldt.measure: unknown measure preset"));
}

TEST_CASE("observable definitions") {
  const auto dir = scratch("observables");
  write_file(dir / "lit.obs", "dim = 1\n1 0.5 0\n2 0 -0.25\n");
  const auto phi = resolve_observable("lit.obs", dir);
  for (double x : {0.0, 0.1, 0.37}) {
    const double expect = std::cos(2 * std::numbers::pi * x) + 0.5 * std::sin(4 * std::numbers::pi * x);
    CHECK(phi(TorusPoint{x}) == Approx(expect).margin(1e-14));
  }
  write_file(dir / "preset.obs", "preset = sum_cos_k2\nK = 8\n");
  CHECK(resolve_observable("preset.obs", dir).radius() == 8);
  write_file(dir / "bad.obs", "dim = 1\n1 0.5 0\n-1 0.4 0\n");
  CHECK_THROWS_AS(resolve_observable("bad.obs", dir), ConfigError);
  CHECK(resolve_observable("cos 3 2.0", dir).coefficient(LatticeVector{3}).real() == Approx(1.0));
  CHECK(resolve_observable("triangle 9", dir).radius() == 9);
  CHECK_THROWS_AS(resolve_observable("cos 0", dir), ConfigError);
}

TEST_CASE("map and tabular definitions") {
  const auto dir = scratch("maps");
  write_file(dir / "m.map", "degree = 2\nlift = 2*x + 0.3*sin(2*pi*x)/(2*pi)\n");
  const auto m = resolve_map("m.map", dir, 256);
  CHECK(m.degree() == 2);
  CHECK(m.lift(0.25) == Approx(0.5 + 0.3 / (2 * std::numbers::pi)));
  write_file(dir / "bad.map", "degree = 2\nlift = 2*y\n");
  CHECK_THROWS_WITH(resolve_map("bad.map", dir, 256), Catch::Matchers::ContainsSubstring("lift"));
  CHECK(resolve_map("perturbed2 0.5", dir, 256).lambda_star() == Approx(1.5).epsilon(1e-6));

  // rows are (1, cos, sin) coefficients, one row per alphabet tuple
  write_file(dir / "t.tab", "alphabet = 0, 0.5\nw = 0\nK = 1\n1 0.5 0\n-1 0 0.25\n");
  const auto tab = load_tabular(dir / "t.tab");
  CHECK(tab.tuple_count() == 2);
  const std::vector<TorusPoint> first{TorusPoint{0.02}}, second{TorusPoint{0.49}};
  CHECK(tab.evaluate(first, TorusPoint{0.0}) == Approx(1.5));
  CHECK(tab.evaluate(second, TorusPoint{0.25}) == Approx(-1.0 + 0.25));
  write_file(dir / "short.tab", "alphabet = 0, 0.5\nw = 0\nK = 1\n1 0.5 0\n");
  CHECK_THROWS_AS(load_tabular(dir / "short.tab"), ConfigError);
}

TEST_CASE("preset listing") {
  const std::string text = format_preset_catalog();
  for (const char* name : {"dirac", "two-atom-golden", "lebesgue", "doubling"})
    CHECK(text.find(name) != std::string::npos);
  CHECK(format_preset_catalog() == text);
}

TEST_CASE("runner exit codes") {
  const auto dir = scratch("runner");
  std::ostringstream out, err;

  CHECK(run_command(dir / "missing.conf", {}, out, err) == 1);

  write_file(dir / "dirac.conf", "[run]\ncommand = dc-check\nseed = 1\n[dc-check]\nmeasure = dirac 0.3819660112501051\n");
  RunOptions opts;
  opts.out_dir = dir / "dirac_out";
  CHECK(run_command(dir / "dirac.conf", opts, out, err) == 2);
  CHECK(slurp(dir / "dirac_out" / "dc.csv").find("degenerate measure") != std::string::npos);
  CHECK(fs::exists(dir / "dirac_out" / "manifest.json"));

  write_file(dir / "typo.conf", "[run]\ncommand = dc-check\nseed = 1\n[dc-check]\nmeasure = lebesgue\nkmax = 3\n");
  err.str("");
  CHECK(run_command(dir / "typo.conf", opts, out, err) == 1);
  CHECK(err.str().find("dc-check.kmax") != std::string::npos);

  write_file(dir / "noseed.conf", "[run]\ncommand = dc-check\n[dc-check]\nmeasure = lebesgue\n");
  err.str("");
  CHECK(run_command(dir / "noseed.conf", opts, out, err) == 1);
  CHECK(err.str().find("run.seed") != std::string::npos);
  opts.seed_override = 5;
  CHECK(run_command(dir / "noseed.conf", opts, out, err) == 0);
}

TEST_CASE("runner output is independent of the worker count") {
  const auto dir = scratch("repro");
  write_file(dir / "ldt.conf",
             "[run]\ncommand = ldt\nseed = 99\n[ldt]\nmeasure = two-atom-golden\nobservable = cos\n"
             "epsilons = 0.25, 0.4\nn_grid = 10, 20\ntrials = 3000\n");
  RunOptions a, b;
  a.out_dir = dir / "w1";
  b.out_dir = dir / "w4";
  b.workers = 4;
  const auto ra = run_experiment(dir / "ldt.conf", a);
  const auto rb = run_experiment(dir / "ldt.conf", b);
  REQUIRE(ra.data_files.size() == rb.data_files.size());
  for (std::size_t i = 0; i < ra.data_files.size(); ++i)
    if (ra.data_files[i].extension() == ".csv") CHECK(slurp(ra.data_files[i]) == slurp(rb.data_files[i]));
  const std::string csv = slurp(dir / "w1" / "ldt.csv");
  CHECK(csv.rfind("seed,config_hash,epsilon,n,p_hat,ci,bound,verdict\n", 0) == 0);
  CHECK(csv.find("\n99,") != std::string::npos);
}
