#include "mixlab/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "mixlab/chain.hpp"
#include "mixlab/clt.hpp"
#include "mixlab/config.hpp"
#include "mixlab/definitions.hpp"
#include "mixlab/expanding.hpp"
#include "mixlab/holonomy.hpp"
#include "mixlab/spectral.hpp"
#include "mixlab/stats.hpp"

namespace mixlab {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string num(long v) { return std::to_string(v); }

/// Nonfinite doubles become null so the JSON stays valid.
json jnum(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

class Csv {
 public:
  Csv(std::string seed, std::string hash, std::vector<std::string> columns)
      : seed_(std::move(seed)), hash_(std::move(hash)) {
    text_ = "seed,config_hash";
    for (const auto& c : columns) text_ += "," + c;
    text_ += "\n";
    width_ = columns.size();
  }
  void row(const std::vector<std::string>& cells) {
    if (cells.size() != width_) throw std::logic_error("csv row width mismatch");
    text_ += seed_ + "," + hash_;
    for (const auto& c : cells) text_ += "," + c;
    text_ += "\n";
  }
  const std::string& text() const noexcept { return text_; }

 private:
  std::string seed_, hash_, text_;
  std::size_t width_;
};

struct Context {
  const Config& cfg;
  std::string section;
  std::uint64_t seed;
  std::string hash;
  ExecPolicy policy;
  fs::path out_dir;
  std::vector<fs::path> files;
  json summary = json::object();
  bool pass = true;
  std::string verdict;  ///< overrides pass/fail when set

  std::string key(const std::string& k) const { return section + "." + k; }
  Csv csv(std::vector<std::string> columns) const { return Csv(std::to_string(seed), hash, std::move(columns)); }
  std::uint64_t sub_seed(std::uint64_t tag) const { return stream_rng(seed, 0xA5A5000000000000ULL + tag).next(); }

  void write(const std::string& name, const std::string& text) {
    const fs::path path = out_dir / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
    files.push_back(path);
  }
  void check(bool ok) { pass = pass && ok; }

  TorusMeasure measure() const { return resolve_measure(cfg.get_string(key("measure")), cfg.base_dir(), key("measure")); }
  FourierObservable observable() const {
    return resolve_observable(cfg.get_string(key("observable")), cfg.base_dir(), key("observable"));
  }
  long positive(const std::string& k, long fallback) const {
    const long v = cfg.get_long(key(k), fallback);
    if (v < 1) throw ConfigError(key(k), "must be positive");
    return v;
  }
  long positive(const std::string& k) const {
    const long v = cfg.get_long(key(k));
    if (v < 1) throw ConfigError(key(k), "must be positive");
    return v;
  }
  double positive_real(const std::string& k, double fallback) const {
    const double v = cfg.get_double(key(k), fallback);
    if (!(v > 0.0)) throw ConfigError(key(k), "must be positive");
    return v;
  }
};

const std::vector<double> kDefaultTauGrid{1.0, 1.5, 2.0, 3.0};

std::vector<double> tau_grid(const Context& c) {
  auto taus = c.cfg.get_doubles(c.key("tau_grid"), kDefaultTauGrid);
  for (double t : taus)
    if (!(t > 0.0)) throw ConfigError(c.key("tau_grid"), "entries must be positive");
  return taus;
}

/// Explicit n_grid, or 1..n_max either exhaustively or log-spaced.
std::vector<long> n_list(const Context& c, long default_max, long default_points) {
  if (c.cfg.has(c.key("n_grid"))) {
    auto ns = c.cfg.get_longs(c.key("n_grid"));
    for (std::size_t i = 0; i < ns.size(); ++i)
      if (ns[i] < 1 || (i && ns[i] <= ns[i - 1]))
        throw ConfigError(c.key("n_grid"), "must be positive and strictly increasing");
    return ns;
  }
  const long n_max = c.positive("n_max", default_max);
  const std::string spacing = c.cfg.get_string(c.key("n_spacing"), "log");
  std::vector<long> ns;
  if (spacing == "all") {
    if (n_max > 10'000'000) throw ConfigError(c.key("n_max"), "too large for n_spacing = all");
    ns.resize(static_cast<std::size_t>(n_max));
    std::iota(ns.begin(), ns.end(), 1L);
    return ns;
  }
  if (spacing != "log") throw ConfigError(c.key("n_spacing"), "expected all or log");
  const long points = c.positive("n_points", default_points);
  for (long i = 0; i < points; ++i) {
    const double t = points == 1 ? 1.0 : static_cast<double>(i) / static_cast<double>(points - 1);
    const long n = std::lround(std::exp(t * std::log(static_cast<double>(n_max))));
    if (ns.empty() || n > ns.back()) ns.push_back(n);
  }
  return ns;
}

std::optional<DCFit> try_fit(const TorusMeasure& mu, int k_max, const std::vector<double>& taus) {
  try {
    return fit_mixing_dc(mu, k_max, taus);
  } catch (const std::domain_error&) {
    return std::nullopt;
  }
}

const char* verdict_of(bool ok) { return ok ? "pass" : "fail"; }

// ------------------------------------------------------------------ dc-check

void run_dc_check(Context& c) {
  const auto mu = c.measure();
  const long k_max = c.positive("k_max", 64);
  const auto taus = tau_grid(c);
  auto csv = c.csv({"k_max", "tau", "gamma", "worst_k", "verdict"});
  std::optional<double> tau_star, gamma_star;
  // gamma(tau) = min (1 - |mu-hat(k)|) |k|^tau, read off a scan at gamma = 1e-9.
  constexpr double kFloor = 1e-9;
  for (double tau : taus) {
    const auto rep = check_mixing_dc(mu, {kFloor, tau, static_cast<int>(k_max)});
    const double gamma = rep.worst_margin + kFloor;
    const bool holds = gamma > kFloor;
    if (holds && (!tau_star || tau < *tau_star)) {
      tau_star = tau;
      gamma_star = gamma;
    }
    csv.row({num(k_max), num(tau), num(gamma), rep.worst_k.to_string(), holds ? "holds" : "degenerate measure"});
  }
  json checks = json::object();
  bool ok = tau_star.has_value();
  if (c.cfg.has(c.key("gamma")) || c.cfg.has(c.key("tau"))) {
    const double gamma = c.positive_real("gamma", 1.0);
    const double tau = c.positive_real("tau", 1.0);
    const auto rep = check_mixing_dc(mu, {gamma, tau, static_cast<int>(k_max)});
    csv.row({num(k_max), num(tau), num(gamma), rep.worst_k.to_string(),
             rep.holds_up_to_kmax ? "holds" : "fails"});
    checks["requested"] = {{"gamma", gamma}, {"tau", tau}, {"holds", rep.holds_up_to_kmax},
                           {"worst_margin", rep.worst_margin}};
    ok = ok && rep.holds_up_to_kmax;
  }
  c.write("dc.csv", csv.text());
  const bool ergodic = is_ergodic_condition(mu, static_cast<int>(k_max));
  checks["ergodic_up_to_kmax"] = ergodic;
  c.summary["checks"] = checks;
  c.summary["fitted_constants"] = {{"gamma_star", gamma_star ? json(*gamma_star) : json(nullptr)},
                                   {"tau_star", tau_star ? json(*tau_star) : json(nullptr)}};
  c.summary["tolerances"] = {{"gamma_floor", kFloor}, {"k_max", k_max}};
  c.check(ok);
  if (!tau_star) c.verdict = "degenerate measure";
}

// -------------------------------------------------------------------- mixing

void run_mixing(Context& c) {
  const auto mu = c.measure();
  const auto phi = c.observable();
  const auto grid = static_cast<std::size_t>(c.positive("grid", 1024));
  const auto ns = n_list(c, 10000, 200);
  const long k_max = c.positive("k_max", 64);
  const auto taus = tau_grid(c);
  const double alpha = c.positive_real("alpha", 1.0);
  const double p_factor = c.positive_real("p_factor", 0.9);
  const long peak_max = c.positive("peak_n_max", 200);

  const auto trace = decay_trace(phi, mu, ns, grid, c.policy);
  const auto fit = try_fit(mu, static_cast<int>(k_max), taus);
  std::optional<double> p;
  if (fit) p = p_factor * alpha / fit->tau_star;

  auto csv = c.csv({"n", "bound", "grid_sup", "scaled_bound"});
  bool triangle = true, contraction = true;
  long peak_n = 0;
  double peak = -1.0;
  for (std::size_t i = 0; i < trace.rows.size(); ++i) {
    const auto& r = trace.rows[i];
    triangle = triangle && r.grid_sup_value <= r.bound_value * (1.0 + 1e-12) + 1e-15;
    if (i) contraction = contraction && r.bound_value <= trace.rows[i - 1].bound_value * (1.0 + 1e-12);
    std::string scaled;
    if (p) {
      const double s = std::pow(static_cast<double>(r.n), *p) * r.bound_value;
      if (s > peak) {
        peak = s;
        peak_n = r.n;
      }
      scaled = num(s);
    }
    csv.row({num(r.n), num(r.bound_value), num(r.grid_sup_value), scaled});
  }
  c.write("trace.csv", csv.text());

  json fitted = json::object();
  try {
    const long lo = c.cfg.get_long(c.key("fit_n_lo"), ns.front());
    const long hi = c.cfg.get_long(c.key("fit_n_hi"), ns.back());
    const auto prof = fit_power_rate(trace, lo, hi);
    fitted["C_fit"] = jnum(prof.C);
    fitted["p_fit"] = jnum(prof.p);
  } catch (const std::domain_error&) {
    fitted["C_fit"] = nullptr;
    fitted["p_fit"] = nullptr;
  }
  fitted["gamma_star"] = fit ? json(fit->gamma_star) : json(nullptr);
  fitted["tau_star"] = fit ? json(fit->tau_star) : json(nullptr);
  fitted["p"] = p ? json(*p) : json(nullptr);

  json checks = json::object();
  checks["grid_sup_below_bound"] = verdict_of(triangle);
  checks["bound_nonincreasing"] = verdict_of(contraction);
  if (p) {
    const bool coherent = peak_n <= peak_max;
    checks["rate_coherence"] = {{"verdict", verdict_of(coherent)}, {"peak_n", peak_n}, {"peak_value", peak}};
    c.check(coherent);
  } else {
    checks["rate_coherence"] = {{"verdict", "no decay expected"}};
  }
  c.check(triangle && contraction);
  c.summary["checks"] = checks;
  c.summary["fitted_constants"] = fitted;
  c.summary["slopes"] = {{"log_bound_vs_log_n", fitted["p_fit"].is_null() ? json(nullptr) : json(-fitted["p_fit"].get<double>())}};
  c.summary["tolerances"] = {{"grid_sup_relative", 1e-12}, {"peak_n_max", peak_max}};
}

// ----------------------------------------------------------------------- ldt

StartMode parse_start(const Context& c) {
  const std::string s = c.cfg.get_string(c.key("start"), "stationary");
  const auto w = split_list(s);
  if (w.size() == 1 && w[0] == "stationary") return StationaryStart{};
  if (w.size() == 2 && w[0] == "fixed") {
    try {
      return FixedStart{TorusPoint{std::stod(w[1])}};
    } catch (const std::exception&) {
    }
  }
  throw ConfigError(c.key("start"), "expected 'stationary' or 'fixed <theta>'");
}

void run_ldt(Context& c) {
  const auto mu = c.measure();
  const auto phi = c.observable();
  if (mu.dim() != phi.dim()) throw ConfigError(c.key("observable"), "dimension differs from the measure");
  const auto epsilons = c.cfg.get_doubles(c.key("epsilons"));
  for (double e : epsilons)
    if (!(e > 0.0)) throw ConfigError(c.key("epsilons"), "must be positive");
  const auto ns = c.cfg.get_longs(c.key("n_grid"));
  for (long n : ns)
    if (n < 1) throw ConfigError(c.key("n_grid"), "must be positive");
  const long trials = c.positive("trials");
  const double mean = c.cfg.get_double(c.key("mean"), phi.mean());
  const long k_max = c.positive("k_max", 64);
  const auto taus = tau_grid(c);
  const double alpha = c.positive_real("alpha", 1.0);
  const double min_drop = c.cfg.get_double(c.key("min_drop"), 0.0);

  ChainConfig cfg{mu};
  cfg.initial = parse_start(c);
  cfg.n_trials = trials;
  cfg.seed = c.seed;
  cfg.window_w = static_cast<std::size_t>(std::max(0L, c.cfg.get_long(c.key("window_w"), 0)));
  const StateObservable obs = on_theta(phi);

  // Constants: p from the mixing DC, L = sup|phi| + v_alpha (sampled),
  // C = sup_n n^p bound(n) / L over the fit range.
  const auto fit = try_fit(mu, static_cast<int>(k_max), taus);
  const bool decay_expected = fit.has_value() || c.cfg.has(c.key("p"));
  json fitted = json::object();
  std::optional<LdtConstants> consts;
  if (decay_expected) {
    const double p = c.cfg.has(c.key("p")) ? c.positive_real("p", 1.0) : 0.9 * alpha / fit->tau_star;
    double L = 0.0;
    if (c.cfg.has(c.key("L"))) {
      L = c.positive_real("L", 1.0);
      fitted["L_provenance"] = "declared";
    } else {
      L = estimate_holder_norm(phi, alpha, c.sub_seed(1));
      fitted["L_provenance"] = "estimated";
    }
    double C = 0.0;
    if (c.cfg.has(c.key("C"))) {
      C = c.positive_real("C", 1.0);
      fitted["C_provenance"] = "declared";
    } else {
      const double c_fit = fit_power_constant(phi, mu, p, c.positive("fit_n_max", 1000), c.policy);
      fitted["C_fit"] = c_fit;
      C = c_fit / L;
      fitted["C_provenance"] = "fitted";
    }
    consts = ldt_constants(C, L, p);
    fitted["C"] = consts->C;
    fitted["C_clamped"] = consts->clamped;
    fitted["L"] = consts->L;
    fitted["p"] = consts->p;
    fitted["c_bar"] = consts->c_bar;
    fitted["n_bar"] = consts->n_bar;
  }
  fitted["gamma_star"] = fit ? json(fit->gamma_star) : json(nullptr);
  fitted["tau_star"] = fit ? json(fit->tau_star) : json(nullptr);

  auto csv = c.csv({"epsilon", "n", "p_hat", "ci", "bound", "verdict"});
  json slopes = json::object();
  json checks = json::object();
  // Placeholder constants when no decay is expected: bounds are then not reported.
  const LdtConstants k = consts ? *consts : ldt_constants(4.0 / 3.0, 1.0, 1.0);
  for (double eps : epsilons) {
    const auto rep = verify_ldt(cfg, obs, mean, eps, ns, k, c.policy, decay_expected);
    for (const auto& row : rep.rows) {
      std::string bound = "", verdict;
      if (!consts) {
        verdict = "no decay expected";
      } else if (!row.bound) {
        verdict = "vacuous";
        bound = "below_threshold";
      } else {
        bound = num(*row.bound);
        if (*row.bound >= 1.0) {
          verdict = "vacuous";
        } else {
          const bool ok = row.estimate.p_hat <= *row.bound;
          verdict = verdict_of(ok);
          c.check(ok);
        }
      }
      csv.row({num(eps), num(row.estimate.n), num(row.estimate.p_hat), num(row.estimate.ci_halfwidth), bound, verdict});
    }
    const std::string label = num(eps);
    slopes[label] = rep.slope ? json(*rep.slope) : json(nullptr);
    if (decay_expected) {
      const bool slope_ok = !rep.slope || *rep.slope < 0.0;
      c.check(slope_ok);
      json ch = {{"slope_negative", verdict_of(slope_ok)}};
      if (min_drop > 0.0 && !rep.rows.empty()) {
        const double first = rep.rows.front().estimate.p_hat, last = rep.rows.back().estimate.p_hat;
        const bool drop_ok = first > 0.0 && last * min_drop < first;
        ch["drop"] = {{"verdict", verdict_of(drop_ok)}, {"first", first}, {"last", last}};
        c.check(drop_ok);
      }
      checks[label] = ch;
    }
  }
  c.write("ldt.csv", csv.text());

  if (c.cfg.has(c.key("exact_n"))) {
    const auto* fixed = std::get_if<FixedStart>(&cfg.initial);
    if (!fixed) throw ConfigError(c.key("exact_n"), "the exact oracle needs start = fixed <theta>");
    if (!mu.is_atomic()) throw ConfigError(c.key("exact_n"), "the exact oracle needs an atomic measure");
    const auto exact_ns = c.cfg.get_longs(c.key("exact_n"));
    const long oracle_trials = c.positive("oracle_trials", trials);
    auto ocsv = c.csv({"epsilon", "n", "p_exact", "p_hat", "ci", "verdict"});
    bool all = true;
    for (double eps : epsilons) {
      for (long n : exact_ns) {
        if (n < 1) throw ConfigError(c.key("exact_n"), "must be positive");
        DeviationEstimate ex;
        try {
          ex = exact_deviation(mu, obs, fixed->theta, mean, eps, n, cfg.window_w);
        } catch (const std::length_error&) {
          throw ConfigError(c.key("exact_n"), "state space too large for exact enumeration at n = " + num(n));
        }
        ChainConfig oc = cfg;
        oc.n_steps = n;
        oc.n_trials = oracle_trials;
        const auto mc = deviation_probability(oc, obs, mean, eps, c.policy);
        const bool ok = std::abs(mc.p_hat - ex.p_hat) <= 3.5 * mc.ci_halfwidth;
        all = all && ok;
        ocsv.row({num(eps), num(n), num(ex.p_hat), num(mc.p_hat), num(mc.ci_halfwidth), verdict_of(ok)});
      }
    }
    c.write("oracle.csv", ocsv.text());
    checks["exact_oracle"] = verdict_of(all);
    c.check(all);
  }
  c.summary["checks"] = checks;
  c.summary["decay_expected"] = decay_expected;
  c.summary["slopes"] = slopes;
  c.summary["fitted_constants"] = fitted;
  c.summary["tolerances"] = {{"oracle_ci_multiple", 3.5}, {"min_drop", min_drop}};
}

// ----------------------------------------------------------------------- clt

void run_clt(Context& c) {
  const auto mu = c.measure();
  auto phi = c.observable();
  const double mean = phi.mean();
  if (mean != 0.0) phi = phi + FourierObservable::constant(phi.dim(), -mean);
  const long n = c.positive("n");
  const long trials = c.positive("trials");
  const long T = c.positive("series_terms", 200);
  const double scale = c.positive_real("sigma_scale", 1.0);
  const std::string expect = c.cfg.get_string(c.key("expect"), "accept");
  if (expect != "accept" && expect != "reject") throw ConfigError(c.key("expect"), "expected accept or reject");
  const double ks_thr = c.positive_real("ks_threshold", 0.02);
  const double var_tol = c.positive_real("variance_tolerance", 0.05);
  const double reject_thr = c.positive_real("reject_threshold", 0.1);

  VarianceResult closed{}, series{};
  try {
    closed = gordin_livsic_sigma2(phi, mu);
    series = gordin_livsic_sigma2(phi, mu, VarianceResult::Method::truncated_series, T);
  } catch (const std::domain_error& e) {
    throw ConfigError(c.key("measure"), e.what());
  }
  ChainConfig cfg{mu};
  cfg.seed = c.seed;
  const double sigma2 = closed.sigma2 * scale * scale;
  const auto rep = clt_experiment(cfg, on_theta(phi), sigma2, n, trials, c.policy);

  bool ok = false;
  if (expect == "accept")
    ok = rep.ks_statistic < ks_thr && std::abs(rep.sample_variance - 1.0) <= var_tol;
  else
    ok = rep.ks_statistic > reject_thr;
  const double rel = std::abs(closed.sigma2 - series.sigma2) / closed.sigma2;
  const bool series_ok = rel <= series.residual_bound / closed.sigma2 + 1e-10;
  c.check(ok && series_ok);

  auto csv = c.csv({"n", "trials", "ks", "mean", "variance", "sigma2_closed", "sigma2_series", "residual_bound",
                    "verdict"});
  csv.row({num(n), num(trials), num(rep.ks_statistic), num(rep.sample_mean), num(rep.sample_variance),
           num(closed.sigma2), num(series.sigma2), num(series.residual_bound), verdict_of(ok)});
  c.write("clt.csv", csv.text());
  c.summary["checks"] = {{"distribution", {{"expect", expect}, {"verdict", verdict_of(ok)}, {"ks", rep.ks_statistic}}},
                         {"series_vs_closed", {{"verdict", verdict_of(series_ok)}, {"relative_difference", rel}}}};
  c.summary["observable_centered_by"] = mean;
  c.summary["fitted_constants"] = {{"sigma2_closed", closed.sigma2}, {"sigma2_series", series.sigma2},
                                   {"sigma_scale", scale}};
  c.summary["slopes"] = json::object();
  c.summary["tolerances"] = {{"ks_threshold", ks_thr}, {"variance_tolerance", var_tol},
                             {"reject_threshold", reject_thr}, {"series_terms", T}};
}

// ------------------------------------------------------------------ holonomy

TabularObservable holonomy_table(const Context& c) {
  if (c.cfg.has(c.key("table"))) {
    for (const char* k : {"alphabet", "w", "K", "table_seed"})
      if (c.cfg.has(c.key(k))) throw ConfigError(c.key(k), "conflicts with " + c.key("table"));
    const fs::path path = c.cfg.base_dir() / c.cfg.get_string(c.key("table"));
    if (!fs::is_regular_file(path)) throw ConfigError(c.key("table"), "no such file '" + path.string() + "'");
    return load_tabular(path);
  }
  std::vector<TorusPoint> alphabet;
  for (double a : c.cfg.get_doubles(c.key("alphabet"))) alphabet.push_back(TorusPoint{a});
  const long w = c.cfg.get_long(c.key("w"));
  const long K = c.cfg.get_long(c.key("K"));
  if (w < 0 || w > 64) throw ConfigError(c.key("w"), "window must lie in [0, 64]");
  if (K < 0 || K > 64) throw ConfigError(c.key("K"), "harmonic radius must lie in [0, 64]");
  Rng rng(c.cfg.has(c.key("table_seed")) ? c.cfg.get_u64(c.key("table_seed")) : c.sub_seed(10));
  try {
    return TabularObservable::random(std::move(alphabet), w, static_cast<int>(K), rng);
  } catch (const std::length_error& e) {
    throw ConfigError(c.key("w"), e.what());
  }
}

void run_holonomy(Context& c) {
  const auto tab = holonomy_table(c);
  const auto& alphabet = tab.alphabet();
  std::vector<double> weights =
      c.cfg.get_doubles(c.key("weights"), std::vector<double>(alphabet.size(), 1.0 / static_cast<double>(alphabet.size())));
  if (weights.size() != alphabet.size()) throw ConfigError(c.key("weights"), "needs one weight per alphabet atom");
  std::vector<Atom> atoms;
  double total = 0.0;
  for (std::size_t i = 0; i < alphabet.size(); ++i) {
    if (!(weights[i] > 0.0)) throw ConfigError(c.key("weights"), "weights must be positive");
    atoms.push_back({alphabet[i], weights[i]});
    total += weights[i];
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError(c.key("weights"), "weights must sum to 1 within 1e-9");
  for (auto& a : atoms) a.weight /= total;
  const auto mu = TorusMeasure::atomic(atoms, 1e-9);

  const auto samples = static_cast<std::size_t>(c.positive("samples", 10000));
  const auto future_samples = static_cast<std::size_t>(c.positive("future_samples", 1000));
  const auto fiber_pairs = static_cast<std::size_t>(c.positive("fiber_pairs", 1000));
  const auto mean_samples = static_cast<std::size_t>(c.positive("mean_samples", 100000));
  const auto seminorm_pairs = static_cast<std::size_t>(c.positive("seminorm_pairs", 2000));
  const double tol = c.positive_real("tolerance", 1e-12);
  const double z_max = c.positive_real("mean_z_max", 4.0);
  const double alpha = c.positive_real("alpha", 1.0);
  HolonomyOptions opts;
  if (c.cfg.has(c.key("p_plus"))) opts.p_plus = TorusPoint{c.cfg.get_double(c.key("p_plus"))};
  opts.tolerance = tol;

  const auto phi = tab.as_window_observable();
  HolonomyPair pair = [&] {
    try {
      return reduce_to_past(phi, opts);
    } catch (const std::logic_error& e) {
      // self-check failure: report it as a verdict, not a config error
      throw std::runtime_error(std::string("holonomy reduction failed: ") + e.what());
    }
  }();

  Rng rng(c.sub_seed(2));
  const double coh = verify_cohomology(phi, pair, samples, rng, c.policy);
  const double fut = future_dependence(pair, future_samples, rng);
  const auto props = check_holonomy_properties(phi, mu, fiber_pairs, c.sub_seed(3), c.policy);
  const auto m1 = stationary_mean(phi, mu, mean_samples, c.sub_seed(4), c.policy);
  const auto m2 = stationary_mean(pair.phi_minus, mu, mean_samples, c.sub_seed(5), c.policy);
  const double z = std::abs(m1.mean - m2.mean) / std::hypot(m1.standard_error, m2.standard_error);

  auto csv = c.csv({"check", "value", "threshold", "verdict"});
  json checks = json::object();
  const auto gate = [&](const std::string& name, double value, double threshold) {
    const bool ok = value < threshold;
    c.check(ok);
    csv.row({name, num(value), num(threshold), verdict_of(ok)});
    checks[name] = {{"value", value}, {"verdict", verdict_of(ok)}};
  };
  gate("cohomology_residual", coh, tol);
  gate("future_dependence", fut, tol);
  gate("holonomy_identity", props.identity, tol);
  gate("holonomy_antisymmetry", props.antisymmetry, tol);
  gate("holonomy_additivity", props.additivity, tol);
  gate("holonomy_cocycle", props.cocycle, tol);
  gate("holonomy_tail", props.tail, 1e-15);
  csv.row({"mean_phi", num(m1.mean), num(m1.standard_error), "estimate"});
  csv.row({"mean_phi_minus", num(m2.mean), num(m2.standard_error), "estimate"});
  gate("mean_gap_z", z, z_max);

  json seminorms = json::object();
  for (const auto& [label, beta] : std::vector<std::pair<std::string, double>>{{"beta_alpha_over_3", alpha / 3.0},
                                                                                 {"beta_alpha", alpha}}) {
    Rng r1(c.sub_seed(6)), r2(c.sub_seed(6));
    const double s_phi = holder_seminorm_estimate(phi, std::min(beta, 1.0), seminorm_pairs, r1);
    const double s_minus = holder_seminorm_estimate(pair.phi_minus, std::min(beta, 1.0), seminorm_pairs, r2);
    csv.row({"seminorm_phi_" + label, num(s_phi), "", "estimate"});
    csv.row({"seminorm_phi_minus_" + label, num(s_minus), "", "estimate"});
    seminorms[label] = {{"beta", beta}, {"phi", s_phi}, {"phi_minus", s_minus}};
  }
  c.write("holonomy.csv", csv.text());
  c.summary["checks"] = checks;
  c.summary["window"] = {{"w", tab.window()}, {"K", tab.harmonics()}, {"alphabet_size", alphabet.size()},
                         {"phi_minus_lo", pair.phi_minus.lo()}, {"phi_minus_hi", pair.phi_minus.hi()},
                         {"eta_lo", pair.eta.lo()}, {"eta_hi", pair.eta.hi()}};
  c.summary["fitted_constants"] = {{"seminorm_estimates", seminorms}};
  c.summary["slopes"] = json::object();
  c.summary["tolerances"] = {{"exactness", tol}, {"tail", 1e-15}, {"mean_z_max", z_max}};
}

// ----------------------------------------------------------------- expanding

void run_expanding(Context& c) {
  const auto grid = static_cast<std::size_t>(c.positive("grid", 2048));
  const auto model = resolve_map(c.cfg.get_string(c.key("map")), c.cfg.base_dir(), grid, c.key("map"));
  const auto phi_f = resolve_observable(c.cfg.get_string(c.key("observable"), "cos"), c.cfg.base_dir(), c.key("observable"));
  if (phi_f.dim() != 1) throw ConfigError(c.key("observable"), "circle maps need a one-dimensional observable");
  const double tol = c.positive_real("tol", 1e-12);
  const long max_iter = c.positive("max_iter", 5000);
  const double residual_tol = c.positive_real("residual_tolerance", 1e-6);
  const auto random_x = static_cast<std::size_t>(c.positive("random_x", 100));
  const double weight_tol = c.positive_real("weight_tolerance", 1e-6);
  const double unital_tol = c.positive_real("unital_tolerance", 1e-10);
  const auto duality_pairs = static_cast<std::size_t>(c.positive("duality_pairs", 10));
  const double duality_tol = c.positive_real("duality_tolerance", 1e-5);
  const long n_max = c.positive("decay_n_max", 40);
  const long chain_n = c.positive("chain_n", 2048);
  const long trials = c.positive("trials", 10000);
  const double ks_thr = c.positive_real("ks_threshold", 0.03);

  const TransferOperator L(model);
  InvariantDensity g = [&] {
    try {
      return invariant_density(model, tol, max_iter, c.policy);
    } catch (const std::runtime_error& e) {
      throw std::runtime_error(c.key("max_iter") + ": invariant density: " + e.what());
    }
  }();

  auto csv = c.csv({"check", "value", "threshold", "verdict"});
  json checks = json::object();
  const auto gate = [&](const std::string& name, double value, double threshold, bool ok) {
    c.check(ok);
    csv.row({name, num(value), num(threshold), verdict_of(ok)});
    checks[name] = {{"value", jnum(value)}, {"verdict", verdict_of(ok)}};
  };
  gate("density_residual", g.residual, residual_tol, g.residual < residual_tol);
  csv.row({"density_eigen_residual", num(g.eigen_residual), num(tol), "estimate"});
  csv.row({"density_eigenvalue", num(g.eigenvalue), "", "estimate"});
  const double integral = grid_integral(g.values);
  gate("density_integral", std::abs(integral - 1.0), 1e-10, std::abs(integral - 1.0) <= 1e-10);
  gate("density_min", g.min_value(), 0.0, g.min_value() > 0.0);
  if (c.cfg.has(c.key("uniform_tolerance"))) {
    const double ut = c.positive_real("uniform_tolerance", 1e-8);
    double dev = 0.0;
    for (double v : g.values) dev = std::max(dev, std::abs(v - 1.0));
    gate("density_uniform", dev, ut, dev <= ut);
  }

  double wsum = 0.0, wmin = 1e300;
  Rng xr(c.sub_seed(1));
  for (std::size_t t = 0; t < random_x; ++t) {
    double s = 0.0;
    for (const auto& kw : markov_kernel_weights(model, g, xr.uniform())) {
      s += kw.w;
      wmin = std::min(wmin, kw.w);
    }
    wsum = std::max(wsum, std::abs(s - 1.0));
  }
  gate("kernel_weight_sum", wsum, weight_tol, wsum <= weight_tol);
  gate("kernel_weight_min", wmin, 0.0, wmin > 0.0);

  const std::vector<double> ones(grid, 1.0);
  double unital = 0.0;
  for (double v : markov_apply(ones, L, g, c.policy)) unital = std::max(unital, std::abs(v - 1.0));
  gate("q_unital", unital, unital_tol, unital <= unital_tol);

  const double dual = duality_defect(model, L, duality_pairs, c.sub_seed(2));
  gate("duality", dual, duality_tol, dual <= duality_tol);

  const auto phi_grid = sample_on_grid([&](double x) { return phi_f(TorusPoint{x}); }, grid);
  ExpMixing decay;
  try {
    decay = mixing_rate_exp(L, g, phi_grid, n_max, c.policy);
  } catch (const std::domain_error&) {
    decay = exp_decay_trace(L, g, phi_grid, n_max, c.policy);
  }
  auto dcsv = c.csv({"n", "delta"});
  for (const auto& r : decay.rows) dcsv.row({num(r.n), num(r.delta)});
  c.write("decay.csv", dcsv.text());
  if (decay.sigma) {
    const double s = *decay.sigma;
    gate("mixing_sigma", s, 1.0, s > 0.0 && s < 1.0);
  } else {
    // Too few ratios above the floor: fine when the trace has collapsed.
    const bool collapsed = !decay.rows.empty() && decay.rows.back().delta <= 1e-10;
    const double last = decay.rows.empty() ? 1.0 : decay.rows.back().delta;
    c.check(collapsed);
    csv.row({"mixing_sigma", "", "1", collapsed ? "collapsed" : "fail"});
    checks["mixing_sigma"] = {{"value", nullptr}, {"last_delta", last}, {"verdict", collapsed ? "collapsed" : "fail"}};
  }

  // Backward-chain CLT for phi - int phi g dm.
  double mean = 0.0;
  for (std::size_t i = 0; i < grid; ++i) mean += phi_grid[i] * g.values[i];
  mean /= static_cast<double>(grid);
  std::vector<double> centered(phi_grid);
  for (auto& v : centered) v -= mean;
  const double sigma2 = grid_sigma2(L, g, centered);
  BackwardChainConfig bc;
  bc.n_steps = chain_n;
  bc.n_trials = trials;
  bc.seed = c.seed;
  const auto sums = backward_birkhoff_sums(model, g, [&](double x) { return phi_f(TorusPoint{x}) - mean; }, bc,
                                           c.policy);
  const auto rep = clt_from_sums(sums, chain_n, sigma2);
  gate("chain_clt_ks", rep.ks_statistic, ks_thr, rep.ks_statistic < ks_thr);
  csv.row({"chain_clt_variance", num(rep.sample_variance), "", "estimate"});
  c.write("expanding.csv", csv.text());

  c.summary["checks"] = checks;
  c.summary["map"] = {{"name", model.name()}, {"degree", model.degree()}, {"lambda_star", model.lambda_star()},
                      {"grid", grid}};
  c.summary["fitted_constants"] = {{"eigenvalue", g.eigenvalue},
                                   {"sigma_exp", decay.sigma ? json(*decay.sigma) : json(nullptr)},
                                   {"stationary_mean", mean},
                                   {"sigma2", sigma2},
                                   {"iterations", g.iterations}};
  c.summary["slopes"] = {{"log_delta_per_step", decay.sigma ? json(std::log(*decay.sigma)) : json(nullptr)}};
  c.summary["tolerances"] = {{"residual", residual_tol}, {"weights", weight_tol}, {"unital", unital_tol},
                             {"duality", duality_tol}, {"ks_threshold", ks_thr}};
}

const std::map<std::string, std::function<void(Context&)>>& commands() {
  static const std::map<std::string, std::function<void(Context&)>> table{
      {"clt", run_clt},       {"dc-check", run_dc_check}, {"expanding", run_expanding},
      {"holonomy", run_holonomy}, {"ldt", run_ldt},       {"mixing", run_mixing},
  };
  return table;
}

}  // namespace

std::string file_checksum(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return hex64(fnv1a64(ss.str()));
}

RunOutcome run_experiment(const fs::path& config_path, const RunOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  if (!fs::is_regular_file(config_path)) throw ConfigError(config_path.string(), "config file not found");
  const Config cfg = Config::load(config_path);
  if (opts.workers < 1) throw ConfigError("--workers", "must be at least 1");

  const std::string command = cfg.get_string("run.command");
  const auto it = commands().find(command);
  if (it == commands().end())
    throw ConfigError("run.command", "unknown command '" + command + "' (mixing, ldt, clt, holonomy, expanding, dc-check)");
  const std::uint64_t seed = opts.seed_override ? *opts.seed_override : cfg.get_u64("run.seed");
  if (opts.seed_override && cfg.has("run.seed")) (void)cfg.get_u64("run.seed");  // still validated
  fs::path out_dir = fs::path("out") / config_path.stem();
  if (cfg.has("run.out")) out_dir = cfg.get_string("run.out");
  if (opts.out_dir) out_dir = *opts.out_dir;

  Context ctx{cfg, command, seed, hex64(cfg.hash()), ExecPolicy{opts.workers}, out_dir, {}, json::object(), true, {}};
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + out_dir.string() + "': " + ec.message());

  try {
    it->second(ctx);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(command, e.what());
  }
  cfg.reject_unused();

  RunOutcome outcome;
  outcome.out_dir = out_dir;
  outcome.data_files = ctx.files;
  outcome.verdict = !ctx.verdict.empty() ? ctx.verdict : (ctx.pass ? "pass" : "fail");
  outcome.exit_code = ctx.pass ? 0 : 2;

  json summary = json::object();
  summary["command"] = command;
  summary["verdict"] = outcome.verdict;
  summary["seed"] = seed;
  summary["config_hash"] = ctx.hash;
  for (auto& [k, v] : ctx.summary.items()) summary[k] = v;
  ctx.write("summary.json", summary.dump(2) + "\n");

  json manifest = json::object();
  manifest["artifact_version"] = kArtifactVersion;
  manifest["command"] = command;
  manifest["config"] = config_path.string();
  manifest["config_hash"] = ctx.hash;
  manifest["seed"] = seed;
  manifest["rng"] = "xoshiro256** streams seeded by SplitMix64 from (seed, trial)";
  manifest["workers"] = opts.workers;
  json files = json::array();
  for (const auto& f : ctx.files)
    files.push_back({{"file", f.filename().string()}, {"bytes", fs::file_size(f)}, {"fnv1a64", file_checksum(f)}});
  manifest["files"] = files;
  manifest["verdict"] = outcome.verdict;
  manifest["wall_clock_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const fs::path mpath = out_dir / "manifest.json";
  std::ofstream mout(mpath, std::ios::binary | std::ios::trunc);
  if (!(mout << manifest.dump(2) << "\n")) throw std::runtime_error("cannot write '" + mpath.string() + "'");
  return outcome;
}

int run_command(const fs::path& config_path, const RunOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    const auto res = run_experiment(config_path, opts);
    out << "verdict: " << res.verdict << "\n";
    for (const auto& f : res.data_files) out << "  wrote " << f.string() << "\n";
    out << "  wrote " << (res.out_dir / "manifest.json").string() << "\n";
    return res.exit_code;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
  }
  return 1;
}

}  // namespace mixlab
