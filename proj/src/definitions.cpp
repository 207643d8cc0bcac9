#include "mixlab/definitions.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "mixlab/config.hpp"

namespace mixlab {

namespace {

const double kGolden = (std::sqrt(5.0) - 1.0) / 2.0;

std::string read_file(const std::filesystem::path& path, const std::string& key) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(key, "cannot open definition file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double number(const std::string& where, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || !std::isfinite(v)) throw ConfigError(where, "expected a number, got '" + text + "'");
  return v;
}

long integer(const std::string& where, const std::string& text) {
  const double v = number(where, text);
  if (v != std::floor(v) || std::abs(v) > 1e9) throw ConfigError(where, "expected an integer, got '" + text + "'");
  return static_cast<long>(v);
}

/// Definition file body: `key = value` lines plus bare data rows.
struct Definition {
  std::map<std::string, std::string> keys;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> row_lines;
  std::string origin;

  std::string at(const std::string& k) const {
    const auto it = keys.find(k);
    if (it == keys.end()) throw ConfigError(origin + ": " + k, "missing required key");
    return it->second;
  }
  std::string get(const std::string& k, const std::string& fallback) const {
    const auto it = keys.find(k);
    return it == keys.end() ? fallback : it->second;
  }
  std::string where(std::size_t row) const { return origin + ":" + std::to_string(row_lines[row]); }
};

Definition split_definition(const std::string& text, const std::string& origin) {
  Definition def;
  def.origin = origin;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq != std::string::npos) {
      const std::string k = trim(std::string_view(t).substr(0, eq));
      if (def.keys.count(k)) throw ConfigError(origin + ": " + k, "duplicate key");
      def.keys[k] = trim(std::string_view(t).substr(eq + 1));
    } else {
      def.rows.push_back(split_list(t));
      def.row_lines.push_back(lineno);
    }
  }
  return def;
}

bool is_file_ref(const std::vector<std::string>& w, const std::filesystem::path& base_dir) {
  return w.size() == 1 && std::filesystem::is_regular_file(base_dir / w[0]);
}

std::vector<std::string> words(const std::string& ref) { return split_list(ref); }

void expect_args(const std::string& key, const std::vector<std::string>& w, std::size_t lo, std::size_t hi) {
  if (w.size() - 1 < lo || w.size() - 1 > hi)
    throw ConfigError(key, "preset '" + w[0] + "' takes " + std::to_string(lo) +
                               (hi != lo ? "-" + std::to_string(hi) : std::string()) + " argument(s)");
}

}  // namespace

const std::vector<PresetInfo>& preset_catalog() {
  static const std::vector<PresetInfo> catalog{
      {"map", "doubling", "", "x -> 2x; Lebesgue is invariant, kernel weights 1/2, 1/2"},
      {"map", "perturbed2", "eps", "x -> 2x + eps sin(2 pi x) / (2 pi); expanding for |eps| < 1, smooth non-uniform density"},
      {"map", "tripling", "", "x -> 3x; Lebesgue is invariant"},
      {"measure", "dirac", "x", "point mass at x: deterministic translation, mixing DC fails (|mu-hat| = 1)"},
      {"measure", "golden-rotation", "", "point mass at (sqrt5-1)/2: ergodic translation that is not strongly mixing"},
      {"measure", "half-rotation", "", "point mass at 1/2: periodic, not ergodic"},
      {"measure", "lebesgue", "[resolution]", "Haar measure: mu-hat(k) = 0, exponential mixing in one step"},
      {"measure", "two-atom", "a b [t]", "t delta_a + (1-t) delta_b, default t = 1/2"},
      {"measure", "two-atom-golden", "", "1/2 delta_0 + 1/2 delta_g, g = (sqrt5-1)/2: mixing DC with tau = 1"},
      {"measure", "uniform-arc", "width", "normalized indicator of [0, width): absolutely continuous, mixing DC"},
      {"observable", "cos", "[k] [amplitude]", "amplitude cos(2 pi k x), default k = 1"},
      {"observable", "sin", "[k] [amplitude]", "amplitude sin(2 pi k x), default k = 1"},
      {"observable", "sum_cos_k2", "K", "sum_{k=1..K} cos(2 pi k x) / k^2"},
      {"observable", "triangle", "N", "|x - 1/2| - 1/4 truncated at radius N (Lipschitz, not smooth)"},
  };
  return catalog;
}

std::string format_preset_catalog() {
  std::string out;
  for (const auto& p : preset_catalog()) {
    std::string head = p.kind + "  " + p.name + (p.arguments.empty() ? "" : " " + p.arguments);
    if (head.size() < 36) head.resize(36, ' ');
    out += head + "  " + p.description + "\n";
  }
  return out;
}

// ---------------------------------------------------------------- measures

TorusMeasure parse_measure_definition(const std::string& text, const std::filesystem::path& base_dir,
                                      const std::string& origin) {
  const Definition def = split_definition(text, origin);
  const std::string kind = def.at("kind");
  try {
    if (kind == "atomic") {
      std::vector<Atom> atoms;
      for (std::size_t r = 0; r < def.rows.size(); ++r) {
        const auto& row = def.rows[r];
        if (row.size() < 2) throw ConfigError(def.where(r), "atom rows are 'point weight'");
        std::vector<double> coords;
        for (std::size_t i = 0; i + 1 < row.size(); ++i) coords.push_back(number(def.where(r), row[i]));
        atoms.push_back({TorusPoint::from_coords(coords), number(def.where(r), row.back())});
      }
      if (atoms.empty()) throw ConfigError(origin, "atomic measure without atoms");
      double total = 0.0;
      for (const auto& a : atoms) total += a.weight;
      if (std::abs(total - 1.0) > 1e-9)
        throw ConfigError(origin, "atom weights sum to " + std::to_string(total) + ", expected 1 within 1e-9");
      // Remove the rounding slack so the constructor's strict check passes.
      for (auto& a : atoms) a.weight /= total;
      return TorusMeasure::atomic(std::move(atoms), 1e-9);
    }
    if (kind == "density") {
      const std::string preset = def.get("preset", "");
      if (preset == "lebesgue") {
        const long res = integer(origin + ": resolution", def.get("resolution", "0"));
        return TorusMeasure::lebesgue(static_cast<std::size_t>(integer(origin + ": dim", def.get("dim", "1"))),
                                      static_cast<std::size_t>(res));
      }
      if (!preset.empty()) throw ConfigError(origin + ": preset", "unknown density preset '" + preset + "'");
      std::vector<std::size_t> resolution;
      for (const auto& r : split_list(def.at("resolution"))) {
        const long v = integer(origin + ": resolution", r);
        if (v <= 0) throw ConfigError(origin + ": resolution", "must be positive");
        resolution.push_back(static_cast<std::size_t>(v));
      }
      std::vector<double> values;
      if (def.keys.count("values"))
        for (const auto& v : split_list(def.at("values"))) values.push_back(number(origin + ": values", v));
      for (std::size_t r = 0; r < def.rows.size(); ++r)
        for (const auto& v : def.rows[r]) values.push_back(number(def.where(r), v));
      if (values.empty()) throw ConfigError(origin + ": values", "density without values");
      double total = 0.0;
      for (double v : values) total += v;
      const double integral = total / static_cast<double>(values.size());
      if (std::abs(integral - 1.0) > 1e-9)
        throw ConfigError(origin + ": values",
                          "density integrates to " + std::to_string(integral) + ", expected 1 within 1e-9");
      for (auto& v : values) v /= integral;
      return TorusMeasure::density(std::move(resolution), std::move(values));
    }
    if (kind == "mixture") {
      const double t = number(origin + ": t", def.at("t"));
      return TorusMeasure::mixture(t, resolve_measure(def.at("first"), base_dir, origin + ": first"),
                                   resolve_measure(def.at("second"), base_dir, origin + ": second"));
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(origin, e.what());
  }
  throw ConfigError(origin + ": kind", "expected atomic, density or mixture, got '" + kind + "'");
}

TorusMeasure resolve_measure(const std::string& ref, const std::filesystem::path& base_dir, const std::string& key) {
  const auto w = words(ref);
  if (w.empty()) throw ConfigError(key, "empty measure reference");
  const std::string& name = w[0];
  try {
    if (name == "lebesgue") {
      expect_args(key, w, 0, 1);
      return TorusMeasure::lebesgue(1, w.size() > 1 ? static_cast<std::size_t>(integer(key, w[1])) : 0);
    }
    if (name == "dirac") {
      expect_args(key, w, 1, 1);
      return TorusMeasure::dirac(TorusPoint{number(key, w[1])});
    }
    if (name == "two-atom-golden") {
      expect_args(key, w, 0, 0);
      return TorusMeasure::atomic({{TorusPoint{0.0}, 0.5}, {TorusPoint{kGolden}, 0.5}});
    }
    if (name == "golden-rotation") {
      expect_args(key, w, 0, 0);
      return TorusMeasure::dirac(TorusPoint{kGolden});
    }
    if (name == "half-rotation") {
      expect_args(key, w, 0, 0);
      return TorusMeasure::dirac(TorusPoint{0.5});
    }
    if (name == "two-atom") {
      expect_args(key, w, 2, 3);
      const double t = w.size() > 3 ? number(key, w[3]) : 0.5;
      if (!(t > 0.0 && t < 1.0)) throw ConfigError(key, "two-atom weight must lie in (0,1)");
      return TorusMeasure::atomic({{TorusPoint{number(key, w[1])}, t}, {TorusPoint{number(key, w[2])}, 1.0 - t}});
    }
    if (name == "uniform-arc") {
      expect_args(key, w, 1, 1);
      const double width = number(key, w[1]);
      if (!(width > 0.0 && width <= 1.0)) throw ConfigError(key, "arc width must lie in (0,1]");
      const std::size_t G = 1024;
      const auto cells = static_cast<std::size_t>(std::llround(width * G));
      if (cells == 0) throw ConfigError(key, "arc narrower than one grid cell");
      std::vector<double> v(G, 0.0);
      for (std::size_t i = 0; i < cells; ++i) v[i] = static_cast<double>(G) / static_cast<double>(cells);
      return TorusMeasure::density({G}, std::move(v));
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key, e.what());
  }
  if (is_file_ref(w, base_dir)) {
    const auto path = base_dir / name;
    return parse_measure_definition(read_file(path, key), path.parent_path(), path.filename().string());
  }
  throw ConfigError(key, "unknown measure preset '" + name + "' (not a preset or an existing file; see list-presets)");
}

// ------------------------------------------------------------ observables

FourierObservable parse_observable_definition(const std::string& text, const std::string& origin) {
  const Definition def = split_definition(text, origin);
  if (def.keys.count("preset")) {
    if (!def.rows.empty()) throw ConfigError(origin, "preset observables take no coefficient rows");
    std::string ref = def.at("preset");
    for (const char* arg : {"k", "amplitude", "K", "N"})
      if (def.keys.count(arg)) ref += " " + def.at(arg);
    return resolve_observable(ref, {}, origin + ": preset");
  }
  const long dim = integer(origin + ": dim", def.get("dim", "1"));
  if (dim < 1 || dim > static_cast<long>(kMaxDim)) throw ConfigError(origin + ": dim", "dimension out of range");
  // Rows: k_1 .. k_d re im. Missing -k entries are filled by conjugation.
  std::map<std::vector<int>, std::complex<double>> given;
  int radius = 0;
  for (std::size_t r = 0; r < def.rows.size(); ++r) {
    const auto& row = def.rows[r];
    if (row.size() != static_cast<std::size_t>(dim) + 2)
      throw ConfigError(def.where(r), "coefficient rows are 'k_1 .. k_d re im'");
    std::vector<int> k;
    for (long i = 0; i < dim; ++i) {
      k.push_back(static_cast<int>(integer(def.where(r), row[static_cast<std::size_t>(i)])));
      radius = std::max(radius, std::abs(k.back()));
    }
    const std::complex<double> c(number(def.where(r), row[dim]), number(def.where(r), row[dim + 1]));
    if (given.count(k)) throw ConfigError(def.where(r), "duplicate coefficient");
    given[k] = c;
  }
  if (given.empty()) throw ConfigError(origin, "observable without coefficients");
  const LatticeBox box(static_cast<std::size_t>(dim), radius);
  std::vector<std::complex<double>> coeffs(box.size());
  std::vector<bool> set(box.size(), false);
  for (const auto& [k, c] : given) {
    LatticeVector lv(static_cast<std::size_t>(dim));
    for (long i = 0; i < dim; ++i) lv[static_cast<std::size_t>(i)] = k[static_cast<std::size_t>(i)];
    const std::size_t idx = box.index(lv);
    coeffs[idx] = c;
    set[idx] = true;
  }
  for (std::size_t i = 0; i < box.size(); ++i)
    if (set[i] && !set[box.negated(i)]) coeffs[box.negated(i)] = std::conj(coeffs[i]);
  try {
    return FourierObservable(static_cast<std::size_t>(dim), radius, std::move(coeffs));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(origin, e.what());
  }
}

FourierObservable resolve_observable(const std::string& ref, const std::filesystem::path& base_dir,
                                     const std::string& key) {
  const auto w = words(ref);
  if (w.empty()) throw ConfigError(key, "empty observable reference");
  const std::string& name = w[0];
  if (name == "cos" || name == "sin") {
    expect_args(key, w, 0, 2);
    const int k = w.size() > 1 ? static_cast<int>(integer(key, w[1])) : 1;
    if (k == 0) throw ConfigError(key, "harmonic must be nonzero");
    const double a = w.size() > 2 ? number(key, w[2]) : 1.0;
    return name == "cos" ? FourierObservable::cosine(LatticeVector{k}, a)
                         : FourierObservable::sine(LatticeVector{k}, a);
  }
  if (name == "sum_cos_k2" || name == "triangle") {
    expect_args(key, w, 1, 1);
    const long n = integer(key, w[1]);
    if (n < 1 || n > 100000) throw ConfigError(key, "radius must lie in [1, 100000]");
    return name == "triangle" ? FourierObservable::triangle(static_cast<int>(n))
                              : FourierObservable::sum_cos_k2(static_cast<int>(n));
  }
  if (is_file_ref(w, base_dir)) {
    const auto path = base_dir / name;
    return parse_observable_definition(read_file(path, key), path.filename().string());
  }
  throw ConfigError(key, "unknown observable preset '" + name + "' (not a preset or an existing file; see list-presets)");
}

// ------------------------------------------------------------------- maps

CircleMapModel parse_map_definition(const std::string& text, std::size_t grid, const std::string& origin) {
  const Definition def = split_definition(text, origin);
  if (!def.rows.empty()) throw ConfigError(def.where(0), "map files hold only 'key = value' lines");
  if (def.keys.count("preset")) {
    std::string ref = def.at("preset");
    if (def.keys.count("eps")) ref += " " + def.at("eps");
    return resolve_map(ref, {}, grid, origin + ": preset");
  }
  const long degree = integer(origin + ": degree", def.at("degree"));
  if (degree < 2) throw ConfigError(origin + ": degree", "expanding maps need degree >= 2");
  const std::string expr = def.at("lift");
  try {
    return CircleMapModel::from_expression(expr, static_cast<int>(degree), grid);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(origin + ": lift", e.what());
  }
}

CircleMapModel resolve_map(const std::string& ref, const std::filesystem::path& base_dir, std::size_t grid,
                           const std::string& key) {
  const auto w = words(ref);
  if (w.empty()) throw ConfigError(key, "empty map reference");
  const std::string& name = w[0];
  try {
    if (name == "doubling") {
      expect_args(key, w, 0, 0);
      return CircleMapModel::doubling(grid);
    }
    if (name == "tripling") {
      expect_args(key, w, 0, 0);
      return CircleMapModel::tripling(grid);
    }
    if (name == "perturbed2") {
      expect_args(key, w, 1, 1);
      return CircleMapModel::perturbed2(number(key, w[1]), grid);
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key, e.what());
  }
  if (is_file_ref(w, base_dir)) {
    const auto path = base_dir / name;
    return parse_map_definition(read_file(path, key), grid, path.filename().string());
  }
  throw ConfigError(key, "unknown map preset '" + name + "' (not a preset or an existing file; see list-presets)");
}

// ---------------------------------------------------------------- tabular

TabularObservable parse_tabular_definition(const std::string& text, const std::string& origin) {
  const Definition def = split_definition(text, origin);
  std::vector<TorusPoint> alphabet;
  for (const auto& a : split_list(def.at("alphabet"))) alphabet.push_back(TorusPoint{number(origin + ": alphabet", a)});
  const long w = integer(origin + ": w", def.at("w"));
  const long K = integer(origin + ": K", def.at("K"));
  if (w < 0 || w > 64) throw ConfigError(origin + ": w", "window must lie in [0, 64]");
  if (K < 0 || K > 64) throw ConfigError(origin + ": K", "harmonic radius must lie in [0, 64]");
  try {
    if (def.keys.count("random_seed")) {
      if (!def.rows.empty()) throw ConfigError(origin, "random tables take no coefficient rows");
      Rng rng(static_cast<std::uint64_t>(integer(origin + ": random_seed", def.at("random_seed"))));
      return TabularObservable::random(std::move(alphabet), w, static_cast<int>(K), rng);
    }
    std::vector<std::vector<double>> table;
    for (std::size_t r = 0; r < def.rows.size(); ++r) {
      std::vector<double> row;
      for (const auto& v : def.rows[r]) row.push_back(number(def.where(r), v));
      table.push_back(std::move(row));
    }
    return TabularObservable(std::move(alphabet), w, static_cast<int>(K), std::move(table));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(origin, e.what());
  } catch (const std::length_error& e) {
    throw ConfigError(origin, e.what());
  }
}

TabularObservable load_tabular(const std::filesystem::path& path) {
  return parse_tabular_definition(read_file(path, path.string()), path.filename().string());
}

}  // namespace mixlab
