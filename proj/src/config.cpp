#include "mixlab/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace mixlab {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

namespace {

double to_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(v))
    throw ConfigError(key, "expected a number, got '" + t + "'");
  return v;
}

long to_long(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  char* end = nullptr;
  errno = 0;
  const long v = std::strtol(t.c_str(), &end, 10);
  if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE)
    throw ConfigError(key, "expected an integer, got '" + t + "'");
  return v;
}

}  // namespace

Config Config::parse(std::string_view text, const std::string& origin) {
  Config cfg;
  cfg.hash_ = fnv1a64(text);
  std::string section;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno);
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError(where, "unterminated section header");
      section = trim(std::string_view(t).substr(1, t.size() - 2));
      if (section.empty()) throw ConfigError(where, "empty section name");
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError(where, "expected 'key = value'");
    const std::string name = trim(std::string_view(t).substr(0, eq));
    if (name.empty()) throw ConfigError(where, "missing key");
    const std::string key = section.empty() ? name : section + "." + name;
    if (cfg.values_.count(key)) throw ConfigError(key, "duplicate key");
    cfg.values_[key] = trim(std::string_view(t).substr(eq + 1));
  }
  return cfg;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string(), "cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  Config cfg = parse(ss.str(), path.filename().string());
  cfg.base_dir_ = path.parent_path();
  return cfg;
}

const std::string& Config::raw(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError(key, "missing required key");
  used_.insert(key);
  return it->second;
}

std::string Config::get_string(const std::string& key) const {
  const std::string& v = raw(key);
  if (v.empty()) throw ConfigError(key, "empty value");
  return v;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  return has(key) ? get_string(key) : fallback;
}

double Config::get_double(const std::string& key) const { return to_double(key, raw(key)); }

double Config::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

long Config::get_long(const std::string& key) const { return to_long(key, raw(key)); }

long Config::get_long(const std::string& key, long fallback) const { return has(key) ? get_long(key) : fallback; }

std::uint64_t Config::get_u64(const std::string& key) const {
  const std::string t = trim(raw(key));
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(t.c_str(), &end, 0);
  if (t.empty() || t.front() == '-' || end != t.c_str() + t.size() || errno == ERANGE)
    throw ConfigError(key, "expected an unsigned 64-bit integer, got '" + t + "'");
  return v;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string v = raw(key);
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

std::vector<double> Config::get_doubles(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : split_list(raw(key))) out.push_back(to_double(key, item));
  if (out.empty()) throw ConfigError(key, "empty list");
  return out;
}

std::vector<double> Config::get_doubles(const std::string& key, std::vector<double> fallback) const {
  return has(key) ? get_doubles(key) : fallback;
}

std::vector<long> Config::get_longs(const std::string& key) const {
  std::vector<long> out;
  for (const auto& item : split_list(raw(key))) out.push_back(to_long(key, item));
  if (out.empty()) throw ConfigError(key, "empty list");
  return out;
}

void Config::reject_unused() const {
  for (const auto& [key, value] : values_)
    if (!used_.count(key)) throw ConfigError(key, "unknown key");
}

}  // namespace mixlab
