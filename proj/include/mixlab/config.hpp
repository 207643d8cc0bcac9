#pragma once
// Flat experiment config: `key = value` lines grouped under `[section]`
// headers, `#` starts a comment. No includes, no nesting. Keys are addressed
// as "section.key"; keys before the first header live in section "".
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mixlab {

/// Config or definition error tied to one key (or file). what() names the key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(key + ": " + message), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// FNV-1a 64-bit.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

std::string trim(std::string_view s);
std::vector<std::string> split_list(std::string_view s);  ///< on commas and whitespace

class Config {
 public:
  static Config parse(std::string_view text, const std::string& origin = "<config>");
  static Config load(const std::filesystem::path& path);

  const std::filesystem::path& base_dir() const noexcept { return base_dir_; }
  /// FNV-1a of the raw text; identifies the config in every output row.
  std::uint64_t hash() const noexcept { return hash_; }

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long get_long(const std::string& key) const;
  long get_long(const std::string& key, long fallback) const;
  std::uint64_t get_u64(const std::string& key) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key, std::vector<double> fallback) const;
  std::vector<long> get_longs(const std::string& key) const;

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  /// Throws ConfigError for the first key that was never read.
  void reject_unused() const;

 private:
  const std::string& raw(const std::string& key) const;

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
  std::filesystem::path base_dir_;
  std::uint64_t hash_ = 0;
};

}  // namespace mixlab
