#pragma once
// Named presets and definition files for measures, observables, circle maps
// and tabular window observables. A reference is either a preset spec
// ("two-atom-golden", "dirac 0.3", "sum_cos_k2 64", "perturbed2 0.5") or a
// path to a definition file, resolved against the config's directory.
// File grammars are documented in README.md.
#include <filesystem>
#include <string>
#include <vector>

#include "mixlab/expanding.hpp"
#include "mixlab/holonomy.hpp"
#include "mixlab/measure.hpp"
#include "mixlab/spectral.hpp"

namespace mixlab {

struct PresetInfo {
  std::string kind;  ///< measure | observable | map
  std::string name;
  std::string arguments;
  std::string description;
};

/// Fixed, sorted catalogue; list-presets prints it verbatim.
const std::vector<PresetInfo>& preset_catalog();
std::string format_preset_catalog();

/// `key` names the config key holding the reference, for error messages.
TorusMeasure resolve_measure(const std::string& ref, const std::filesystem::path& base_dir,
                             const std::string& key = "measure");
FourierObservable resolve_observable(const std::string& ref, const std::filesystem::path& base_dir,
                                     const std::string& key = "observable");
CircleMapModel resolve_map(const std::string& ref, const std::filesystem::path& base_dir, std::size_t grid,
                           const std::string& key = "map");

TorusMeasure parse_measure_definition(const std::string& text, const std::filesystem::path& base_dir,
                                      const std::string& origin);
FourierObservable parse_observable_definition(const std::string& text, const std::string& origin);
CircleMapModel parse_map_definition(const std::string& text, std::size_t grid, const std::string& origin);
TabularObservable parse_tabular_definition(const std::string& text, const std::string& origin);
TabularObservable load_tabular(const std::filesystem::path& path);

}  // namespace mixlab
