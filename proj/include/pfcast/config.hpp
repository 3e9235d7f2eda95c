#pragma once

// Run configuration: one JSON document, overridden by PF_* environment
// variables, then `--set key=value` pairs, then explicit --seed/--jobs flags.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "pfcast/arima.hpp"
#include "pfcast/eval.hpp"
#include "pfcast/features.hpp"
#include "pfcast/gbt.hpp"
#include "pfcast/ingest.hpp"
#include "pfcast/panel.hpp"
#include "pfcast/seqnet.hpp"

namespace pfcast {

struct PathConfig {
  std::filesystem::path data_dir = "data";
  std::filesystem::path cache_dir = "cache";
  std::filesystem::path output_dir = "out";
};

struct TunerConfig {
  SearchSpace space = SearchSpace::gbt_default();
  std::filesystem::path trial_log;  // empty: <output_dir>/trials.csv
};

struct RunConfig {
  PathConfig paths;
  FeatureSpec features;
  SplitSpec split;
  ClipRange clip;
  gbt::GbtParams gbt;
  arima::ArimaOrder arima;
  seqnet::SeqNetParams lstm;
  TunerConfig tuner;
  std::uint64_t seed = 0;
  int jobs = 0;  // 0: OpenMP default

  /// Unknown keys are rejected. Component seeds are always derived from
  /// `seed`; per-section seed keys are ignored.
  static RunConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;
  std::filesystem::path trial_log_path() const;
};

struct ConfigSources {
  std::optional<std::filesystem::path> file;
  std::map<std::string, std::string> env;  // already filtered to PF_* names
  std::vector<std::string> sets;           // "dotted.key=value"
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
};

/// PF_* variables of the current process.
std::map<std::string, std::string> pf_environment();

/// Applies the override chain and validates. With a config file, relative
/// paths resolve against the file's directory. Bad override syntax raises
/// UsageError; bad values raise ValidationError.
RunConfig load_config(const ConfigSources& sources);

/// Sets `dotted.path` in `doc`. The value is parsed as JSON when possible and
/// kept as a string otherwise.
void set_path(nlohmann::json& doc, std::string_view dotted_path, std::string_view value);

/// Stable per-component seed from the global seed and a component name.
std::uint64_t derive_seed(std::uint64_t global, std::string_view component) noexcept;

}  // namespace pfcast
