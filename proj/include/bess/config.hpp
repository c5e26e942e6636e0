#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bess/battery_plant.hpp"
#include "bess/load_profile.hpp"
#include "bess/simulation.hpp"

namespace bess {

/// Invalid configuration. field() is a dotted path such as "schedule.soc_min".
class ConfigError : public std::runtime_error {
public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

private:
  std::string field_;
};

enum class LoadSourceKind { synthetic, csv };

struct LoadSource {
  LoadSourceKind kind = LoadSourceKind::synthetic;
  std::filesystem::path path;
  double expected_dt_s = 0.0;
  SyntheticLoadSpec synthetic;
  std::optional<std::uint64_t> seed; // defaults to the run seed
};

struct Horizon {
  std::optional<std::string> start_date; // YYYY-MM-DD, inclusive
  std::optional<std::string> end_date;   // YYYY-MM-DD, inclusive
};

struct OutputSettings {
  std::optional<std::filesystem::path> directory; // else $BESS_OUTPUT_DIR, else ./bess_out
  std::vector<std::string> formats = {"csv"};
};

struct OptimizeSettings {
  double soc_spread = 0.0; // initial SoC of cluster j spread linearly over +-soc_spread
  bool record_trace = true;
};

struct SweepSettings {
  std::vector<double> depths_w = {1e6, 2e6, 3e6, 4e6, 5e6, 6e6, 7e6, 8e6, 9e6, 10e6};
  double bin_width_w = 1e5;
};

struct RunConfig {
  std::size_t cluster_count = 100;
  PlantConfig plant;
  ScheduleSettings schedule;
  double forecast_noise = 0.0;
  AllocatorSettings allocator;
  LoadSource load;
  Horizon horizon;
  OutputSettings output;
  OptimizeSettings optimize;
  SweepSettings sweep;
  std::uint64_t seed = 0;
  nlohmann::json source; // the document as given, after overrides

  std::uint64_t load_seed() const { return load.seed.value_or(seed); }
};

/// Parses and validates. Relative paths resolve against base_dir.
RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path,
                      const std::optional<std::uint64_t>& seed_override = std::nullopt);

/// Cross-field checks (depth vs rating, SoC band, referenced files).
void validate_config(const RunConfig& cfg);

/// The configured load restricted to the horizon.
LoadProfile resolve_load(const RunConfig& cfg, std::vector<std::string>* warnings = nullptr);

/// 64-bit FNV-1a of the canonical JSON text.
std::uint64_t config_hash(const nlohmann::json& doc);

} // namespace bess
