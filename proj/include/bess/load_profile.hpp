#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "bess/scheduler.hpp"

namespace bess {

class IngestError : public std::runtime_error {
public:
  IngestError(std::size_t row, const std::string& what)
      : std::runtime_error("row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const { return row_; }

private:
  std::size_t row_;
};

/// Seconds since the Unix epoch for "YYYY-MM-DDTHH:MM:SS" with an optional
/// trailing "Z". Returns nullopt on malformed input.
std::optional<std::int64_t> parse_iso8601(const std::string& s);
std::string format_iso8601(std::int64_t epoch_s);

inline constexpr std::size_t kMaxInterpolatedGap = 3;

struct IngestResult {
  LoadProfile profile;
  std::vector<std::string> warnings;
};

/// Reads `timestamp,load_w` rows. Row numbers in errors count the header as
/// row 1. expected_dt_s <= 0 infers the spacing from the first two rows.
IngestResult load_profile_from_csv(std::istream& in, double expected_dt_s = 0.0);
IngestResult load_profile_from_csv(const std::filesystem::path& path, double expected_dt_s = 0.0);

void write_profile_csv(std::ostream& out, const LoadProfile& profile);

/// Double-peak daily template with AR(1) multiplicative noise and weekly and
/// seasonal modulation. Values are synthetic, not measured data.
struct SyntheticLoadSpec {
  std::size_t days = 365;
  double dt_s = 60.0;
  std::string start_time = "2024-01-01T00:00:00Z";
  double base_w = 30e6;
  double valley_depth_w = 7e6;
  double valley_center_h = 3.5;
  double valley_width_h = 2.5;
  double morning_peak_w = 7e6;
  double morning_center_h = 10.5;
  double morning_width_h = 1.6;
  double evening_peak_w = 9e6;
  double evening_center_h = 19.0;
  double evening_width_h = 1.8;
  double weekend_factor = 0.9;      // scales the bumps on Saturdays and Sundays
  double seasonal_amplitude = 0.1;  // relative swing of the bumps over the year
  double day_scale_sigma = 0.0;     // per-day random scale of the bumps
  double noise_sigma = 0.02;        // AR(1) innovation standard deviation
  double noise_phi = 0.9;           // AR(1) coefficient

  void validate() const;
};

LoadProfile synth_load(const SyntheticLoadSpec& spec, std::uint64_t seed);

void to_json(nlohmann::json& j, const SyntheticLoadSpec& s);
void from_json(const nlohmann::json& j, SyntheticLoadSpec& s);

} // namespace bess
