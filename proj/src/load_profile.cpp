#include "bess/load_profile.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>

#include <nlohmann/json.hpp>

#include "bess/format.hpp"

namespace bess {

namespace {

constexpr double kSecondsPerDay = 86400.0;

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_fixed_int(const std::string& s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  const char* b = s.data() + pos;
  const auto [p, ec] = std::from_chars(b, b + len, out);
  return ec == std::errc() && p == b + len;
}

std::optional<double> parse_number(const std::string& field) {
  const std::string t = trim(field);
  if (t.empty()) return std::nullopt;
  double v = 0.0;
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

// Wrapped distance in hours between two times of day.
double hour_distance(double a, double b) {
  const double d = std::fmod(std::abs(a - b), 24.0);
  return std::min(d, 24.0 - d);
}

double bump(double h, double center, double width) {
  const double d = hour_distance(h, center);
  return std::exp(-d * d / (2.0 * width * width));
}

} // namespace

std::optional<std::int64_t> parse_iso8601(const std::string& raw) {
  const std::string s = trim(raw);
  if (s.size() < 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') ||
      s[13] != ':' || s[16] != ':')
    return std::nullopt;
  int y = 0, mo = 0, d = 0, hh = 0, mm = 0, ss = 0;
  if (!parse_fixed_int(s, 0, 4, y) || !parse_fixed_int(s, 5, 2, mo) || !parse_fixed_int(s, 8, 2, d) ||
      !parse_fixed_int(s, 11, 2, hh) || !parse_fixed_int(s, 14, 2, mm) ||
      !parse_fixed_int(s, 17, 2, ss))
    return std::nullopt;
  const std::string tail = s.substr(19);
  if (!(tail.empty() || tail == "Z" || tail == "+00:00")) return std::nullopt;
  if (hh > 23 || mm > 59 || ss > 59) return std::nullopt;
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  const auto days_since = sys_days{ymd}.time_since_epoch().count();
  return static_cast<std::int64_t>(days_since) * 86400 + hh * 3600 + mm * 60 + ss;
}

std::string format_iso8601(std::int64_t epoch_s) {
  using namespace std::chrono;
  std::int64_t days = epoch_s / 86400;
  std::int64_t rem = epoch_s % 86400;
  if (rem < 0) {
    rem += 86400;
    --days;
  }
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(rem / 3600), static_cast<int>(rem % 3600 / 60),
                static_cast<int>(rem % 60));
  return buf;
}

IngestResult load_profile_from_csv(std::istream& in, double expected_dt_s) {
  IngestResult out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!trim(line).empty()) break;
  }
  if (row == 0 || trim(line).empty())
    throw IngestError(1, "file is empty; expected header 'timestamp,load_w'");
  {
    std::string h = trim(line);
    if (h.size() >= 3 && static_cast<unsigned char>(h[0]) == 0xEF) h = h.substr(3);
    if (h != "timestamp,load_w")
      throw IngestError(row, "expected header 'timestamp,load_w', found '" + h + "'");
  }

  auto& values = out.profile.values_w;
  std::int64_t dt = expected_dt_s > 0.0 ? std::llround(expected_dt_s) : 0;
  if (expected_dt_s > 0.0 && std::abs(expected_dt_s - static_cast<double>(dt)) > 1e-9)
    throw std::invalid_argument("expected sample spacing must be a whole number of seconds");
  std::optional<std::int64_t> prev_t;

  while (std::getline(in, line)) {
    ++row;
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto comma = t.find(',');
    if (comma == std::string::npos || t.find(',', comma + 1) != std::string::npos)
      throw IngestError(row, "expected two fields 'timestamp,load_w'");
    const auto ts = parse_iso8601(t.substr(0, comma));
    if (!ts) throw IngestError(row, "unparseable timestamp '" + trim(t.substr(0, comma)) + "'");
    const auto v = parse_number(t.substr(comma + 1));
    if (!v) throw IngestError(row, "unparseable load value '" + trim(t.substr(comma + 1)) + "'");
    if (*v < 0.0) throw IngestError(row, "negative load " + format_double(*v) + " W");

    if (!prev_t) {
      out.profile.start_time = format_iso8601(*ts);
      values.push_back(*v);
      prev_t = ts;
      continue;
    }
    const std::int64_t delta = *ts - *prev_t;
    if (dt == 0) {
      if (delta <= 0) throw IngestError(row, "timestamps are not increasing");
      dt = delta;
    }
    if (delta <= 0 || delta % dt != 0)
      throw IngestError(row, "non-uniform spacing: " + std::to_string(delta) +
                                 " s after the previous row, expected a multiple of " +
                                 std::to_string(dt) + " s");
    const std::int64_t missing = delta / dt - 1;
    if (missing > static_cast<std::int64_t>(kMaxInterpolatedGap))
      throw IngestError(row, "gap of " + std::to_string(missing) + " missing samples between " +
                                 format_iso8601(*prev_t) + " and " + format_iso8601(*ts) +
                                 " exceeds the limit of " + std::to_string(kMaxInterpolatedGap));
    if (missing > 0) {
      const double a = values.back();
      for (std::int64_t k = 1; k <= missing; ++k)
        values.push_back(a + (*v - a) * static_cast<double>(k) / static_cast<double>(missing + 1));
      out.warnings.push_back("row " + std::to_string(row) + ": interpolated " +
                             std::to_string(missing) + " missing sample(s) before " +
                             format_iso8601(*ts));
    }
    values.push_back(*v);
    prev_t = ts;
  }
  if (values.empty()) throw IngestError(row, "no data rows");
  if (dt == 0) dt = expected_dt_s > 0.0 ? std::llround(expected_dt_s) : 60;
  out.profile.dt_s = static_cast<double>(dt);
  return out;
}

IngestResult load_profile_from_csv(const std::filesystem::path& path, double expected_dt_s) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open load file '" + path.string() + "'");
  return load_profile_from_csv(f, expected_dt_s);
}

void write_profile_csv(std::ostream& out, const LoadProfile& profile) {
  const auto start = parse_iso8601(profile.start_time);
  if (!start) throw std::invalid_argument("profile start_time is not ISO-8601");
  const auto dt = std::llround(profile.dt_s);
  if (std::abs(profile.dt_s - static_cast<double>(dt)) > 1e-9)
    throw std::invalid_argument("profile dt_s must be a whole number of seconds");
  out << "timestamp,load_w\n";
  for (std::size_t i = 0; i < profile.size(); ++i)
    out << format_iso8601(*start + static_cast<std::int64_t>(i) * dt) << ','
        << format_double(profile.values_w[i]) << '\n';
}

void SyntheticLoadSpec::validate() const {
  if (days == 0) throw std::invalid_argument("synthetic.days must be > 0");
  if (!(dt_s > 0.0) || std::abs(dt_s - std::round(dt_s)) > 1e-9 ||
      std::fmod(kSecondsPerDay, dt_s) != 0.0)
    throw std::invalid_argument("synthetic.dt_s must be a whole number of seconds dividing a day");
  if (!parse_iso8601(start_time)) throw std::invalid_argument("synthetic.start_time is not ISO-8601");
  if (!(base_w > 0.0)) throw std::invalid_argument("synthetic.base_w must be > 0");
  if (valley_width_h <= 0.0 || morning_width_h <= 0.0 || evening_width_h <= 0.0)
    throw std::invalid_argument("synthetic bump widths must be > 0");
  if (noise_sigma < 0.0 || day_scale_sigma < 0.0)
    throw std::invalid_argument("synthetic noise levels must be >= 0");
  if (!(noise_phi > -1.0 && noise_phi < 1.0))
    throw std::invalid_argument("synthetic.noise_phi must lie in (-1, 1)");
}

LoadProfile synth_load(const SyntheticLoadSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  LoadProfile p;
  p.start_time = spec.start_time;
  p.dt_s = spec.dt_s;
  const auto per_day = static_cast<std::size_t>(std::llround(kSecondsPerDay / spec.dt_s));
  p.values_w.reserve(spec.days * per_day);

  const std::int64_t start = *parse_iso8601(spec.start_time);
  const std::int64_t start_day = start / 86400;
  const double start_hour = static_cast<double>(start % 86400) / 3600.0;
  const double innovation = spec.noise_sigma * std::sqrt(1.0 - spec.noise_phi * spec.noise_phi);
  double ar = 0.0;

  for (std::size_t d = 0; d < spec.days; ++d) {
    const std::int64_t abs_day = start_day + static_cast<std::int64_t>(d);
    const auto weekday = ((abs_day + 4) % 7 + 7) % 7; // 0 = Sunday
    const bool weekend = weekday == 0 || weekday == 6;
    using namespace std::chrono;
    const year_month_day ymd{sys_days{days{abs_day}}};
    const auto doy = (sys_days{ymd} - sys_days{ymd.year() / January / 1}).count();
    const double season =
        1.0 + spec.seasonal_amplitude * std::cos(2.0 * std::numbers::pi * (doy - 196) / 365.0);
    const double valley_scale = std::max(0.0, 1.0 + spec.day_scale_sigma * normal(rng));
    const double peak_scale = std::max(0.0, 1.0 + spec.day_scale_sigma * normal(rng));
    const double peak_gain = peak_scale * season * (weekend ? spec.weekend_factor : 1.0);

    for (std::size_t t = 0; t < per_day; ++t) {
      const double h = std::fmod(start_hour + static_cast<double>(t) * spec.dt_s / 3600.0, 24.0);
      const double shape =
          spec.base_w - spec.valley_depth_w * valley_scale * bump(h, spec.valley_center_h, spec.valley_width_h) +
          peak_gain * (spec.morning_peak_w * bump(h, spec.morning_center_h, spec.morning_width_h) +
                       spec.evening_peak_w * bump(h, spec.evening_center_h, spec.evening_width_h));
      ar = spec.noise_phi * ar + innovation * normal(rng);
      p.values_w.push_back(std::max(0.0, shape * (1.0 + ar)));
    }
  }
  return p;
}

void to_json(nlohmann::json& j, const SyntheticLoadSpec& s) {
  j = {{"days", s.days},
       {"dt_s", s.dt_s},
       {"start_time", s.start_time},
       {"base_w", s.base_w},
       {"valley_depth_w", s.valley_depth_w},
       {"valley_center_h", s.valley_center_h},
       {"valley_width_h", s.valley_width_h},
       {"morning_peak_w", s.morning_peak_w},
       {"morning_center_h", s.morning_center_h},
       {"morning_width_h", s.morning_width_h},
       {"evening_peak_w", s.evening_peak_w},
       {"evening_center_h", s.evening_center_h},
       {"evening_width_h", s.evening_width_h},
       {"weekend_factor", s.weekend_factor},
       {"seasonal_amplitude", s.seasonal_amplitude},
       {"day_scale_sigma", s.day_scale_sigma},
       {"noise_sigma", s.noise_sigma},
       {"noise_phi", s.noise_phi}};
}

void from_json(const nlohmann::json& j, SyntheticLoadSpec& s) {
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("days", s.days);
  get("dt_s", s.dt_s);
  get("start_time", s.start_time);
  get("base_w", s.base_w);
  get("valley_depth_w", s.valley_depth_w);
  get("valley_center_h", s.valley_center_h);
  get("valley_width_h", s.valley_width_h);
  get("morning_peak_w", s.morning_peak_w);
  get("morning_center_h", s.morning_center_h);
  get("morning_width_h", s.morning_width_h);
  get("evening_peak_w", s.evening_peak_w);
  get("evening_center_h", s.evening_center_h);
  get("evening_width_h", s.evening_width_h);
  get("weekend_factor", s.weekend_factor);
  get("seasonal_amplitude", s.seasonal_amplitude);
  get("day_scale_sigma", s.day_scale_sigma);
  get("noise_sigma", s.noise_sigma);
  get("noise_phi", s.noise_phi);
}

} // namespace bess
