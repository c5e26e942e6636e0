#include "bess/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "bess/format.hpp"
#include "bess/reports.hpp"

namespace bess {

namespace {

using nlohmann::json;

class Node {
public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "(root)" : path_, "must be an object");
  }

  std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  void allow(std::initializer_list<const char*> keys) const {
    const std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& [k, v] : j_.items())
      if (!ok.count(k)) throw ConfigError(field(k.c_str()), "unknown key");
  }

  std::optional<Node> child(const char* key) const {
    if (!has(key)) return std::nullopt;
    return Node(j_.at(key), field(key));
  }

  template <class T>
  void read(const char* key, T& out) const {
    if (has(key)) out = convert<T>(j_.at(key), field(key));
  }

  template <class T>
  void read(const char* key, std::optional<T>& out) const {
    if (has(key)) out = convert<T>(j_.at(key), field(key));
  }

  template <class T>
  static T convert(const json& v, const std::string& f) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(f, "must be a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
      if (!v.is_number_integer() || v.get<long long>() < 0)
        throw ConfigError(f, "must be a non-negative integer");
      return v.get<T>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(f, "must be an integer");
      return v.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(f, "must be a number");
      const double x = v.get<double>();
      if (!std::isfinite(x)) throw ConfigError(f, "must be finite");
      return x;
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(f, "must be a string");
      return v.get<std::string>();
    } else {
      if (!v.is_array()) throw ConfigError(f, "must be an array");
      T out;
      for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(convert<typename T::value_type>(v[i], f + "[" + std::to_string(i) + "]"));
      return out;
    }
  }

private:
  const json& j_;
  std::string path_;
};

template <std::size_t N>
std::array<double, N> fixed_array(const Node& n, const char* key, std::array<double, N> def) {
  std::vector<double> v;
  n.read(key, v);
  if (v.empty()) return def;
  if (v.size() != N)
    throw ConfigError(n.field(key), "must hold exactly " + std::to_string(N) + " coefficients");
  std::array<double, N> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

template <class F>
void wrap(const std::string& field, F f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(field, e.what());
  }
}

ClusterParams parse_cluster(const Node& n) {
  n.allow({"n_series", "n_parallel", "rated_power_w", "rated_energy_wh", "dc_bus_voltage_v", "cell",
           "dcdc_coeffs", "acdc_coeffs"});
  ClusterParams c;
  n.read("n_series", c.n_series);
  n.read("n_parallel", c.n_parallel);
  n.read("rated_power_w", c.rated_power_w);
  n.read("rated_energy_wh", c.rated_energy_wh);
  n.read("dc_bus_voltage_v", c.dc_bus_voltage_v);
  if (auto cell = n.child("cell")) {
    cell->allow({"r_ohm", "r_pol", "c_pol", "capacity_ah", "ocv_coeffs"});
    cell->read("r_ohm", c.cell.r_ohm);
    cell->read("r_pol", c.cell.r_pol);
    cell->read("c_pol", c.cell.c_pol);
    cell->read("capacity_ah", c.cell.capacity_ah);
    wrap(cell->field("ocv_coeffs"), [&] {
      c.cell.ocv = OcvCoeffs(fixed_array<4>(*cell, "ocv_coeffs", c.cell.ocv.coefficients()));
    });
  }
  wrap(n.field("dcdc_coeffs"), [&] {
    c.dcdc_coeffs = PcsEfficiencyCoeffs(fixed_array<5>(n, "dcdc_coeffs", c.dcdc_coeffs.coefficients()));
  });
  wrap(n.field("acdc_coeffs"), [&] {
    c.acdc_coeffs = PcsEfficiencyCoeffs(fixed_array<5>(n, "acdc_coeffs", c.acdc_coeffs.coefficients()));
  });
  wrap(n.field("cell"), [&] { c.cell.validate(); });
  wrap(n.field("n_series"), [&] { c.validate(); });
  return c;
}

std::optional<std::int64_t> parse_date(const std::string& s) {
  return parse_iso8601(s + "T00:00:00Z");
}

} // namespace

RunConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  const Node root(doc, "");
  root.allow({"seed", "plant", "schedule", "allocator", "load", "horizon", "output", "optimize",
              "sweep", "description"});
  if (!root.has("seed")) throw ConfigError("seed", "an explicit seed is required");
  root.read("seed", cfg.seed);

  SocBand band;
  double initial_soc = 0.5;
  std::vector<double> initial_soc_per_cluster;
  ClusterParams cluster;
  std::optional<TransformerParams> transformer;
  double dt = 60.0;

  if (auto p = root.child("plant")) {
    p->allow({"cluster_count", "cluster", "transformer", "dt_s", "initial_soc",
              "initial_soc_per_cluster"});
    p->read("cluster_count", cfg.cluster_count);
    if (cfg.cluster_count == 0) throw ConfigError(p->field("cluster_count"), "must be >= 1");
    if (auto c = p->child("cluster")) cluster = parse_cluster(*c);
    if (auto t = p->child("transformer")) {
      t->allow({"no_load_loss_w", "rated_load_loss_w", "rated_power_w"});
      TransformerParams tp;
      t->read("no_load_loss_w", tp.no_load_loss_w);
      t->read("rated_load_loss_w", tp.rated_load_loss_w);
      t->read("rated_power_w", tp.rated_power_w);
      wrap(p->field("transformer"), [&] { tp.validate(); });
      transformer = tp;
    }
    p->read("dt_s", dt);
    if (!(dt > 0.0)) throw ConfigError(p->field("dt_s"), "must be > 0");
    p->read("initial_soc", initial_soc);
    p->read("initial_soc_per_cluster", initial_soc_per_cluster);
  }

  if (auto s = root.child("schedule")) {
    s->allow({"method", "power_depth_w", "p_chr_ref_w", "p_dis_ref_w", "soc_min", "soc_max",
              "tolerance_fraction", "max_iterations", "forecast_noise"});
    std::string method = "improved";
    s->read("method", method);
    wrap(s->field("method"), [&] { cfg.schedule.method = plan_method_from_string(method); });
    s->read("power_depth_w", cfg.schedule.power_depth_w);
    s->read("p_chr_ref_w", cfg.schedule.p_chr_ref_w);
    s->read("p_dis_ref_w", cfg.schedule.p_dis_ref_w);
    s->read("soc_min", band.soc_min);
    s->read("soc_max", band.soc_max);
    s->read("tolerance_fraction", cfg.schedule.tolerance_fraction);
    s->read("max_iterations", cfg.schedule.max_iterations);
    s->read("forecast_noise", cfg.forecast_noise);
    if (!(band.soc_min >= 0.0 && band.soc_min < 1.0))
      throw ConfigError(s->field("soc_min"), "must lie in [0, 1)");
    if (!(band.soc_max > 0.0 && band.soc_max <= 1.0))
      throw ConfigError(s->field("soc_max"), "must lie in (0, 1]");
    if (!(band.soc_min < band.soc_max))
      throw ConfigError(s->field("soc_min"), "soc_min must be below soc_max");
    if (cfg.schedule.power_depth_w && !(*cfg.schedule.power_depth_w > 0.0))
      throw ConfigError(s->field("power_depth_w"), "must be > 0");
    if (!(cfg.schedule.tolerance_fraction > 0.0))
      throw ConfigError(s->field("tolerance_fraction"), "must be > 0");
    if (cfg.schedule.max_iterations < 1)
      throw ConfigError(s->field("max_iterations"), "must be >= 1");
    if (cfg.forecast_noise < 0.0) throw ConfigError(s->field("forecast_noise"), "must be >= 0");
  }

  cfg.load.synthetic.dt_s = dt;
  cfg.allocator.pso.rng_seed = cfg.seed;
  if (auto a = root.child("allocator")) {
    a->allow({"mode", "cadence_s", "pso"});
    std::string mode = "balanced";
    a->read("mode", mode);
    wrap(a->field("mode"), [&] { cfg.allocator.mode = allocation_mode_from_string(mode); });
    a->read("cadence_s", cfg.allocator.cadence_s);
    if (!(cfg.allocator.cadence_s > 0.0)) throw ConfigError(a->field("cadence_s"), "must be > 0");
    if (auto p = a->child("pso")) {
      p->allow({"inertia", "cognitive", "social", "particles", "max_iterations", "velocity_min",
                "velocity_max", "init_perturbation", "seed"});
      auto& q = cfg.allocator.pso;
      p->read("inertia", q.inertia);
      p->read("cognitive", q.cognitive);
      p->read("social", q.social);
      p->read("particles", q.particles);
      p->read("max_iterations", q.max_iterations);
      p->read("velocity_min", q.velocity_min);
      p->read("velocity_max", q.velocity_max);
      p->read("init_perturbation", q.init_perturbation);
      p->read("seed", q.rng_seed);
      wrap(a->field("pso"), [&] { q.validate(); });
    }
  }

  if (auto l = root.child("load")) {
    l->allow({"source", "path", "expected_dt_s", "synthetic", "seed"});
    std::string source = "synthetic";
    l->read("source", source);
    if (source == "csv")
      cfg.load.kind = LoadSourceKind::csv;
    else if (source != "synthetic")
      throw ConfigError(l->field("source"), "must be 'synthetic' or 'csv'");
    std::string path;
    l->read("path", path);
    if (!path.empty()) {
      cfg.load.path = path;
      if (cfg.load.path.is_relative() && !base_dir.empty()) cfg.load.path = base_dir / cfg.load.path;
    }
    if (cfg.load.kind == LoadSourceKind::csv && path.empty())
      throw ConfigError(l->field("path"), "required when source is 'csv'");
    l->read("expected_dt_s", cfg.load.expected_dt_s);
    l->read("seed", cfg.load.seed);
    if (l->has("synthetic")) {
      const auto syn = l->child("synthetic");
      syn->allow({"days", "dt_s", "start_time", "base_w", "valley_depth_w", "valley_center_h",
                  "valley_width_h", "morning_peak_w", "morning_center_h", "morning_width_h",
                  "evening_peak_w", "evening_center_h", "evening_width_h", "weekend_factor",
                  "seasonal_amplitude", "day_scale_sigma", "noise_sigma", "noise_phi"});
      wrap(l->field("synthetic"), [&] { from_json(doc.at("load").at("synthetic"), cfg.load.synthetic); });
    }
  }
  wrap("load.synthetic", [&] { cfg.load.synthetic.validate(); });

  if (auto h = root.child("horizon")) {
    h->allow({"start_date", "end_date"});
    h->read("start_date", cfg.horizon.start_date);
    h->read("end_date", cfg.horizon.end_date);
    if (cfg.horizon.start_date && !parse_date(*cfg.horizon.start_date))
      throw ConfigError(h->field("start_date"), "must be YYYY-MM-DD");
    if (cfg.horizon.end_date && !parse_date(*cfg.horizon.end_date))
      throw ConfigError(h->field("end_date"), "must be YYYY-MM-DD");
    if (cfg.horizon.start_date && cfg.horizon.end_date &&
        *parse_date(*cfg.horizon.end_date) < *parse_date(*cfg.horizon.start_date))
      throw ConfigError(h->field("end_date"), "must not precede start_date");
  }

  if (auto o = root.child("output")) {
    o->allow({"directory", "formats"});
    std::string dir;
    o->read("directory", dir);
    if (!dir.empty()) cfg.output.directory = std::filesystem::path(dir);
    o->read("formats", cfg.output.formats);
    for (const auto& f : cfg.output.formats)
      if (f != "csv" && f != "json") throw ConfigError(o->field("formats"), "unknown format '" + f + "'");
    if (cfg.output.formats.empty()) throw ConfigError(o->field("formats"), "must not be empty");
  }

  if (auto o = root.child("optimize")) {
    o->allow({"soc_spread", "record_trace"});
    o->read("soc_spread", cfg.optimize.soc_spread);
    o->read("record_trace", cfg.optimize.record_trace);
    if (!(cfg.optimize.soc_spread >= 0.0 && cfg.optimize.soc_spread < 0.5))
      throw ConfigError(o->field("soc_spread"), "must lie in [0, 0.5)");
  }

  if (auto s = root.child("sweep")) {
    s->allow({"depths_w", "bin_width_w"});
    s->read("depths_w", cfg.sweep.depths_w);
    s->read("bin_width_w", cfg.sweep.bin_width_w);
    if (cfg.sweep.depths_w.empty()) throw ConfigError(s->field("depths_w"), "must not be empty");
    for (double d : cfg.sweep.depths_w) {
      const double m = d / cluster.rated_power_w;
      if (!(d > 0.0) || std::abs(m - std::round(m)) > 1e-9 * m)
        throw ConfigError(s->field("depths_w"),
                          "each depth must be a positive multiple of the cluster rating");
    }
    if (!(cfg.sweep.bin_width_w > 0.0)) throw ConfigError(s->field("bin_width_w"), "must be > 0");
  }

  cfg.plant = PlantConfig::uniform(cfg.cluster_count, cluster, initial_soc);
  if (transformer) cfg.plant.transformer = *transformer;
  cfg.plant.dt_s = dt;
  cfg.plant.soc_min = band.soc_min;
  cfg.plant.soc_max = band.soc_max;
  cfg.plant.initial_soc_per_cluster = initial_soc_per_cluster;
  cfg.source = doc;
  validate_config(cfg);
  return cfg;
}

void validate_config(const RunConfig& cfg) {
  const auto& p = cfg.plant;
  if (!(cfg.plant.initial_soc >= p.soc_min && cfg.plant.initial_soc <= p.soc_max))
    throw ConfigError("plant.initial_soc", "must lie inside [soc_min, soc_max]");
  if (!p.initial_soc_per_cluster.empty()) {
    if (p.initial_soc_per_cluster.size() != p.clusters.size())
      throw ConfigError("plant.initial_soc_per_cluster", "needs one entry per cluster");
    for (double s : p.initial_soc_per_cluster)
      if (!(s >= p.soc_min && s <= p.soc_max))
        throw ConfigError("plant.initial_soc_per_cluster", "entries must lie inside [soc_min, soc_max]");
  }
  double rated = 0.0;
  for (const auto& c : p.clusters) rated += c.rated_power_w;
  if (cfg.schedule.power_depth_w && *cfg.schedule.power_depth_w > rated * (1.0 + 1e-12))
    throw ConfigError("schedule.power_depth_w", "exceeds the plant's total rated power (" +
                                                    format_double(rated) + " W)");
  if (cfg.schedule.p_chr_ref_w && cfg.schedule.p_dis_ref_w &&
      !(*cfg.schedule.p_chr_ref_w < *cfg.schedule.p_dis_ref_w))
    throw ConfigError("schedule.p_chr_ref_w", "must be below p_dis_ref_w");
  if (cfg.load.kind == LoadSourceKind::csv && !std::filesystem::exists(cfg.load.path))
    throw ConfigError("load.path", "file '" + cfg.load.path.string() + "' does not exist");
  if (cfg.load.kind == LoadSourceKind::synthetic &&
      std::abs(cfg.load.synthetic.dt_s - p.dt_s) > 1e-9)
    throw ConfigError("load.synthetic.dt_s", "must equal plant.dt_s");
  wrap("plant", [&] { p.validate(); });
}

RunConfig load_config(const std::filesystem::path& path,
                      const std::optional<std::uint64_t>& seed_override) {
  std::ifstream f(path);
  if (!f) throw ConfigError("(file)", "cannot open config file '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError("(file)", std::string("malformed JSON: ") + e.what());
  }
  if (seed_override) {
    if (!doc.is_object()) throw ConfigError("(root)", "must be an object");
    doc["seed"] = *seed_override;
  }
  return parse_config(doc, path.parent_path());
}

LoadProfile resolve_load(const RunConfig& cfg, std::vector<std::string>* warnings) {
  LoadProfile profile;
  if (cfg.load.kind == LoadSourceKind::csv) {
    auto r = load_profile_from_csv(cfg.load.path, cfg.load.expected_dt_s);
    if (warnings) warnings->insert(warnings->end(), r.warnings.begin(), r.warnings.end());
    profile = std::move(r.profile);
  } else {
    profile = synth_load(cfg.load.synthetic, cfg.load_seed());
  }
  if (std::abs(profile.dt_s - cfg.plant.dt_s) > 1e-9)
    throw ConfigError("plant.dt_s", "load sample spacing " + format_double(profile.dt_s) +
                                        " s differs from plant.dt_s");

  const std::int64_t start = *parse_iso8601(profile.start_time);
  const std::int64_t first_day = start / 86400 + (start % 86400 != 0 ? 1 : 0);
  const std::size_t per_day = profile.samples_per_day();
  const auto offset0 = static_cast<std::size_t>(
      std::llround(static_cast<double>(first_day * 86400 - start) / profile.dt_s));
  const std::size_t available_days = profile.size() > offset0 ? (profile.size() - offset0) / per_day : 0;

  std::size_t d0 = 0;
  std::size_t d1 = available_days;
  if (cfg.horizon.start_date) {
    const auto s = *parse_iso8601(*cfg.horizon.start_date + "T00:00:00Z") / 86400 - first_day;
    if (s < 0 || static_cast<std::size_t>(s) >= available_days)
      throw ConfigError("horizon.start_date", "lies outside the load data");
    d0 = static_cast<std::size_t>(s);
  }
  if (cfg.horizon.end_date) {
    const auto e = *parse_iso8601(*cfg.horizon.end_date + "T00:00:00Z") / 86400 - first_day;
    if (e < 0 || static_cast<std::size_t>(e) >= available_days)
      throw ConfigError("horizon.end_date", "lies outside the load data");
    d1 = static_cast<std::size_t>(e) + 1;
  }
  if (d1 <= d0) throw ConfigError("horizon", "covers no complete day of load data");
  LoadProfile out = profile.slice(offset0 + d0 * per_day, (d1 - d0) * per_day);
  out.start_time = format_iso8601((first_day + static_cast<std::int64_t>(d0)) * 86400);
  return out;
}

std::uint64_t config_hash(const nlohmann::json& doc) { return fnv1a(doc.dump()); }

} // namespace bess
