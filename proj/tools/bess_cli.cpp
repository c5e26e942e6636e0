#include <cstdlib>
#include <future>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "bess/analysis.hpp"
#include "bess/config.hpp"
#include "bess/format.hpp"
#include "bess/load_profile.hpp"
#include "bess/reports.hpp"
#include "bess/simulation.hpp"

namespace {

using bess::RunConfig;
using nlohmann::json;

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  std::string format;
  std::string out;
};

int fail(const std::string& code, const std::string& message, const json& field, int exit_code) {
  json e = {{"error", {{"code", code}, {"message", message}, {"field", field}}}};
  std::cerr << e.dump() << std::endl;
  return exit_code;
}

std::filesystem::path output_dir(const Common& c, const RunConfig& cfg) {
  if (!c.out.empty()) return c.out;
  if (cfg.output.directory) return *cfg.output.directory;
  if (const char* env = std::getenv("BESS_OUTPUT_DIR"); env && *env) return env;
  return "bess_out";
}

std::vector<std::string> formats(const Common& c, const RunConfig& cfg) {
  if (!c.format.empty()) return {c.format};
  return cfg.output.formats;
}

bool wants(const std::vector<std::string>& f, const char* name) {
  return std::find(f.begin(), f.end(), name) != f.end();
}

bess::Plant make_plant(const RunConfig& cfg, double soc_spread = 0.0) {
  bess::PlantConfig pc = cfg.plant;
  if (soc_spread > 0.0 && pc.initial_soc_per_cluster.empty() && pc.clusters.size() > 1) {
    const double m = static_cast<double>(pc.clusters.size() - 1);
    for (std::size_t j = 0; j < pc.clusters.size(); ++j) {
      const double s = pc.initial_soc + soc_spread * (2.0 * static_cast<double>(j) / m - 1.0);
      pc.initial_soc_per_cluster.push_back(std::clamp(s, pc.soc_min, pc.soc_max));
    }
  }
  return bess::Plant(pc);
}

bess::SimulationOptions sim_options(const RunConfig& cfg) {
  bess::SimulationOptions o;
  o.schedule = cfg.schedule;
  o.allocator = cfg.allocator;
  o.forecast_noise = cfg.forecast_noise;
  o.forecast_seed = cfg.seed + 7919;
  return o;
}

json manifest_base(const std::string& sub, const RunConfig& cfg, const Common& c,
                   const std::vector<std::string>& warnings) {
  return {{"subcommand", sub},
          {"config_hash", bess::hex64(bess::config_hash(cfg.source))},
          {"seed", cfg.seed},
          {"load_seed", cfg.load_seed()},
          {"threads", c.threads},
          {"warnings", warnings}};
}

void report_written(const bess::OutputSet& out) {
  json j = {{"ok", true}, {"directory", out.directory().string()}, {"files", json::array()}};
  for (const auto& [name, content] : out.files()) j["files"].push_back(name);
  std::cout << j.dump() << std::endl;
}

int cmd_validate(const Common& c) {
  const RunConfig cfg = bess::load_config(c.config_path, c.seed);
  std::vector<std::string> warnings;
  const auto load = bess::resolve_load(cfg, &warnings);
  json j = {{"ok", true},
            {"config_hash", bess::hex64(bess::config_hash(cfg.source))},
            {"clusters", cfg.plant.clusters.size()},
            {"days", load.day_count()},
            {"warnings", warnings}};
  std::cout << j.dump() << std::endl;
  return 0;
}

int cmd_gen_load(const Common& c) {
  const RunConfig cfg = bess::load_config(c.config_path, c.seed);
  const auto profile = bess::synth_load(cfg.load.synthetic, cfg.load_seed());
  std::ostringstream csv;
  bess::write_profile_csv(csv, profile);
  bess::OutputSet out(output_dir(c, cfg));
  out.add("load.csv", csv.str());
  out.commit(manifest_base("gen-load", cfg, c, {}));
  report_written(out);
  return 0;
}

int cmd_simulate(const Common& c, const std::optional<std::string>& method, bool detail) {
  RunConfig cfg = bess::load_config(c.config_path, c.seed);
  if (method) cfg.schedule.method = bess::plan_method_from_string(*method);
  std::vector<std::string> warnings;
  const auto load = bess::resolve_load(cfg, &warnings);
  auto plant = make_plant(cfg);
  auto opts = sim_options(cfg);
  opts.record_steps = true;
  const auto sim = bess::simulate(load, plant, opts);
  const auto fmt = formats(c, cfg);
  const std::string name = bess::to_string(cfg.schedule.method);
  const std::vector<bess::NamedRun> runs = {{name, &sim}};
  const auto scatter = bess::efficiency_scatter(sim.steps, cfg.sweep.bin_width_w);
  const auto ledger = bess::component_ledger_report(sim.total);

  bess::OutputSet out(output_dir(c, cfg));
  if (wants(fmt, "csv")) {
    out.add("metrics.csv", bess::metrics_csv(runs, load.start_time));
    out.add("plans.csv", bess::plans_csv(runs, load.start_time));
    out.add("ledger.csv", bess::ledger_csv(ledger));
    out.add("efficiency_median.csv", bess::median_csv(scatter));
    if (detail) {
      out.add("steps.csv", bess::steps_csv(sim, load.start_time));
      out.add("efficiency_scatter.csv", bess::scatter_csv(scatter));
    }
  }
  if (wants(fmt, "json")) {
    json j = {{"metrics", bess::metrics_json(runs, load.start_time)}, {"ledger", ledger}};
    out.add("simulate.json", j.dump(2) + "\n");
  }
  auto m = manifest_base("simulate", cfg, c, warnings);
  m["max_balance_error"] = sim.max_balance_error;
  out.commit(m);
  report_written(out);
  return 0;
}

int cmd_compare(const Common& c) {
  const RunConfig cfg = bess::load_config(c.config_path, c.seed);
  std::vector<std::string> warnings;
  const auto load = bess::resolve_load(cfg, &warnings);
  auto run = [&](bess::PlanMethod method) {
    auto plant = make_plant(cfg);
    auto opts = sim_options(cfg);
    opts.schedule.method = method;
    return bess::simulate(load, plant, opts);
  };
  bess::SimulationResult original, improved;
  if (c.threads > 1) {
    auto f = std::async(std::launch::async, run, bess::PlanMethod::original);
    improved = run(bess::PlanMethod::improved);
    original = f.get();
  } else {
    original = run(bess::PlanMethod::original);
    improved = run(bess::PlanMethod::improved);
  }
  const std::vector<bess::NamedRun> runs = {{"original", &original}, {"improved", &improved}};
  const auto fmt = formats(c, cfg);
  bess::OutputSet out(output_dir(c, cfg));
  if (wants(fmt, "csv")) {
    out.add("metrics.csv", bess::metrics_csv(runs, load.start_time));
    out.add("plans.csv", bess::plans_csv(runs, load.start_time));
  }
  if (wants(fmt, "json"))
    out.add("compare.json", bess::metrics_json(runs, load.start_time).dump(2) + "\n");
  out.commit(manifest_base("compare", cfg, c, warnings));
  report_written(out);
  return 0;
}

int cmd_optimize(const Common& c) {
  RunConfig cfg = bess::load_config(c.config_path, c.seed);
  std::vector<std::string> warnings;
  auto load = bess::resolve_load(cfg, &warnings);
  if (!cfg.horizon.start_date && !cfg.horizon.end_date) load = load.day(0);

  auto run = [&](bess::AllocationMode mode) {
    auto plant = make_plant(cfg, cfg.optimize.soc_spread);
    auto opts = sim_options(cfg);
    opts.allocator.mode = mode;
    opts.record_steps = true;
    opts.record_allocation = mode == bess::AllocationMode::pso;
    opts.record_pso_trace = mode == bess::AllocationMode::pso && cfg.optimize.record_trace;
    return bess::simulate(load, plant, opts);
  };
  bess::SimulationResult balanced, pso;
  if (c.threads > 1) {
    auto f = std::async(std::launch::async, run, bess::AllocationMode::balanced);
    pso = run(bess::AllocationMode::pso);
    balanced = f.get();
  } else {
    balanced = run(bess::AllocationMode::balanced);
    pso = run(bess::AllocationMode::pso);
  }
  const auto base_report = bess::component_ledger_report(balanced.total);
  const auto pso_report = bess::component_ledger_report(pso.total);
  const auto delta = bess::component_ledger_report(pso.total, balanced.total);

  const auto fmt = formats(c, cfg);
  bess::OutputSet out(output_dir(c, cfg));
  if (wants(fmt, "csv")) {
    out.add("ledger_balanced.csv", bess::ledger_csv(base_report));
    out.add("ledger_pso.csv", bess::ledger_csv(pso_report));
    out.add("ledger_delta.csv", bess::ledger_csv(delta));
    out.add("allocation_heatmap.csv", bess::allocation_csv(pso, load.start_time));
    if (cfg.optimize.record_trace) out.add("pso_trace.csv", bess::pso_trace_csv(pso));
  }
  if (wants(fmt, "json")) {
    json j = {{"balanced", base_report}, {"pso", pso_report}, {"delta", delta},
              {"pso_runs", pso.pso_runs}};
    out.add("optimize.json", j.dump(2) + "\n");
  }
  auto m = manifest_base("optimize", cfg, c, warnings);
  m["max_balance_error"] = std::max(balanced.max_balance_error, pso.max_balance_error);
  out.commit(m);
  report_written(out);
  return 0;
}

int cmd_sweep(const Common& c) {
  const RunConfig cfg = bess::load_config(c.config_path, c.seed);
  std::vector<std::string> warnings;
  const auto load = bess::resolve_load(cfg, &warnings);
  bess::DepthSweepOptions so;
  so.schedule = cfg.schedule;
  so.initial_soc = cfg.plant.initial_soc;
  so.threads = c.threads;
  const auto reports = bess::depth_sweep(load, cfg.sweep.depths_w, cfg.plant.clusters.front(), so);
  const auto fmt = formats(c, cfg);
  bess::OutputSet out(output_dir(c, cfg));
  if (wants(fmt, "csv")) out.add("sweep.csv", bess::sweep_csv(reports));
  if (wants(fmt, "json")) out.add("sweep.json", json(reports).dump(2) + "\n");
  out.commit(manifest_base("sweep", cfg, c, warnings));
  report_written(out);
  return 0;
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("-c,--config", c.config_path, "Run configuration (JSON)")->required();
  sub->add_option("--seed", c.seed, "Override the configured seed");
  sub->add_option("--threads", c.threads, "Worker threads")->check(CLI::Range(1u, 1024u));
  sub->add_option("--format", c.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  sub->add_option("--out", c.out, "Output directory");
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Battery storage peak-shaving simulator"};
  app.set_version_flag("--version", std::string(BESS_VERSION));
  app.require_subcommand(1);

  Common c;
  std::optional<std::string> method;
  bool detail = false;
  auto* simulate = app.add_subcommand("simulate", "Run one horizon with one scheduling method");
  add_common(simulate, c);
  simulate->add_option("--method", method, "original or improved")
      ->check(CLI::IsMember({"original", "improved"}));
  simulate->add_flag("--detail", detail, "Also write per-step records and the efficiency scatter");
  auto* compare = app.add_subcommand("compare", "Original vs improved reference correction");
  add_common(compare, c);
  auto* optimize = app.add_subcommand("optimize", "Balanced vs PSO power allocation");
  add_common(optimize, c);
  auto* sweep = app.add_subcommand("sweep", "Power-depth sweep statistics");
  add_common(sweep, c);
  auto* gen = app.add_subcommand("gen-load", "Write the configured synthetic load as CSV");
  add_common(gen, c);
  auto* validate = app.add_subcommand("validate-config", "Check a configuration and exit");
  add_common(validate, c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), nullptr, kExitConfig);
  }

  try {
    if (*simulate) return cmd_simulate(c, method, detail);
    if (*compare) return cmd_compare(c);
    if (*optimize) return cmd_optimize(c);
    if (*sweep) return cmd_sweep(c);
    if (*gen) return cmd_gen_load(c);
    if (*validate) return cmd_validate(c);
  } catch (const bess::ConfigError& e) {
    return fail("config_invalid", e.what(), e.field(), kExitConfig);
  } catch (const bess::IngestError& e) {
    return fail("load_ingest", e.what(), "load.path", kExitRuntime);
  } catch (const std::exception& e) {
    return fail("runtime", e.what(), nullptr, kExitRuntime);
  }
  return kExitRuntime;
}
