#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "bess/allocator.hpp"
#include "bess/analysis.hpp"
#include "bess/battery_plant.hpp"
#include "bess/config.hpp"
#include "bess/load_profile.hpp"
#include "bess/loss_models.hpp"
#include "bess/reports.hpp"
#include "bess/scheduler.hpp"
#include "bess/simulation.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

bess::Plant plant_from_socs(const std::vector<double>& socs) {
  auto cfg = bess::PlantConfig::uniform(socs.size());
  cfg.initial_soc_per_cluster = socs;
  return bess::Plant(cfg);
}

bess::LoadProfile profile(const std::vector<double>& values, double dt_s) {
  bess::LoadProfile p;
  p.dt_s = dt_s;
  p.values_w = values;
  p.validate();
  return p;
}

std::string simulate_json(const std::string& config_text) {
  const auto cfg = bess::parse_config(json::parse(config_text));
  bess::validate_config(cfg);
  const auto load = bess::resolve_load(cfg);
  bess::Plant plant(cfg.plant);
  bess::SimulationOptions o;
  o.schedule = cfg.schedule;
  o.allocator = cfg.allocator;
  o.forecast_noise = cfg.forecast_noise;
  o.forecast_seed = cfg.seed + 7919;
  const auto sim = bess::simulate(load, plant, o);
  const std::vector<bess::NamedRun> runs = {{bess::to_string(cfg.schedule.method), &sim}};
  json out = {{"metrics", bess::metrics_json(runs, load.start_time)},
              {"ledger", bess::component_ledger_report(sim.total)},
              {"max_balance_error", sim.max_balance_error},
              {"days", sim.days.size()}};
  return out.dump();
}

std::string plan_day_json(const std::vector<double>& values, double dt_s, double depth_w,
                          double rated_power_w, double rated_energy_wh, const std::string& method) {
  bess::PlanSettings s;
  s.power_depth_w = depth_w;
  s.rated_power_w = rated_power_w;
  s.rated_energy_wh = rated_energy_wh;
  const auto day = profile(values, dt_s);
  const auto plan = bess::make_plan(day, s, bess::plan_method_from_string(method));
  json j = plan;
  j["demand_w"] = bess::plan_demand(day, plan);
  return j.dump();
}

} // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Peak shaving battery plant core";
  m.attr("__version__") = BESS_VERSION;

  py::register_exception<bess::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<bess::EmptyPlanError>(m, "EmptyPlanError", PyExc_RuntimeError);
  py::register_exception<bess::NoCapacityError>(m, "NoCapacityError", PyExc_RuntimeError);
  py::register_exception<bess::IngestError>(m, "IngestError", PyExc_ValueError);

  m.def("transformer_loss", [](double x) { return bess::transformer_loss(x, {}); }, py::arg("load_factor"));
  m.def("pcs_efficiency", [](double x) { return bess::pcs_efficiency(x, {}); }, py::arg("load_factor"));
  m.def("open_circuit_voltage", [](double soc) { return bess::open_circuit_voltage(soc, {}); }, py::arg("soc"));

  m.def(
      "step_cluster",
      [](double soc, double i_pol, double p_ac_w, double dt_s) {
        const bess::ClusterParams p;
        const auto r = bess::step_cluster({soc, {i_pol, 0.0}}, p_ac_w, dt_s, p, bess::SocBand{});
        json j = {{"soc", r.state.soc},
                  {"i_pol", r.state.rc.i_pol},
                  {"current_a", r.current_a},
                  {"ac_power_w", r.ac_power_w},
                  {"truncated", r.truncated},
                  {"ledger", r.ledger}};
        return j.dump();
      },
      py::arg("soc"), py::arg("i_pol"), py::arg("p_ac_w"), py::arg("dt_s") = 60.0);

  m.def(
      "synth_load",
      [](const std::string& spec_text, std::uint64_t seed) {
        const auto spec = json::parse(spec_text).get<bess::SyntheticLoadSpec>();
        spec.validate();
        const auto p = bess::synth_load(spec, seed);
        return py::make_tuple(p.start_time, p.dt_s, p.values_w);
      },
      py::arg("spec_json"), py::arg("seed"));

  m.def("plan_day", &plan_day_json, py::arg("values_w"), py::arg("dt_s"), py::arg("depth_w"),
        py::arg("rated_power_w"), py::arg("rated_energy_wh"), py::arg("method") = "improved");

  m.def(
      "balanced_allocation",
      [](const std::vector<double>& socs, double p_sys_w) {
        return bess::balanced_allocation(plant_from_socs(socs), p_sys_w).k;
      },
      py::arg("socs"), py::arg("p_sys_w"));

  m.def(
      "pso_allocate",
      [](const std::vector<double>& socs, double p_sys_w, std::uint64_t seed, double dt_s) {
        bess::PsoParams params;
        params.rng_seed = seed;
        const auto plant = plant_from_socs(socs);
        const auto r = bess::pso_allocate(p_sys_w, plant, params, dt_s);
        return py::make_tuple(r.best.k, r.best_fitness, r.balanced_fitness);
      },
      py::arg("socs"), py::arg("p_sys_w"), py::arg("seed") = 1, py::arg("dt_s") = 60.0);

  m.def(
      "box_stats",
      [](const std::vector<double>& v) {
        json j = bess::box_stats(v);
        return j.dump();
      },
      py::arg("values"));

  m.def("simulate", &simulate_json, py::arg("config_json"));
}
