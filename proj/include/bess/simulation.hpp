#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bess/allocator.hpp"
#include "bess/battery_plant.hpp"
#include "bess/scheduler.hpp"

namespace bess {

enum class AllocationMode { balanced, pso };

std::string to_string(AllocationMode m);
AllocationMode allocation_mode_from_string(const std::string& s);

struct AllocatorSettings {
  AllocationMode mode = AllocationMode::balanced;
  PsoParams pso;
  double cadence_s = 900.0; // re-optimize at least this often
};

struct ScheduleSettings {
  PlanMethod method = PlanMethod::improved;
  std::optional<double> power_depth_w; // default: plant rated power
  std::optional<double> p_chr_ref_w;
  std::optional<double> p_dis_ref_w;
  double tolerance_fraction = 1e-3;
  int max_iterations = 100;
};

struct SimulationOptions {
  ScheduleSettings schedule;
  AllocatorSettings allocator;
  bool record_steps = false;
  bool record_allocation = false;
  bool record_pso_trace = false;
  std::size_t trace_cluster = 0;
  double forecast_noise = 0.0; // relative sigma of the planning forecast error
  std::uint64_t forecast_seed = 0;
};

struct StepRecord {
  double load_w = 0.0;
  double demand_w = 0.0;
  double actual_w = 0.0;
  double grid_wh = 0.0;
  double stored_wh = 0.0;
  double loss_wh = 0.0;
  double balance_error = 0.0;
  // Traced cluster, mean powers over the step.
  double cluster_power_w = 0.0; // AC side
  double cluster_loss_w = 0.0;  // battery loss
  double cluster_ss_w = 0.0;
  double cluster_ts_w = 0.0;
};

struct DayResult {
  std::size_t day = 0;
  ShavingPlan plan;
  ShavingMetrics metrics;
  LossBreakdown ledger;
  std::size_t truncated_steps = 0;
  std::string plan_error; // set when no plan could be built and the day idled
};

struct PsoRunRecord {
  std::size_t step = 0;
  double p_sys_w = 0.0;
  double balanced_fitness = 0.0;
  std::vector<double> best_fitness; // global best per iteration
  std::vector<std::vector<double>> best_k;
};

struct SimulationResult {
  double dt_s = 60.0;
  std::vector<DayResult> days;
  std::vector<StepRecord> steps;
  std::vector<std::vector<double>> allocation; // per step, when recorded
  LossBreakdown total;
  double max_balance_error = 0.0;
  std::size_t pso_runs = 0;
  std::vector<PsoRunRecord> pso_log;
};

/// Horizon totals: energies and CR/RR summed over days, CUR and power
/// utilization averaged per day, equivalent cycles summed.
ShavingMetrics summarize_metrics(const SimulationResult& sim);

/// Energy stored above soc_min, summed over clusters (Wh).
double plant_energy_wh(const Plant& plant);

/// Plans each day of the profile and dispatches it through the plant.
SimulationResult simulate(const LoadProfile& load, Plant& plant, const SimulationOptions& opts);

} // namespace bess
