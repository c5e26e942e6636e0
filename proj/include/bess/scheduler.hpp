#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "bess/battery_plant.hpp"

namespace bess {

/// Uniformly sampled grid load (W).
struct LoadProfile {
  std::string start_time = "2024-01-01T00:00:00Z"; // ISO-8601, UTC
  double dt_s = 60.0;
  std::vector<double> values_w;

  std::size_t size() const { return values_w.size(); }
  std::size_t samples_per_day() const;
  std::size_t day_count() const;
  /// Copy of samples [first, first + count).
  LoadProfile slice(std::size_t first, std::size_t count) const;
  LoadProfile day(std::size_t d) const;
  void validate() const;
};

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0; // exclusive

  std::size_t size() const { return end - begin; }
  bool empty() const { return end <= begin; }
  bool operator==(const IndexRange&) const = default;
};

enum class IntervalKind { charge, discharge };

/// A maximal run of charge- or discharge-eligible samples, plus any dead band
/// that follows it. Each interval carries its own reference.
struct ShavingInterval {
  IntervalKind kind = IntervalKind::charge;
  IndexRange range;
  double ref_w = 0.0;
};

/// Two adjacent intervals. Cycle i pairs interval i-1 with interval i, so
/// consecutive cycles share an interval.
struct ShavingCycle {
  int index = 1;
  IndexRange charge_interval;
  IndexRange discharge_interval;
  double p_chr_ref_w = 0.0;
  double p_dis_ref_w = 0.0;
  bool charge_first = true;
  bool feasible = true;
  int iterations = 0;
};

enum class PlanMethod { original, improved };

struct ShavingPlan {
  PlanMethod method = PlanMethod::improved;
  std::vector<ShavingInterval> intervals;
  std::vector<ShavingCycle> cycles;
  double power_depth_w = 0.0;
  double rated_power_w = 0.0;
  double rated_energy_wh = 0.0;
  double initial_energy_wh = 0.0;
  double initial_chr_ref_w = 0.0;
  double initial_dis_ref_w = 0.0;
  double dt_s = 60.0;

  bool all_feasible() const;
};

class EmptyPlanError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Splits a profile into alternating charge/discharge intervals.
std::vector<ShavingInterval> segment_intervals(const LoadProfile& profile, double p_chr_ref,
                                               double p_dis_ref);

/// Pairs every interval with its successor. A profile with a single interval
/// produces no cycles.
std::vector<ShavingCycle> segment_cycles(const LoadProfile& profile, double p_chr_ref,
                                         double p_dis_ref);

double charge_demand(double load_w, double p_chr_ref, double p_r);
double discharge_demand(double load_w, double p_dis_ref, double p_r);

/// BESS power demand at one sample, gated by the SoC band. Positive charges.
double demand_power(double load_w, IntervalKind kind, double ref_w, double soc, double p_r,
                    const SocBand& band = {});
double demand_power(double load_w, const ShavingCycle& cycle, bool in_charge_interval, double soc,
                    double p_r, const SocBand& band = {});

/// Running energy of a cycle (Wh), sample by sample, from a starting level.
struct EnergyTrace {
  std::vector<double> energy_wh; // level after each sample
  double max_wh = 0.0;
  double min_wh = 0.0;
  double soc_max = 0.0; // band SoC at max_wh
  double soc_min = 0.0;
};

EnergyTrace cycle_energy(std::span<const double> load_w, double dt_s,
                         std::span<const ShavingInterval> intervals, double p_r,
                         double start_energy_wh, double rated_energy_wh, const SocBand& band = {});
EnergyTrace cycle_energy(const LoadProfile& profile, const ShavingCycle& cycle, double p_r,
                         double start_energy_wh, double rated_energy_wh, const SocBand& band = {});

struct PlanSettings {
  double power_depth_w = 5e6;
  double rated_power_w = 5e6;
  double rated_energy_wh = 10e6;
  double initial_energy_wh = 0.0;
  std::optional<double> p_chr_ref_w; // default: day minimum + depth
  std::optional<double> p_dis_ref_w; // default: day maximum - depth
  double tolerance_fraction = 1e-3;  // of rated energy
  int max_iterations = 100;
};

/// Initial references for a day: min + depth and max - depth.
std::pair<double, double> initial_references(const LoadProfile& day, const PlanSettings& s);

ShavingPlan correct_references_improved(const LoadProfile& day, const PlanSettings& s);
ShavingPlan correct_references_original(const LoadProfile& day, const PlanSettings& s);
ShavingPlan make_plan(const LoadProfile& day, const PlanSettings& s, PlanMethod method);

/// Demand series (W) implied by a plan, ignoring SoC gating.
std::vector<double> plan_demand(const LoadProfile& day, const ShavingPlan& plan);

/// Replays each cycle from the plan's initial energy and refreshes its
/// feasibility flag.
void refresh_feasibility(const LoadProfile& day, ShavingPlan& plan, const SocBand& band = {});

struct ShavingMetrics {
  double e_chr_wh = 0.0;
  double e_dis_wh = 0.0;
  double e_val_wh = 0.0;
  double e_pek_wh = 0.0;
  std::optional<double> cr;
  std::optional<double> rr;
  double cur = 0.0;
  std::optional<double> power_utilization;
  double equivalent_cycles = 0.0;
};

/// Per-step record of what the BESS was asked for and what it executed.
struct DispatchSample {
  double demand_w = 0.0;
  double actual_w = 0.0;
};

ShavingMetrics compute_metrics(std::span<const DispatchSample> dispatch, const ShavingPlan& plan,
                               const LoadProfile& day, double rated_energy_wh);

std::string to_string(PlanMethod m);
PlanMethod plan_method_from_string(const std::string& s);

void to_json(nlohmann::json& j, const ShavingPlan& plan);
void to_json(nlohmann::json& j, const ShavingMetrics& m);

} // namespace bess
