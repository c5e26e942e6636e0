#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "bess/battery_plant.hpp"
#include "bess/scheduler.hpp"
#include "bess/simulation.hpp"

namespace bess {

struct BoxStats {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
};

/// Linear interpolation between order statistics at rank (n - 1) * p.
double quantile_sorted(std::span<const double> sorted, double p);
BoxStats box_stats(std::span<const double> series);

inline constexpr std::array<const char*, 5> kComponentNames = {
    "transformer", "acdc", "dcdc", "battery_ohmic", "battery_polarization"};

/// Fractions of total loss per component, in kComponentNames order.
std::array<double, 5> component_shares(const LossBreakdown& l);

struct DepthSweepReport {
  double depth_w = 0.0;
  std::size_t cluster_count = 0;
  BoxStats p_clu_stats;
  BoxStats dp_dt_stats;
  BoxStats p_loss_stats;
  BoxStats p_ss_stats;
  BoxStats p_ts_stats;
  double e_ss_wh = 0.0;
  double e_ts_wh = 0.0;
  double e_loss_wh = 0.0;
  double ts_reduction_fraction = 0.0;
  std::array<double, 5> component_shares{};
  std::size_t operating_samples = 0;
};

struct DepthSweepOptions {
  ScheduleSettings schedule; // power_depth_w is overridden per depth
  double initial_soc = 0.5;
  unsigned threads = 1;
};

/// Statistics of one completed run, taken from its step records.
DepthSweepReport summarize_depth(const SimulationResult& sim, const Plant& plant, double depth_w);

std::vector<DepthSweepReport> depth_sweep(const LoadProfile& load_year,
                                          const std::vector<double>& depths_w,
                                          const ClusterParams& base,
                                          const DepthSweepOptions& opts = {});

enum class FlowDirection { charge, discharge };

struct EfficiencyPoint {
  double power_w = 0.0;
  double efficiency = 0.0;
};

struct MedianBin {
  double lo_w = 0.0;
  double hi_w = 0.0;
  std::size_t count = 0;
  double median = 0.0;
};

struct EfficiencyScatter {
  FlowDirection direction = FlowDirection::charge;
  std::vector<EfficiencyPoint> points;
  std::vector<MedianBin> median_curve; // only bins holding points
};

std::vector<MedianBin> median_curve(std::span<const EfficiencyPoint> points, double bin_width_w);

/// Step efficiency: stored/drawn when charging, delivered/released when
/// discharging.
std::optional<double> step_efficiency(double grid_wh, double stored_wh);

std::array<EfficiencyScatter, 2> efficiency_scatter(std::span<const StepRecord> steps,
                                                    double bin_width_w = 1e5);

struct LedgerRow {
  std::string component;
  double loss_wh = 0.0;
  double share = 0.0;
  double throughput_wh = 0.0;
  double efficiency = 1.0;
  std::optional<double> delta_loss_wh;
  std::optional<double> delta_efficiency;
};

struct LedgerReport {
  std::vector<LedgerRow> rows; // transformer, acdc, dcdc, battery, then the battery split, then total
  double duration_s = 0.0;
};

class HorizonMismatch : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Loss table for a run; when a baseline is given, deltas are run - baseline.
LedgerReport component_ledger_report(const LossBreakdown& run,
                                     const std::optional<LossBreakdown>& baseline = std::nullopt);

const LedgerRow& ledger_row(const LedgerReport& r, const std::string& component);

void to_json(nlohmann::json& j, const BoxStats& b);
void to_json(nlohmann::json& j, const DepthSweepReport& r);
void to_json(nlohmann::json& j, const LedgerReport& r);

} // namespace bess
