#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "bess/allocation_vector.hpp"
#include "bess/loss_models.hpp"

namespace bess {

struct SocBand {
  double soc_min = 0.03;
  double soc_max = 0.97;
};

/// One battery cluster: n_series x n_parallel cells behind a DC/DC and an
/// AC/DC converter. The DC bus voltage is informational only.
struct ClusterParams {
  CellParams cell;
  int n_series = 200;
  int n_parallel = 24;
  double rated_power_w = 50000.0;
  double rated_energy_wh = 200000.0;
  double dc_bus_voltage_v = 700.0;
  PcsEfficiencyCoeffs dcdc_coeffs;
  PcsEfficiencyCoeffs acdc_coeffs;

  double r_ohm_agg() const { return cell.r_ohm * n_series / n_parallel; }
  double r_pol_agg() const { return cell.r_pol * n_series / n_parallel; }
  double c_pol_agg() const { return cell.c_pol * n_parallel / n_series; }
  double capacity_ah_agg() const { return cell.capacity_ah * n_parallel; }
  double time_constant_s() const { return cell.time_constant_s(); }
  double ocv_agg(double soc) const { return n_series * open_circuit_voltage(soc, cell.ocv); }

  /// Electrochemical energy between two SoC levels (Wh).
  double usable_energy_wh(double soc_lo, double soc_hi) const;

  /// The whole cluster seen as a single equivalent cell.
  CellParams aggregate_cell() const;

  void validate() const;
  bool operator==(const ClusterParams&) const = default;
};

struct ClusterState {
  double soc = 0.5;
  RcState rc; // aggregate polarization current

  bool operator==(const ClusterState&) const = default;
};

/// Energy ledger of one or more steps. Signed convention: grid_wh and
/// stored_wh are positive when charging, and
///   grid_wh == stored_wh + total_loss_wh()
/// holds in both directions.
struct LossBreakdown {
  double transformer_wh = 0.0;
  double acdc_wh = 0.0;
  double dcdc_wh = 0.0;
  double battery_ohmic_wh = 0.0;
  double battery_polarization_wh = 0.0;
  double stored_wh = 0.0;
  double grid_wh = 0.0;

  // Energy entering each component in the direction of flow.
  double transformer_in_wh = 0.0;
  double acdc_in_wh = 0.0;
  double dcdc_in_wh = 0.0;
  double battery_in_wh = 0.0;

  // Battery loss split into the current-determined part and the remainder.
  double battery_steady_wh = 0.0;
  double battery_transient_wh = 0.0;

  double duration_s = 0.0;

  double battery_loss_wh() const { return battery_ohmic_wh + battery_polarization_wh; }
  double total_loss_wh() const {
    return transformer_wh + acdc_wh + dcdc_wh + battery_ohmic_wh + battery_polarization_wh;
  }
  double balance_residual_wh() const { return grid_wh - stored_wh - total_loss_wh(); }
  /// Residual relative to the magnitude of the flows involved.
  double relative_balance_error() const;

  LossBreakdown& operator+=(const LossBreakdown& o);
};

class InfeasiblePower : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class InfeasibleAllocation : public std::runtime_error {
public:
  InfeasibleAllocation(std::size_t cluster, const std::string& what)
      : std::runtime_error(what), cluster_(cluster) {}
  std::size_t cluster() const { return cluster_; }

private:
  std::size_t cluster_;
};

/// Terminal current for a given battery-side DC power (signed), holding the
/// OCV and polarization voltage at their start-of-step values.
double cluster_current_from_power(const ClusterState& state, double dc_power_w,
                                  const ClusterParams& p);

/// Battery-side DC power produced by an AC-side command through both
/// converter stages.
double dc_power_from_ac(double ac_power_w, const ClusterParams& p);

struct ClusterStepResult {
  ClusterState state;
  LossBreakdown ledger;
  double ac_power_w = 0.0;       // executed AC-side power (after truncation)
  double current_a = 0.0;        // terminal current held over the step
  double terminal_power_w = 0.0; // mean battery port power over the step
  bool truncated = false;
};

ClusterStepResult step_cluster(const ClusterState& state, double ac_side_power_w, double dt,
                               const ClusterParams& p, const SocBand& band);

struct PlantConfig {
  std::vector<ClusterParams> clusters;
  TransformerParams transformer;
  double dt_s = 60.0;
  double soc_min = 0.03;
  double soc_max = 0.97;
  double initial_soc = 0.5;
  std::vector<double> initial_soc_per_cluster; // optional override

  SocBand band() const { return {soc_min, soc_max}; }
  void validate() const;

  /// m identical clusters and a transformer sized at 1.26 x total rating.
  static PlantConfig uniform(std::size_t m, const ClusterParams& cluster = {},
                             double initial_soc = 0.5);
};

struct PlantStepResult {
  LossBreakdown ledger;
  double p_command_w = 0.0;
  double p_actual_w = 0.0; // executed AC-side power summed over clusters
  std::size_t truncated_clusters = 0;
};

class Plant {
public:
  explicit Plant(PlantConfig cfg);

  const PlantConfig& config() const { return cfg_; }
  std::size_t size() const { return states_.size(); }
  std::span<const ClusterState> states() const { return states_; }
  const LossBreakdown& cumulative() const { return cumulative_; }
  double elapsed_s() const { return elapsed_s_; }

  double rated_power_w() const;
  double rated_energy_wh() const;
  double usable_energy_wh() const;
  double mean_soc() const;

  /// Clusters that cannot move in the direction of p_sys.
  std::vector<bool> blocked_mask(double p_sys_w) const;
  bool is_blocked(std::size_t j, double p_sys_w) const;

  /// Advances every cluster by dt. Cluster j is commanded k_j * p_sys.
  PlantStepResult step(double p_sys_w, const AllocationVector& alloc, double dt,
                       std::vector<ClusterStepResult>* detail = nullptr);

  /// Same as step() without touching the plant.
  PlantStepResult evaluate(double p_sys_w, const AllocationVector& alloc, double dt,
                           std::vector<ClusterStepResult>* detail = nullptr) const;

  void set_states(std::vector<ClusterState> states);

  nlohmann::json snapshot() const;
  void restore(const nlohmann::json& snap);

private:
  PlantStepResult compute(double p_sys_w, const AllocationVector& alloc, double dt,
                          std::vector<ClusterStepResult>& out) const;
  void check_allocation(double p_sys_w, const AllocationVector& alloc) const;

  PlantConfig cfg_;
  std::vector<ClusterState> states_;
  LossBreakdown cumulative_;
  double elapsed_s_ = 0.0;
  bool uniform_params_ = false;
  mutable std::vector<ClusterStepResult> scratch_;
};

/// build_plant
inline Plant build_plant(PlantConfig cfg) { return Plant(std::move(cfg)); }

void to_json(nlohmann::json& j, const LossBreakdown& l);
void from_json(const nlohmann::json& j, LossBreakdown& l);

} // namespace bess
