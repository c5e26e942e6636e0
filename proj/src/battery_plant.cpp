#include "bess/battery_plant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

namespace bess {

namespace {

constexpr double kSecondsPerHour = 3600.0;
constexpr double kSocEps = 1e-12;
constexpr int kTruncationBisections = 100;
constexpr int kCurrentIterations = 20;

// Two-point Gauss-Legendre nodes on [0, 1]; exact for the cubic OCV.
constexpr double kGl0 = 0.21132486540518711775;
constexpr double kGl1 = 0.78867513459481288225;

struct ConverterEfficiency {
  double acdc = 1.0;
  double dcdc = 1.0;
};

ConverterEfficiency converter_efficiency(double ac_power_w, const ClusterParams& p) {
  const double lf = std::min(std::abs(ac_power_w) / p.rated_power_w, 1.0);
  return {pcs_efficiency(lf, p.acdc_coeffs), pcs_efficiency(lf, p.dcdc_coeffs)};
}

double soc_delta(double current_a, double dt, const ClusterParams& p) {
  return current_a * dt / (kSecondsPerHour * p.capacity_ah_agg());
}

double mean_ocv(double soc0, double soc1, const ClusterParams& p) {
  auto at = [&](double x) { return p.ocv_agg(std::clamp(soc0 + x * (soc1 - soc0), 0.0, 1.0)); };
  return 0.5 * (at(kGl0) + at(kGl1));
}

// Battery port energy (J) over dt for a constant terminal current.
double terminal_energy(const ClusterState& s, double current, double dt, const ClusterParams& p) {
  const double soc1 = s.soc + soc_delta(current, dt, p);
  const auto rc = integrate_polarization(s.rc.i_pol, current, dt, p.time_constant_s());
  return mean_ocv(s.soc, soc1, p) * current * dt + p.r_ohm_agg() * current * current * dt +
         p.r_pol_agg() * current * rc.int_i_pol;
}

// Constant current whose mean port power over the step equals dc_power_w.
double step_current(const ClusterState& s, double dc_power_w, double dt, const ClusterParams& p) {
  const double i0 = cluster_current_from_power(s, dc_power_w, p);
  if (i0 == 0.0 || dt <= 0.0)
    return i0;
  const double target = dc_power_w * dt;
  double a = i0;
  double fa = terminal_energy(s, a, dt, p) - target;
  double b = i0 * target / (fa + target);
  for (int it = 0; it < kCurrentIterations && std::abs(fa) > 1e-13 * std::abs(target); ++it) {
    const double fb = terminal_energy(s, b, dt, p) - target;
    if (fb == fa) break;
    const double c = b - fb * (b - a) / (fb - fa);
    a = b;
    fa = fb;
    b = c;
  }
  return std::isfinite(a) && (a > 0.0) == (i0 > 0.0) ? a : i0;
}

} // namespace

double LossBreakdown::relative_balance_error() const {
  const double scale = std::abs(grid_wh) + std::abs(stored_wh) + total_loss_wh();
  if (scale == 0.0)
    return 0.0;
  return std::abs(balance_residual_wh()) / scale;
}

LossBreakdown& LossBreakdown::operator+=(const LossBreakdown& o) {
  transformer_wh += o.transformer_wh;
  acdc_wh += o.acdc_wh;
  dcdc_wh += o.dcdc_wh;
  battery_ohmic_wh += o.battery_ohmic_wh;
  battery_polarization_wh += o.battery_polarization_wh;
  stored_wh += o.stored_wh;
  grid_wh += o.grid_wh;
  transformer_in_wh += o.transformer_in_wh;
  acdc_in_wh += o.acdc_in_wh;
  dcdc_in_wh += o.dcdc_in_wh;
  battery_in_wh += o.battery_in_wh;
  battery_steady_wh += o.battery_steady_wh;
  battery_transient_wh += o.battery_transient_wh;
  duration_s += o.duration_s;
  return *this;
}

double ClusterParams::usable_energy_wh(double soc_lo, double soc_hi) const {
  return n_series * capacity_ah_agg() * (cell.ocv.integral(soc_hi) - cell.ocv.integral(soc_lo));
}

CellParams ClusterParams::aggregate_cell() const {
  const auto& b = cell.ocv.coefficients();
  const double ns = n_series;
  CellParams agg;
  agg.r_ohm = r_ohm_agg();
  agg.r_pol = r_pol_agg();
  agg.c_pol = c_pol_agg();
  agg.capacity_ah = capacity_ah_agg();
  agg.ocv = OcvCoeffs({b[0] * ns, b[1] * ns, b[2] * ns, b[3] * ns});
  return agg;
}

void ClusterParams::validate() const {
  cell.validate();
  if (n_series < 1) throw std::invalid_argument("cluster.n_series must be >= 1");
  if (n_parallel < 1) throw std::invalid_argument("cluster.n_parallel must be >= 1");
  if (!(rated_power_w > 0.0)) throw std::invalid_argument("cluster.rated_power_w must be > 0");
  if (!(rated_energy_wh > 0.0)) throw std::invalid_argument("cluster.rated_energy_wh must be > 0");
  if (!(dc_bus_voltage_v > 0.0)) throw std::invalid_argument("cluster.dc_bus_voltage_v must be > 0");
}

double dc_power_from_ac(double ac_power_w, const ClusterParams& p) {
  if (ac_power_w == 0.0)
    return 0.0;
  const auto eff = converter_efficiency(ac_power_w, p);
  const double chain = eff.acdc * eff.dcdc;
  return ac_power_w > 0.0 ? ac_power_w * chain : ac_power_w / chain;
}

double cluster_current_from_power(const ClusterState& state, double dc_power_w,
                                  const ClusterParams& p) {
  if (dc_power_w == 0.0)
    return 0.0;
  const double v = p.ocv_agg(state.soc) + p.r_pol_agg() * state.rc.i_pol;
  const double r = p.r_ohm_agg();
  const double disc = v * v + 4.0 * r * dc_power_w;
  if (disc < 0.0 || v <= 0.0)
    throw InfeasiblePower("demanded DC power " + std::to_string(dc_power_w) +
                          " W exceeds the deliverable maximum");
  // Rationalized form of the smaller-magnitude root.
  return 2.0 * dc_power_w / (v + std::sqrt(disc));
}

ClusterStepResult step_cluster(const ClusterState& state, double ac_side_power_w, double dt,
                               const ClusterParams& p, const SocBand& band) {
  if (std::abs(ac_side_power_w) > p.rated_power_w * (1.0 + 1e-9))
    throw std::domain_error("cluster power " + std::to_string(ac_side_power_w) +
                            " W exceeds rating");
  if (!(dt >= 0.0))
    throw std::domain_error("time step must be >= 0");

  ClusterStepResult out;
  double p_ac = ac_side_power_w;
  double current = 0.0;

  if (p_ac > 0.0 && state.soc >= band.soc_max - kSocEps) {
    p_ac = 0.0;
    out.truncated = true;
  } else if (p_ac < 0.0 && state.soc <= band.soc_min + kSocEps) {
    p_ac = 0.0;
    out.truncated = true;
  }

  if (p_ac != 0.0 && dt > 0.0) {
    current = step_current(state, dc_power_from_ac(p_ac, p), dt, p);
    const double soc_end = state.soc + soc_delta(current, dt, p);
    const double bound = p_ac > 0.0 ? band.soc_max : band.soc_min;
    if ((p_ac > 0.0 && soc_end > bound) || (p_ac < 0.0 && soc_end < bound)) {
      // Largest constant power that lands on the bound at the end of the step.
      out.truncated = true;
      const double limit = (bound - state.soc) * kSecondsPerHour * p.capacity_ah_agg() / dt;
      double lo = 0.0;
      double hi = std::abs(p_ac);
      const double sign = p_ac > 0.0 ? 1.0 : -1.0;
      for (int it = 0; it < kTruncationBisections; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double i_mid = step_current(state, dc_power_from_ac(sign * mid, p), dt, p);
        if (std::abs(i_mid) <= std::abs(limit))
          lo = mid;
        else
          hi = mid;
      }
      p_ac = sign * lo;
      current = step_current(state, dc_power_from_ac(p_ac, p), dt, p);
    }
  }

  const double tau = p.time_constant_s();
  const double r_pol = p.r_pol_agg();
  const double r_ohm = p.r_ohm_agg();
  const auto rc = integrate_polarization(state.rc.i_pol, current, dt, tau);

  const double soc0 = state.soc;
  const double soc1 = soc0 + soc_delta(current, dt, p);

  // Energies in joules.
  const double v_mean = mean_ocv(soc0, soc1, p);
  const double e_ocv = v_mean * current * dt;
  const double e_ohmic = r_ohm * current * current * dt;
  const double e_pol = r_pol * rc.int_i_pol_sq;
  const double e_cap = 0.5 * tau * r_pol * (rc.i_pol_end * rc.i_pol_end - state.rc.i_pol * state.rc.i_pol);
  const double e_term = e_ocv + e_ohmic + r_pol * current * rc.int_i_pol;
  const double e_steady = (r_ohm + r_pol) * current * current * dt;
  const double e_transient = r_pol * (rc.int_i_pol_sq - current * current * dt);

  auto& l = out.ledger;
  l.battery_ohmic_wh = e_ohmic / kSecondsPerHour;
  l.battery_polarization_wh = e_pol / kSecondsPerHour;
  l.stored_wh = (e_ocv + e_cap) / kSecondsPerHour;
  l.battery_steady_wh = e_steady / kSecondsPerHour;
  l.battery_transient_wh = e_transient / kSecondsPerHour;
  l.duration_s = dt;

  const double term_wh = e_term / kSecondsPerHour;
  if (current > 0.0) {
    const auto eff = converter_efficiency(p_ac, p);
    const double dcdc_in = term_wh / eff.dcdc;
    const double acdc_in = dcdc_in / eff.acdc;
    l.dcdc_wh = dcdc_in - term_wh;
    l.acdc_wh = acdc_in - dcdc_in;
    l.grid_wh = acdc_in;
    l.acdc_in_wh = acdc_in;
    l.dcdc_in_wh = dcdc_in;
    l.battery_in_wh = term_wh;
  } else if (current < 0.0) {
    const auto eff = converter_efficiency(p_ac, p);
    const double released = -term_wh;
    const double dcdc_out = released * eff.dcdc;
    const double acdc_out = dcdc_out * eff.acdc;
    l.dcdc_wh = released - dcdc_out;
    l.acdc_wh = dcdc_out - acdc_out;
    l.grid_wh = -acdc_out;
    l.dcdc_in_wh = released;
    l.acdc_in_wh = dcdc_out;
    l.battery_in_wh = -l.stored_wh;
  } else {
    // Relaxation only: the capacitor discharges into the polarization resistor.
    l.grid_wh = 0.0;
  }

  out.ac_power_w = dt > 0.0 ? l.grid_wh * kSecondsPerHour / dt : 0.0;
  out.current_a = current;
  out.terminal_power_w = dt > 0.0 ? e_term / dt : 0.0;
  out.state.soc = std::clamp(soc1, std::min(band.soc_min, soc0), std::max(band.soc_max, soc0));
  out.state.rc = {rc.i_pol_end, state.rc.t_elapsed + dt};
  return out;
}

void PlantConfig::validate() const {
  if (clusters.empty())
    throw std::invalid_argument("plant.clusters must contain at least one cluster");
  for (const auto& c : clusters)
    c.validate();
  transformer.validate();
  if (!(dt_s > 0.0)) throw std::invalid_argument("plant.dt_s must be > 0");
  if (!(soc_min >= 0.0 && soc_min < soc_max && soc_max <= 1.0))
    throw std::invalid_argument("plant.soc_min/soc_max must satisfy 0 <= soc_min < soc_max <= 1");
  auto check_soc = [&](double s) {
    if (!(s >= soc_min && s <= soc_max))
      throw std::invalid_argument("plant.initial_soc must lie within [soc_min, soc_max]");
  };
  check_soc(initial_soc);
  if (!initial_soc_per_cluster.empty()) {
    if (initial_soc_per_cluster.size() != clusters.size())
      throw std::invalid_argument("plant.initial_soc_per_cluster must have one entry per cluster");
    for (double s : initial_soc_per_cluster)
      check_soc(s);
  }
}

PlantConfig PlantConfig::uniform(std::size_t m, const ClusterParams& cluster, double initial_soc) {
  PlantConfig cfg;
  cfg.clusters.assign(m, cluster);
  cfg.transformer.rated_power_w = 1.26 * cluster.rated_power_w * static_cast<double>(m);
  cfg.initial_soc = initial_soc;
  return cfg;
}

Plant::Plant(PlantConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  states_.resize(cfg_.clusters.size());
  for (std::size_t j = 0; j < states_.size(); ++j)
    states_[j].soc =
        cfg_.initial_soc_per_cluster.empty() ? cfg_.initial_soc : cfg_.initial_soc_per_cluster[j];
  uniform_params_ = std::all_of(cfg_.clusters.begin(), cfg_.clusters.end(),
                                [&](const ClusterParams& c) { return c == cfg_.clusters.front(); });
}

double Plant::rated_power_w() const {
  double s = 0.0;
  for (const auto& c : cfg_.clusters) s += c.rated_power_w;
  return s;
}

double Plant::rated_energy_wh() const {
  double s = 0.0;
  for (const auto& c : cfg_.clusters) s += c.rated_energy_wh;
  return s;
}

double Plant::usable_energy_wh() const {
  double s = 0.0;
  for (const auto& c : cfg_.clusters) s += c.usable_energy_wh(cfg_.soc_min, cfg_.soc_max);
  return s;
}

double Plant::mean_soc() const {
  double s = 0.0;
  for (const auto& st : states_) s += st.soc;
  return s / static_cast<double>(states_.size());
}

bool Plant::is_blocked(std::size_t j, double p_sys_w) const {
  if (p_sys_w > 0.0) return states_[j].soc >= cfg_.soc_max - kSocEps;
  if (p_sys_w < 0.0) return states_[j].soc <= cfg_.soc_min + kSocEps;
  return false;
}

std::vector<bool> Plant::blocked_mask(double p_sys_w) const {
  std::vector<bool> mask(states_.size());
  for (std::size_t j = 0; j < states_.size(); ++j) mask[j] = is_blocked(j, p_sys_w);
  return mask;
}

void Plant::check_allocation(double p_sys_w, const AllocationVector& alloc) const {
  if (alloc.size() != states_.size())
    throw InfeasibleAllocation(alloc.size(), "allocation has " + std::to_string(alloc.size()) +
                                                 " entries for " + std::to_string(states_.size()) +
                                                 " clusters");
  if (p_sys_w == 0.0)
    return;
  double sum = 0.0;
  for (std::size_t j = 0; j < alloc.size(); ++j) {
    const double k = alloc[j];
    if (!(k >= 0.0 && k <= 1.0))
      throw InfeasibleAllocation(j, "allocation coefficient of cluster " + std::to_string(j) +
                                        " outside [0, 1]");
    if (k * std::abs(p_sys_w) > cfg_.clusters[j].rated_power_w * (1.0 + 1e-9))
      throw InfeasibleAllocation(j, "cluster " + std::to_string(j) + " would exceed its rated power");
    if (k > 0.0 && is_blocked(j, p_sys_w))
      throw InfeasibleAllocation(j, "cluster " + std::to_string(j) + " is at a blocking SoC bound");
    sum += k;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw InfeasibleAllocation(alloc.size(), "allocation coefficients must sum to 1");
}

PlantStepResult Plant::compute(double p_sys_w, const AllocationVector& alloc, double dt,
                               std::vector<ClusterStepResult>& out) const {
  check_allocation(p_sys_w, alloc);
  const std::size_t m = states_.size();
  out.resize(m);
  const SocBand band = cfg_.band();

  auto command = [&](std::size_t j) { return p_sys_w == 0.0 ? 0.0 : alloc[j] * p_sys_w; };

  bool replicate = uniform_params_;
  for (std::size_t j = 1; replicate && j < m; ++j)
    replicate = states_[j] == states_[0] && (p_sys_w == 0.0 || alloc[j] == alloc[0]);

  if (replicate) {
    out[0] = step_cluster(states_[0], command(0), dt, cfg_.clusters[0], band);
    std::fill(out.begin() + 1, out.end(), out[0]);
  } else {
    for (std::size_t j = 0; j < m; ++j)
      out[j] = step_cluster(states_[j], command(j), dt, cfg_.clusters[j], band);
  }

  PlantStepResult res;
  res.p_command_w = p_sys_w;
  for (const auto& r : out) {
    res.ledger += r.ledger;
    res.p_actual_w += r.ac_power_w;
    res.truncated_clusters += r.truncated ? 1 : 0;
  }
  // Cluster ledgers carry duration each; the plant ledger covers dt once.
  res.ledger.duration_s = dt;

  const double lf = std::abs(res.p_actual_w) / cfg_.transformer.rated_power_w;
  const double tfmr_wh = transformer_loss(lf, cfg_.transformer) * dt / kSecondsPerHour;
  const double clusters_ac_wh = res.ledger.grid_wh;
  res.ledger.transformer_wh = tfmr_wh;
  res.ledger.grid_wh = clusters_ac_wh + tfmr_wh;
  res.ledger.transformer_in_wh = clusters_ac_wh >= 0.0 ? clusters_ac_wh + tfmr_wh : -clusters_ac_wh;
  return res;
}

PlantStepResult Plant::evaluate(double p_sys_w, const AllocationVector& alloc, double dt,
                                std::vector<ClusterStepResult>* detail) const {
  std::vector<ClusterStepResult> local;
  return compute(p_sys_w, alloc, dt, detail ? *detail : local);
}

PlantStepResult Plant::step(double p_sys_w, const AllocationVector& alloc, double dt,
                            std::vector<ClusterStepResult>* detail) {
  auto& out = detail ? *detail : scratch_;
  auto res = compute(p_sys_w, alloc, dt, out);
  for (std::size_t j = 0; j < states_.size(); ++j) states_[j] = out[j].state;
  cumulative_ += res.ledger;
  elapsed_s_ += dt;
  return res;
}

void Plant::set_states(std::vector<ClusterState> states) {
  if (states.size() != states_.size())
    throw std::invalid_argument("state vector size does not match the plant");
  for (const auto& s : states)
    if (!(s.soc >= cfg_.soc_min - kSocEps && s.soc <= cfg_.soc_max + kSocEps) ||
        !std::isfinite(s.rc.i_pol))
      throw std::invalid_argument("cluster state outside the operating band");
  states_ = std::move(states);
}

nlohmann::json Plant::snapshot() const {
  nlohmann::json soc = nlohmann::json::array();
  nlohmann::json ipol = nlohmann::json::array();
  for (const auto& s : states_) {
    soc.push_back(s.soc);
    ipol.push_back(s.rc.i_pol);
  }
  return {{"soc", soc}, {"i_pol", ipol}, {"elapsed_s", elapsed_s_}, {"cumulative", cumulative_}};
}

void Plant::restore(const nlohmann::json& snap) {
  const auto soc = snap.at("soc").get<std::vector<double>>();
  const auto ipol = snap.at("i_pol").get<std::vector<double>>();
  if (soc.size() != states_.size() || ipol.size() != states_.size())
    throw std::invalid_argument("snapshot cluster count does not match the plant");
  std::vector<ClusterState> states(soc.size());
  const double elapsed = snap.at("elapsed_s").get<double>();
  for (std::size_t j = 0; j < soc.size(); ++j) states[j] = {soc[j], {ipol[j], elapsed}};
  set_states(std::move(states));
  elapsed_s_ = elapsed;
  cumulative_ = snap.at("cumulative").get<LossBreakdown>();
}

void to_json(nlohmann::json& j, const LossBreakdown& l) {
  j = {{"transformer_wh", l.transformer_wh},
       {"acdc_wh", l.acdc_wh},
       {"dcdc_wh", l.dcdc_wh},
       {"battery_ohmic_wh", l.battery_ohmic_wh},
       {"battery_polarization_wh", l.battery_polarization_wh},
       {"stored_wh", l.stored_wh},
       {"grid_wh", l.grid_wh},
       {"transformer_in_wh", l.transformer_in_wh},
       {"acdc_in_wh", l.acdc_in_wh},
       {"dcdc_in_wh", l.dcdc_in_wh},
       {"battery_in_wh", l.battery_in_wh},
       {"battery_steady_wh", l.battery_steady_wh},
       {"battery_transient_wh", l.battery_transient_wh},
       {"duration_s", l.duration_s}};
}

void from_json(const nlohmann::json& j, LossBreakdown& l) {
  j.at("transformer_wh").get_to(l.transformer_wh);
  j.at("acdc_wh").get_to(l.acdc_wh);
  j.at("dcdc_wh").get_to(l.dcdc_wh);
  j.at("battery_ohmic_wh").get_to(l.battery_ohmic_wh);
  j.at("battery_polarization_wh").get_to(l.battery_polarization_wh);
  j.at("stored_wh").get_to(l.stored_wh);
  j.at("grid_wh").get_to(l.grid_wh);
  j.at("transformer_in_wh").get_to(l.transformer_in_wh);
  j.at("acdc_in_wh").get_to(l.acdc_in_wh);
  j.at("dcdc_in_wh").get_to(l.dcdc_in_wh);
  j.at("battery_in_wh").get_to(l.battery_in_wh);
  j.at("battery_steady_wh").get_to(l.battery_steady_wh);
  j.at("battery_transient_wh").get_to(l.battery_transient_wh);
  j.at("duration_s").get_to(l.duration_s);
}

} // namespace bess
