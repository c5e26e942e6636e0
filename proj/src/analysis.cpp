#include "bess/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <thread>

#include <nlohmann/json.hpp>

namespace bess {

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty())
    throw std::invalid_argument("quantile of an empty series");
  const double h = static_cast<double>(sorted.size() - 1) * std::clamp(p, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

BoxStats box_stats(std::span<const double> series) {
  if (series.empty())
    throw std::invalid_argument("box_stats: series is empty");
  std::vector<double> v(series.begin(), series.end());
  std::sort(v.begin(), v.end());
  return {v.front(), quantile_sorted(v, 0.25), quantile_sorted(v, 0.5), quantile_sorted(v, 0.75),
          v.back()};
}

std::array<double, 5> component_shares(const LossBreakdown& l) {
  const std::array<double, 5> parts = {l.transformer_wh, l.acdc_wh, l.dcdc_wh, l.battery_ohmic_wh,
                                       l.battery_polarization_wh};
  const double total = l.total_loss_wh();
  std::array<double, 5> out{};
  if (total <= 0.0)
    return out;
  for (std::size_t i = 0; i < parts.size(); ++i) out[i] = parts[i] / total;
  return out;
}

DepthSweepReport summarize_depth(const SimulationResult& sim, const Plant& plant, double depth_w) {
  DepthSweepReport r;
  r.depth_w = depth_w;
  r.cluster_count = plant.size();

  std::vector<double> p_clu, dp, p_loss, p_ss, p_ts;
  const auto& s = sim.steps;
  for (std::size_t t = 0; t < s.size(); ++t) {
    if (s[t].cluster_power_w == 0.0) continue;
    p_clu.push_back(s[t].cluster_power_w);
    p_loss.push_back(s[t].cluster_loss_w);
    p_ss.push_back(s[t].cluster_ss_w);
    p_ts.push_back(s[t].cluster_ts_w);
    if (t > 0 && s[t - 1].cluster_power_w != 0.0)
      dp.push_back((s[t].cluster_power_w - s[t - 1].cluster_power_w) / sim.dt_s);
  }
  r.operating_samples = p_clu.size();
  if (!p_clu.empty()) {
    r.p_clu_stats = box_stats(p_clu);
    r.p_loss_stats = box_stats(p_loss);
    r.p_ss_stats = box_stats(p_ss);
    r.p_ts_stats = box_stats(p_ts);
  }
  if (!dp.empty()) r.dp_dt_stats = box_stats(dp);

  const auto& cum = plant.cumulative();
  r.e_ss_wh = cum.battery_steady_wh;
  r.e_ts_wh = cum.battery_transient_wh;
  r.e_loss_wh = cum.battery_loss_wh();
  r.ts_reduction_fraction = r.e_ss_wh > 0.0 ? std::abs(r.e_ts_wh) / r.e_ss_wh : 0.0;
  r.component_shares = component_shares(cum);
  return r;
}

std::vector<DepthSweepReport> depth_sweep(const LoadProfile& load_year,
                                          const std::vector<double>& depths_w,
                                          const ClusterParams& base,
                                          const DepthSweepOptions& opts) {
  for (double d : depths_w) {
    if (!(d > 0.0))
      throw std::invalid_argument("sweep depths must be > 0");
    const double m = d / base.rated_power_w;
    if (std::abs(m - std::round(m)) > 1e-9 * m)
      throw std::invalid_argument("sweep depth " + std::to_string(d) +
                                  " W is not a multiple of the cluster rating");
  }
  std::vector<DepthSweepReport> out(depths_w.size());
  std::vector<std::exception_ptr> errors(depths_w.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < depths_w.size(); i = next++) {
      try {
        const auto m = static_cast<std::size_t>(std::llround(depths_w[i] / base.rated_power_w));
        PlantConfig cfg = PlantConfig::uniform(m, base, opts.initial_soc);
        cfg.dt_s = load_year.dt_s;
        Plant plant(cfg);
        SimulationOptions so;
        so.schedule = opts.schedule;
        so.schedule.power_depth_w = depths_w[i];
        so.record_steps = true;
        const auto sim = simulate(load_year, plant, so);
        out[i] = summarize_depth(sim, plant, depths_w[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(opts.threads,
                                                     static_cast<unsigned>(depths_w.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

std::vector<MedianBin> median_curve(std::span<const EfficiencyPoint> points, double bin_width_w) {
  if (!(bin_width_w > 0.0))
    throw std::invalid_argument("bin width must be > 0");
  std::map<long long, std::vector<double>> bins;
  for (const auto& p : points)
    bins[static_cast<long long>(std::floor(p.power_w / bin_width_w))].push_back(p.efficiency);
  std::vector<MedianBin> out;
  for (auto& [idx, v] : bins) {
    std::sort(v.begin(), v.end());
    out.push_back({static_cast<double>(idx) * bin_width_w, static_cast<double>(idx + 1) * bin_width_w,
                   v.size(), quantile_sorted(v, 0.5)});
  }
  return out;
}

std::optional<double> step_efficiency(double grid_wh, double stored_wh) {
  double eff = 0.0;
  if (grid_wh > 0.0 && stored_wh > 0.0)
    eff = stored_wh / grid_wh;
  else if (grid_wh < 0.0 && stored_wh < 0.0)
    eff = grid_wh / stored_wh;
  else
    return std::nullopt;
  if (!(eff > 0.0 && eff <= 1.0))
    return std::nullopt;
  return eff;
}

std::array<EfficiencyScatter, 2> efficiency_scatter(std::span<const StepRecord> steps,
                                                    double bin_width_w) {
  std::array<EfficiencyScatter, 2> out;
  out[0].direction = FlowDirection::charge;
  out[1].direction = FlowDirection::discharge;
  for (const auto& s : steps) {
    if (s.actual_w == 0.0) continue;
    const auto eff = step_efficiency(s.grid_wh, s.stored_wh);
    if (!eff) continue;
    out[s.actual_w > 0.0 ? 0 : 1].points.push_back({std::abs(s.actual_w), *eff});
  }
  for (auto& sc : out) sc.median_curve = median_curve(sc.points, bin_width_w);
  return out;
}

namespace {

double efficiency_of(double loss, double throughput) {
  if (throughput > 0.0) return 1.0 - loss / throughput;
  return loss > 0.0 ? 0.0 : 1.0;
}

std::vector<LedgerRow> rows_of(const LossBreakdown& l) {
  const double total = l.total_loss_wh();
  auto row = [&](const char* name, double loss, double in) {
    LedgerRow r;
    r.component = name;
    r.loss_wh = loss;
    r.share = total > 0.0 ? loss / total : 0.0;
    r.throughput_wh = in;
    r.efficiency = efficiency_of(loss, in);
    return r;
  };
  std::vector<LedgerRow> rows = {
      row("transformer", l.transformer_wh, l.transformer_in_wh),
      row("acdc", l.acdc_wh, l.acdc_in_wh),
      row("dcdc", l.dcdc_wh, l.dcdc_in_wh),
      row("battery", l.battery_loss_wh(), l.battery_in_wh),
      row("battery_ohmic", l.battery_ohmic_wh, l.battery_in_wh),
      row("battery_polarization", l.battery_polarization_wh, l.battery_in_wh),
  };
  LedgerRow t = row("total", total, l.transformer_in_wh);
  t.efficiency = rows[0].efficiency * rows[1].efficiency * rows[2].efficiency * rows[3].efficiency;
  rows.push_back(t);
  return rows;
}

} // namespace

LedgerReport component_ledger_report(const LossBreakdown& run,
                                     const std::optional<LossBreakdown>& baseline) {
  LedgerReport r;
  r.duration_s = run.duration_s;
  r.rows = rows_of(run);
  if (baseline) {
    if (std::abs(baseline->duration_s - run.duration_s) > 1e-6)
      throw HorizonMismatch("runs cover different horizons (" + std::to_string(run.duration_s) +
                            " s vs " + std::to_string(baseline->duration_s) + " s)");
    const auto base = rows_of(*baseline);
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
      r.rows[i].delta_loss_wh = r.rows[i].loss_wh - base[i].loss_wh;
      r.rows[i].delta_efficiency = r.rows[i].efficiency - base[i].efficiency;
    }
  }
  return r;
}

const LedgerRow& ledger_row(const LedgerReport& r, const std::string& component) {
  for (const auto& row : r.rows)
    if (row.component == component) return row;
  throw std::out_of_range("no ledger row named '" + component + "'");
}

void to_json(nlohmann::json& j, const BoxStats& b) {
  j = {{"min", b.min}, {"q1", b.q1}, {"median", b.median}, {"q3", b.q3}, {"max", b.max}};
}

void to_json(nlohmann::json& j, const DepthSweepReport& r) {
  nlohmann::json shares;
  for (std::size_t i = 0; i < kComponentNames.size(); ++i)
    shares[kComponentNames[i]] = r.component_shares[i];
  j = {{"depth_w", r.depth_w},
       {"cluster_count", r.cluster_count},
       {"operating_samples", r.operating_samples},
       {"p_clu_w", r.p_clu_stats},
       {"dp_dt_w_per_s", r.dp_dt_stats},
       {"p_loss_w", r.p_loss_stats},
       {"p_ss_w", r.p_ss_stats},
       {"p_ts_w", r.p_ts_stats},
       {"e_ss_wh", r.e_ss_wh},
       {"e_ts_wh", r.e_ts_wh},
       {"e_loss_wh", r.e_loss_wh},
       {"ts_reduction_fraction", r.ts_reduction_fraction},
       {"component_shares", shares}};
}

void to_json(nlohmann::json& j, const LedgerReport& r) {
  j = nlohmann::json::object();
  j["duration_s"] = r.duration_s;
  auto& rows = j["rows"] = nlohmann::json::array();
  for (const auto& row : r.rows) {
    nlohmann::json o = {{"component", row.component},
                        {"loss_wh", row.loss_wh},
                        {"share", row.share},
                        {"throughput_wh", row.throughput_wh},
                        {"efficiency", row.efficiency}};
    o["delta_loss_wh"] = row.delta_loss_wh ? nlohmann::json(*row.delta_loss_wh) : nlohmann::json();
    o["delta_efficiency"] =
        row.delta_efficiency ? nlohmann::json(*row.delta_efficiency) : nlohmann::json();
    rows.push_back(std::move(o));
  }
}

} // namespace bess
