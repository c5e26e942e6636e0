#include "bess/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace bess {

namespace {

constexpr double kSecondsPerHour = 3600.0;

struct StepPlan {
  IntervalKind kind = IntervalKind::charge;
  double ref_w = 0.0;
  bool active = false;
};

std::vector<StepPlan> expand(const ShavingPlan& plan, std::size_t n) {
  std::vector<StepPlan> out(n);
  for (const auto& iv : plan.intervals)
    for (std::size_t t = iv.range.begin; t < std::min(iv.range.end, n); ++t)
      out[t] = {iv.kind, iv.ref_w, true};
  return out;
}

LoadProfile forecast_of(const LoadProfile& day, const SimulationOptions& opts, std::size_t d) {
  if (opts.forecast_noise <= 0.0)
    return day;
  LoadProfile f = day;
  std::mt19937_64 rng(opts.forecast_seed + d);
  std::normal_distribution<double> noise(0.0, opts.forecast_noise);
  for (auto& v : f.values_w) v = std::max(0.0, v * (1.0 + noise(rng)));
  return f;
}

ShavingPlan idle_plan(const LoadProfile& day, const PlanSettings& s) {
  ShavingPlan plan;
  plan.power_depth_w = s.power_depth_w;
  plan.rated_power_w = s.rated_power_w;
  plan.rated_energy_wh = s.rated_energy_wh;
  plan.initial_energy_wh = s.initial_energy_wh;
  plan.dt_s = day.dt_s;
  if (!day.values_w.empty()) {
    const auto [lo, hi] = std::minmax_element(day.values_w.begin(), day.values_w.end());
    plan.initial_chr_ref_w = *lo;
    plan.initial_dis_ref_w = *hi;
  }
  return plan;
}

class Dispatcher {
public:
  Dispatcher(Plant& plant, const AllocatorSettings& s, double dt,
             std::vector<PsoRunRecord>* log)
      : plant_(plant), s_(s), dt_(dt), log_(log) {}

  AllocationVector choose(double p, std::size_t step) {
    const std::size_t m = plant_.size();
    if (p == 0.0)
      return {std::vector<double>(m, 1.0 / static_cast<double>(m))};
    if (s_.mode == AllocationMode::balanced)
      return balanced_allocation(plant_, p);

    const auto blocked = plant_.blocked_mask(p);
    const double sign = p > 0.0 ? 1.0 : -1.0;
    const bool stale = held_.k.empty() || sign != held_sign_ || blocked != held_blocked_ ||
                       static_cast<double>(step - last_run_) * dt_ >= s_.cadence_s;
    const AllocationVector balanced = balanced_allocation(blocked, share_caps(plant_, p));
    if (stale) {
      PsoParams params = s_.pso;
      params.rng_seed = s_.pso.rng_seed + runs_;
      ++runs_;
      const auto res = pso_allocate(p, plant_, params, dt_);
      if (log_) {
        PsoRunRecord rec{step, p, res.balanced_fitness, {}, {}};
        for (const auto& it : res.trace) {
          rec.best_fitness.push_back(it.best_fitness);
          rec.best_k.push_back(it.best.k);
        }
        log_->push_back(std::move(rec));
      }
      held_ = res.best;
      held_sign_ = sign;
      held_blocked_ = blocked;
      last_run_ = step;
      return res.best_fitness >= res.balanced_fitness ? res.best : balanced;
    }
    AllocationVector candidate = repair(held_.k, blocked, share_caps(plant_, p));
    return fitness(candidate, p, plant_, dt_) >= fitness(balanced, p, plant_, dt_) ? candidate
                                                                                   : balanced;
  }

  std::size_t runs() const { return runs_; }

private:
  Plant& plant_;
  const AllocatorSettings& s_;
  double dt_;
  std::vector<PsoRunRecord>* log_;
  AllocationVector held_;
  double held_sign_ = 0.0;
  std::vector<bool> held_blocked_;
  std::size_t last_run_ = 0;
  std::size_t runs_ = 0;
};

} // namespace

std::string to_string(AllocationMode m) { return m == AllocationMode::pso ? "pso" : "balanced"; }

AllocationMode allocation_mode_from_string(const std::string& s) {
  if (s == "balanced") return AllocationMode::balanced;
  if (s == "pso") return AllocationMode::pso;
  throw std::invalid_argument("unknown allocation mode '" + s + "'");
}

double plant_energy_wh(const Plant& plant) {
  const auto& cfg = plant.config();
  double e = 0.0;
  for (std::size_t j = 0; j < plant.size(); ++j)
    e += cfg.clusters[j].usable_energy_wh(cfg.soc_min, plant.states()[j].soc);
  return e;
}

SimulationResult simulate(const LoadProfile& load, Plant& plant, const SimulationOptions& opts) {
  load.validate();
  const double dt = load.dt_s;
  if (std::abs(dt - plant.config().dt_s) > 1e-9)
    throw std::invalid_argument("load sample spacing does not match the plant step");
  if (opts.trace_cluster >= plant.size())
    throw std::invalid_argument("trace_cluster is out of range");

  const double p_r = plant.rated_power_w();
  const double e_r = plant.usable_energy_wh();
  const double h = dt / kSecondsPerHour;
  const std::size_t per_day = load.samples_per_day();
  const std::size_t n_days = load.day_count();

  SimulationResult out;
  out.dt_s = dt;
  if (opts.record_steps) out.steps.reserve(n_days * per_day);
  if (opts.record_allocation) out.allocation.reserve(n_days * per_day);

  Dispatcher dispatcher(plant, opts.allocator, dt, opts.record_pso_trace ? &out.pso_log : nullptr);
  std::vector<ClusterStepResult> detail;
  std::vector<DispatchSample> dispatch(per_day);
  std::size_t global_step = 0;

  for (std::size_t d = 0; d < n_days; ++d) {
    const LoadProfile day = load.day(d);
    PlanSettings ps;
    ps.power_depth_w = opts.schedule.power_depth_w.value_or(p_r);
    ps.rated_power_w = p_r;
    ps.rated_energy_wh = e_r;
    ps.initial_energy_wh = plant_energy_wh(plant);
    ps.p_chr_ref_w = opts.schedule.p_chr_ref_w;
    ps.p_dis_ref_w = opts.schedule.p_dis_ref_w;
    ps.tolerance_fraction = opts.schedule.tolerance_fraction;
    ps.max_iterations = opts.schedule.max_iterations;

    DayResult dr;
    dr.day = d;
    try {
      dr.plan = make_plan(forecast_of(day, opts, d), ps, opts.schedule.method);
    } catch (const std::invalid_argument& e) {
      dr.plan = idle_plan(day, ps);
      dr.plan_error = e.what();
    } catch (const EmptyPlanError& e) {
      dr.plan = idle_plan(day, ps);
      dr.plan_error = e.what();
    }
    const auto steps = expand(dr.plan, per_day);

    for (std::size_t t = 0; t < per_day; ++t, ++global_step) {
      const double l = day.values_w[t];
      double demand = 0.0;
      if (steps[t].active)
        demand = steps[t].kind == IntervalKind::charge ? charge_demand(l, steps[t].ref_w, p_r)
                                                       : discharge_demand(l, steps[t].ref_w, p_r);
      double p = demand;
      if (p != 0.0) {
        const auto blocked = plant.blocked_mask(p);
        double avail = 0.0;
        for (std::size_t j = 0; j < plant.size(); ++j)
          if (!blocked[j]) avail += plant.config().clusters[j].rated_power_w;
        if (avail == 0.0) demand = 0.0;
        p = std::clamp(demand, -avail, avail);
      }
      const AllocationVector k = dispatcher.choose(p, global_step);
      const PlantStepResult res = plant.step(p, k, dt, &detail);

      dispatch[t] = {demand, res.p_actual_w};
      dr.ledger += res.ledger;
      if (res.truncated_clusters > 0) ++dr.truncated_steps;
      const double err = res.ledger.relative_balance_error();
      out.max_balance_error = std::max(out.max_balance_error, err);

      if (opts.record_steps) {
        const auto& c = detail[opts.trace_cluster];
        StepRecord r;
        r.load_w = l;
        r.demand_w = demand;
        r.actual_w = res.p_actual_w;
        r.grid_wh = res.ledger.grid_wh;
        r.stored_wh = res.ledger.stored_wh;
        r.loss_wh = res.ledger.total_loss_wh();
        r.balance_error = err;
        r.cluster_power_w = c.ac_power_w;
        r.cluster_loss_w = c.ledger.battery_loss_wh() / h;
        r.cluster_ss_w = c.ledger.battery_steady_wh / h;
        r.cluster_ts_w = c.ledger.battery_transient_wh / h;
        out.steps.push_back(r);
      }
      if (opts.record_allocation)
        out.allocation.push_back(k.k);
    }
    dr.metrics = compute_metrics(dispatch, dr.plan, day, e_r);
    out.total += dr.ledger;
    out.days.push_back(std::move(dr));
  }
  out.pso_runs = dispatcher.runs();
  return out;
}

ShavingMetrics summarize_metrics(const SimulationResult& sim) {
  ShavingMetrics m;
  double util = 0.0;
  std::size_t util_n = 0;
  for (const auto& d : sim.days) {
    m.e_chr_wh += d.metrics.e_chr_wh;
    m.e_dis_wh += d.metrics.e_dis_wh;
    m.e_val_wh += d.metrics.e_val_wh;
    m.e_pek_wh += d.metrics.e_pek_wh;
    m.cur += d.metrics.cur;
    m.equivalent_cycles += d.metrics.equivalent_cycles;
    if (d.metrics.power_utilization) {
      util += *d.metrics.power_utilization;
      ++util_n;
    }
  }
  if (!sim.days.empty()) m.cur /= static_cast<double>(sim.days.size());
  if (m.e_val_wh > 0.0) m.cr = m.e_chr_wh / m.e_val_wh;
  if (m.e_pek_wh > 0.0) m.rr = m.e_dis_wh / m.e_pek_wh;
  if (util_n > 0) m.power_utilization = util / static_cast<double>(util_n);
  return m;
}

} // namespace bess
