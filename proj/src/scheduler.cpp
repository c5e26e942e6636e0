#include "bess/scheduler.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <tuple>

#include <nlohmann/json.hpp>

namespace bess {

namespace {

constexpr double kSecondsPerHour = 3600.0;
constexpr double kSecondsPerDay = 86400.0;
// Keeps a charge reference strictly below its neighbouring discharge references.
constexpr double kRefSeparationW = 1.0;

struct Solve {
  double x = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Finds x in [a, b] with f(x) in [lo_t, hi_t] for non-decreasing f. On failure
// returns whichever end is closer to the band.
template <class F>
Solve solve_band(F f, double a, double b, double lo_t, double hi_t, int max_iter) {
  Solve s;
  const double fa = f(a);
  const double fb = f(b);
  if (fb < lo_t) return {b, 0, false};
  if (fa > hi_t) return {a, 0, false};
  if (fa >= lo_t) return {a, 0, true};
  if (fb <= hi_t) return {b, 0, true};
  while (s.iterations < max_iter) {
    ++s.iterations;
    const double mid = 0.5 * (a + b);
    const double v = f(mid);
    if (v < lo_t)
      a = mid;
    else if (v > hi_t)
      b = mid;
    else
      return {mid, s.iterations, true};
  }
  s.x = a; // f(a) < lo_t <= hi_t: stays on the safe side of the upper limit
  return s;
}

double interval_energy(std::span<const double> load, double dt, const ShavingInterval& iv,
                       double ref, double p_r) {
  double e = 0.0;
  for (std::size_t t = iv.range.begin; t < iv.range.end; ++t)
    e += (iv.kind == IntervalKind::charge ? charge_demand(load[t], ref, p_r)
                                          : discharge_demand(load[t], ref, p_r));
  return e * dt / kSecondsPerHour;
}

double soc_of_energy(double e, double e_r, const SocBand& band) {
  return band.soc_min + (e / e_r) * (band.soc_max - band.soc_min);
}

std::vector<ShavingCycle> cycles_from_intervals(const std::vector<ShavingInterval>& iv) {
  std::vector<ShavingCycle> out;
  for (std::size_t i = 1; i < iv.size(); ++i) {
    const auto& a = iv[i - 1];
    const auto& b = iv[i];
    ShavingCycle c;
    c.index = static_cast<int>(i);
    c.charge_first = a.kind == IntervalKind::charge;
    const auto& chr = c.charge_first ? a : b;
    const auto& dis = c.charge_first ? b : a;
    c.charge_interval = chr.range;
    c.discharge_interval = dis.range;
    c.p_chr_ref_w = chr.ref_w;
    c.p_dis_ref_w = dis.ref_w;
    out.push_back(c);
  }
  return out;
}

} // namespace

std::size_t LoadProfile::samples_per_day() const {
  return static_cast<std::size_t>(std::llround(kSecondsPerDay / dt_s));
}

std::size_t LoadProfile::day_count() const { return size() / samples_per_day(); }

LoadProfile LoadProfile::slice(std::size_t first, std::size_t count) const {
  if (first + count > size())
    throw std::out_of_range("profile slice beyond end of data");
  LoadProfile out;
  out.start_time = start_time;
  out.dt_s = dt_s;
  out.values_w.assign(values_w.begin() + static_cast<std::ptrdiff_t>(first),
                      values_w.begin() + static_cast<std::ptrdiff_t>(first + count));
  return out;
}

LoadProfile LoadProfile::day(std::size_t d) const {
  const std::size_t n = samples_per_day();
  return slice(d * n, n);
}

void LoadProfile::validate() const {
  if (!(dt_s > 0.0))
    throw std::invalid_argument("load profile dt_s must be > 0");
  for (std::size_t i = 0; i < values_w.size(); ++i)
    if (!std::isfinite(values_w[i]) || values_w[i] < 0.0)
      throw std::invalid_argument("load sample " + std::to_string(i) + " is negative or not finite");
}

bool ShavingPlan::all_feasible() const {
  return std::all_of(cycles.begin(), cycles.end(), [](const ShavingCycle& c) { return c.feasible; });
}

std::vector<ShavingInterval> segment_intervals(const LoadProfile& profile, double p_chr_ref,
                                               double p_dis_ref) {
  if (!(p_chr_ref < p_dis_ref))
    throw std::invalid_argument("charge reference must be below discharge reference");
  if (profile.values_w.empty())
    throw EmptyPlanError("load profile is empty");

  std::vector<ShavingInterval> out;
  std::size_t leading_dead = 0;
  for (std::size_t t = 0; t < profile.size(); ++t) {
    const double load = profile.values_w[t];
    const bool chr = load < p_chr_ref;
    const bool dis = load > p_dis_ref;
    if (!chr && !dis) {
      if (out.empty())
        ++leading_dead;
      else
        out.back().range.end = t + 1;
      continue;
    }
    const IntervalKind kind = chr ? IntervalKind::charge : IntervalKind::discharge;
    if (!out.empty() && out.back().kind == kind) {
      out.back().range.end = t + 1;
      continue;
    }
    ShavingInterval iv;
    iv.kind = kind;
    iv.range = {out.empty() ? t - leading_dead : t, t + 1};
    iv.ref_w = chr ? p_chr_ref : p_dis_ref;
    out.push_back(iv);
  }
  if (out.empty())
    throw EmptyPlanError("no sample lies below the charge reference or above the discharge reference");
  return out;
}

std::vector<ShavingCycle> segment_cycles(const LoadProfile& profile, double p_chr_ref,
                                         double p_dis_ref) {
  return cycles_from_intervals(segment_intervals(profile, p_chr_ref, p_dis_ref));
}

double charge_demand(double load_w, double p_chr_ref, double p_r) {
  if (load_w <= p_chr_ref - p_r) return p_r;
  if (load_w < p_chr_ref) return p_chr_ref - load_w;
  return 0.0;
}

double discharge_demand(double load_w, double p_dis_ref, double p_r) {
  if (load_w >= p_dis_ref + p_r) return -p_r;
  if (load_w > p_dis_ref) return p_dis_ref - load_w;
  return 0.0;
}

double demand_power(double load_w, IntervalKind kind, double ref_w, double soc, double p_r,
                    const SocBand& band) {
  if (kind == IntervalKind::charge)
    return soc < band.soc_max ? charge_demand(load_w, ref_w, p_r) : 0.0;
  return soc > band.soc_min ? discharge_demand(load_w, ref_w, p_r) : 0.0;
}

double demand_power(double load_w, const ShavingCycle& cycle, bool in_charge_interval, double soc,
                    double p_r, const SocBand& band) {
  return in_charge_interval
             ? demand_power(load_w, IntervalKind::charge, cycle.p_chr_ref_w, soc, p_r, band)
             : demand_power(load_w, IntervalKind::discharge, cycle.p_dis_ref_w, soc, p_r, band);
}

EnergyTrace cycle_energy(std::span<const double> load_w, double dt_s,
                         std::span<const ShavingInterval> intervals, double p_r,
                         double start_energy_wh, double rated_energy_wh, const SocBand& band) {
  EnergyTrace tr;
  double e = start_energy_wh;
  tr.max_wh = tr.min_wh = e;
  for (const auto& iv : intervals) {
    for (std::size_t t = iv.range.begin; t < iv.range.end; ++t) {
      const double p = iv.kind == IntervalKind::charge ? charge_demand(load_w[t], iv.ref_w, p_r)
                                                       : discharge_demand(load_w[t], iv.ref_w, p_r);
      e += p * dt_s / kSecondsPerHour;
      tr.energy_wh.push_back(e);
      tr.max_wh = std::max(tr.max_wh, e);
      tr.min_wh = std::min(tr.min_wh, e);
    }
  }
  tr.soc_max = soc_of_energy(tr.max_wh, rated_energy_wh, band);
  tr.soc_min = soc_of_energy(tr.min_wh, rated_energy_wh, band);
  return tr;
}

EnergyTrace cycle_energy(const LoadProfile& profile, const ShavingCycle& cycle, double p_r,
                         double start_energy_wh, double rated_energy_wh, const SocBand& band) {
  ShavingInterval chr{IntervalKind::charge, cycle.charge_interval, cycle.p_chr_ref_w};
  ShavingInterval dis{IntervalKind::discharge, cycle.discharge_interval, cycle.p_dis_ref_w};
  const std::array<ShavingInterval, 2> ivs = cycle.charge_first ? std::array{chr, dis}
                                                                : std::array{dis, chr};
  return cycle_energy(profile.values_w, profile.dt_s, ivs, p_r, start_energy_wh, rated_energy_wh,
                      band);
}

std::pair<double, double> initial_references(const LoadProfile& day, const PlanSettings& s) {
  if (day.values_w.empty())
    throw EmptyPlanError("load profile is empty");
  const auto [lo, hi] = std::minmax_element(day.values_w.begin(), day.values_w.end());
  const double chr = s.p_chr_ref_w.value_or(*lo + s.power_depth_w);
  const double dis = s.p_dis_ref_w.value_or(*hi - s.power_depth_w);
  if (!(chr < dis))
    throw std::invalid_argument("initial references do not bracket the load: charge reference " +
                                std::to_string(chr) + " W is not below discharge reference " +
                                std::to_string(dis) + " W");
  return {chr, dis};
}

namespace {

ShavingPlan plan_skeleton(const LoadProfile& day, const PlanSettings& s, PlanMethod method) {
  if (!(s.rated_power_w > 0.0 && s.rated_energy_wh > 0.0))
    throw std::invalid_argument("rated power and energy must be > 0");
  ShavingPlan plan;
  plan.method = method;
  plan.power_depth_w = s.power_depth_w;
  plan.rated_power_w = s.rated_power_w;
  plan.rated_energy_wh = s.rated_energy_wh;
  plan.initial_energy_wh = s.initial_energy_wh;
  plan.dt_s = day.dt_s;
  std::tie(plan.initial_chr_ref_w, plan.initial_dis_ref_w) = initial_references(day, s);
  plan.intervals = segment_intervals(day, plan.initial_chr_ref_w, plan.initial_dis_ref_w);
  return plan;
}

double neighbour_limit(const std::vector<ShavingInterval>& iv, std::size_t i, bool upper,
                       double fallback) {
  double lim = fallback;
  auto apply = [&](const ShavingInterval& n) {
    lim = upper ? std::min(lim, n.ref_w - kRefSeparationW) : std::max(lim, n.ref_w + kRefSeparationW);
  };
  if (i > 0) apply(iv[i - 1]);
  if (i + 1 < iv.size()) apply(iv[i + 1]);
  return lim;
}

} // namespace

ShavingPlan correct_references_improved(const LoadProfile& day, const PlanSettings& s) {
  ShavingPlan plan = plan_skeleton(day, s, PlanMethod::improved);
  auto& iv = plan.intervals;
  const std::span<const double> load = day.values_w;
  const double dt = day.dt_s;
  const double p_r = s.rated_power_w;
  const double e_r = s.rated_energy_wh;
  const double tol = s.tolerance_fraction * e_r;
  const auto [lo_it, hi_it] = std::minmax_element(day.values_w.begin(), day.values_w.end());
  const double load_lo = *lo_it;
  const double load_hi = *hi_it;
  std::vector<int> iterations(iv.size(), 0);

  double e = s.initial_energy_wh;
  for (std::size_t i = 0; i < iv.size(); ++i) {
    auto& a = iv[i];
    const ShavingInterval* b = i + 1 < iv.size() ? &iv[i + 1] : nullptr;
    const double next = b ? interval_energy(load, dt, *b, b->ref_w, p_r) : 0.0;

    if (a.kind == IntervalKind::charge) {
      auto charged = [&](double r) { return interval_energy(load, dt, a, r, p_r); };
      const double now = charged(a.ref_w);
      const double cap = neighbour_limit(iv, i, true, load_hi);
      if (e + now > e_r) {
        // Overcharge: lower the charge reference.
        const double target = e_r - e;
        const auto sol = solve_band(charged, load_lo, a.ref_w, target - tol, target, s.max_iterations);
        a.ref_w = sol.x;
        iterations[i] = sol.iterations;
      } else if (b && e + now + next < 0.0 && e + now < e_r && cap > a.ref_w) {
        // Undercharge: raise the charge reference to cover the next discharge.
        const double need = -next - e;
        const double room = e_r - e;
        const double lo_t = std::min(need, room - tol);
        const double hi_t = std::min(need + tol, room);
        const auto sol = solve_band(charged, a.ref_w, cap, lo_t, hi_t, s.max_iterations);
        a.ref_w = sol.x;
        iterations[i] = sol.iterations;
      }
    } else {
      // Work on u = -ref so that the discharged amount is non-decreasing.
      auto discharged = [&](double u) { return -interval_energy(load, dt, a, -u, p_r); };
      const double now = discharged(-a.ref_w);
      const double floor = neighbour_limit(iv, i, false, load_lo);
      if (e - now < 0.0) {
        // Over-discharge: raise the discharge reference.
        const double target = std::max(e, 0.0);
        const auto sol =
            solve_band(discharged, -load_hi, -a.ref_w, target - tol, target, s.max_iterations);
        a.ref_w = -sol.x;
        iterations[i] = sol.iterations;
      } else if (b && e - now + next > e_r && e - now > 0.0 && floor < a.ref_w) {
        // Under-discharge: lower the discharge reference to make room.
        const double need = e + next - e_r;
        const double lo_t = std::min(need, e - tol);
        const double hi_t = std::min(need + tol, e);
        const auto sol = solve_band(discharged, -a.ref_w, -floor, lo_t, hi_t, s.max_iterations);
        a.ref_w = -sol.x;
        iterations[i] = sol.iterations;
      }
    }
    e += interval_energy(load, dt, a, a.ref_w, p_r);
  }

  plan.cycles = cycles_from_intervals(iv);
  for (auto& c : plan.cycles)
    c.iterations = iterations[static_cast<std::size_t>(c.index) - 1];
  refresh_feasibility(day, plan);
  return plan;
}

ShavingPlan correct_references_original(const LoadProfile& day, const PlanSettings& s) {
  ShavingPlan plan = plan_skeleton(day, s, PlanMethod::original);
  auto& iv = plan.intervals;
  const std::span<const double> load = day.values_w;
  const double dt = day.dt_s;
  const double p_r = s.rated_power_w;
  const double tol = s.tolerance_fraction * s.rated_energy_wh;
  const auto [lo_it, hi_it] = std::minmax_element(day.values_w.begin(), day.values_w.end());

  auto day_energy = [&](IntervalKind kind, double ref) {
    double e = 0.0;
    for (const auto& x : iv)
      if (x.kind == kind) e += interval_energy(load, dt, x, ref, p_r);
    return std::abs(e);
  };

  const double c0 = plan.initial_chr_ref_w;
  const double d0 = plan.initial_dis_ref_w;
  const double valley = day_energy(IntervalKind::charge, c0);
  const double peak = day_energy(IntervalKind::discharge, d0);
  const double target = std::min({valley, peak, s.rated_energy_wh});

  double chr = c0;
  double dis = d0;
  int iterations = 0;
  if (valley > target) {
    auto f = [&](double r) { return day_energy(IntervalKind::charge, r); };
    const auto sol = solve_band(f, *lo_it, c0, target - tol, target, s.max_iterations);
    chr = sol.x;
    iterations += sol.iterations;
  }
  if (peak > target) {
    auto f = [&](double u) { return day_energy(IntervalKind::discharge, -u); };
    const auto sol = solve_band(f, -*hi_it, -d0, target - tol, target, s.max_iterations);
    dis = -sol.x;
    iterations += sol.iterations;
  }
  for (auto& x : iv)
    x.ref_w = x.kind == IntervalKind::charge ? chr : dis;

  plan.cycles = cycles_from_intervals(iv);
  for (auto& c : plan.cycles) c.iterations = iterations;
  refresh_feasibility(day, plan);
  return plan;
}

ShavingPlan make_plan(const LoadProfile& day, const PlanSettings& s, PlanMethod method) {
  return method == PlanMethod::improved ? correct_references_improved(day, s)
                                        : correct_references_original(day, s);
}

std::vector<double> plan_demand(const LoadProfile& day, const ShavingPlan& plan) {
  std::vector<double> out(day.size(), 0.0);
  for (const auto& iv : plan.intervals)
    for (std::size_t t = iv.range.begin; t < iv.range.end; ++t)
      out[t] = iv.kind == IntervalKind::charge
                   ? charge_demand(day.values_w[t], iv.ref_w, plan.rated_power_w)
                   : discharge_demand(day.values_w[t], iv.ref_w, plan.rated_power_w);
  return out;
}

void refresh_feasibility(const LoadProfile& day, ShavingPlan& plan, const SocBand& band) {
  const double tol = 1e-3 * plan.rated_energy_wh;
  double e = plan.initial_energy_wh;
  for (std::size_t i = 0; i < plan.intervals.size(); ++i) {
    if (i >= 1) {
      auto& c = plan.cycles[i - 1];
      const std::span<const ShavingInterval> pair(plan.intervals.data() + (i - 1), 2);
      const auto tr = cycle_energy(day.values_w, day.dt_s, pair, plan.rated_power_w, e,
                                   plan.rated_energy_wh, band);
      c.feasible = tr.min_wh >= -tol && tr.max_wh <= plan.rated_energy_wh + tol;
      e += interval_energy(day.values_w, day.dt_s, plan.intervals[i - 1],
                           plan.intervals[i - 1].ref_w, plan.rated_power_w);
    }
  }
}

ShavingMetrics compute_metrics(std::span<const DispatchSample> dispatch, const ShavingPlan& plan,
                               const LoadProfile& day, double rated_energy_wh) {
  if (dispatch.size() != day.size())
    throw std::invalid_argument("dispatch record does not cover the planning horizon");
  const double h = day.dt_s / kSecondsPerHour;
  ShavingMetrics m;
  double util_sum = 0.0;
  std::size_t util_n = 0;
  for (std::size_t t = 0; t < day.size(); ++t) {
    const double load = day.values_w[t];
    m.e_val_wh += std::clamp(plan.initial_chr_ref_w - load, 0.0, plan.power_depth_w) * h;
    m.e_pek_wh += std::clamp(load - plan.initial_dis_ref_w, 0.0, plan.power_depth_w) * h;
    const auto& d = dispatch[t];
    m.e_chr_wh += std::max(d.actual_w, 0.0) * h;
    m.e_dis_wh += std::max(-d.actual_w, 0.0) * h;
    if (d.demand_w != 0.0) {
      util_sum += d.actual_w / d.demand_w;
      ++util_n;
    }
  }
  if (m.e_val_wh > 0.0) m.cr = m.e_chr_wh / m.e_val_wh;
  if (m.e_pek_wh > 0.0) m.rr = m.e_dis_wh / m.e_pek_wh;
  if (util_n > 0) m.power_utilization = util_sum / static_cast<double>(util_n);
  m.cur = m.e_chr_wh / rated_energy_wh;
  m.equivalent_cycles = (m.e_chr_wh + m.e_dis_wh) / (2.0 * rated_energy_wh);
  return m;
}

std::string to_string(PlanMethod m) { return m == PlanMethod::improved ? "improved" : "original"; }

PlanMethod plan_method_from_string(const std::string& s) {
  if (s == "improved") return PlanMethod::improved;
  if (s == "original") return PlanMethod::original;
  throw std::invalid_argument("unknown plan method '" + s + "' (expected original|improved)");
}

void to_json(nlohmann::json& j, const ShavingPlan& plan) {
  nlohmann::json intervals = nlohmann::json::array();
  for (const auto& iv : plan.intervals)
    intervals.push_back({{"kind", iv.kind == IntervalKind::charge ? "charge" : "discharge"},
                         {"begin", iv.range.begin},
                         {"end", iv.range.end},
                         {"ref_w", iv.ref_w}});
  nlohmann::json cycles = nlohmann::json::array();
  for (const auto& c : plan.cycles)
    cycles.push_back({{"index", c.index},
                      {"charge_first", c.charge_first},
                      {"charge_interval", {c.charge_interval.begin, c.charge_interval.end}},
                      {"discharge_interval", {c.discharge_interval.begin, c.discharge_interval.end}},
                      {"p_chr_ref_w", c.p_chr_ref_w},
                      {"p_dis_ref_w", c.p_dis_ref_w},
                      {"feasible", c.feasible},
                      {"iterations", c.iterations}});
  j = {{"method", to_string(plan.method)},
       {"dt_s", plan.dt_s},
       {"power_depth_w", plan.power_depth_w},
       {"rated_power_w", plan.rated_power_w},
       {"rated_energy_wh", plan.rated_energy_wh},
       {"initial_energy_wh", plan.initial_energy_wh},
       {"initial_chr_ref_w", plan.initial_chr_ref_w},
       {"initial_dis_ref_w", plan.initial_dis_ref_w},
       {"intervals", intervals},
       {"cycles", cycles}};
}

void to_json(nlohmann::json& j, const ShavingMetrics& m) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); };
  j = {{"e_chr_wh", m.e_chr_wh}, {"e_dis_wh", m.e_dis_wh},   {"e_val_wh", m.e_val_wh},
       {"e_pek_wh", m.e_pek_wh}, {"cr", opt(m.cr)},          {"rr", opt(m.rr)},
       {"cur", m.cur},           {"power_utilization", opt(m.power_utilization)},
       {"equivalent_cycles", m.equivalent_cycles}};
}

} // namespace bess
