#include "bess/allocator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace bess {

namespace {

constexpr double kSecondsPerHour = 3600.0;
constexpr double kShareTolerance = 1e-12;

double cap_of(std::span<const double> caps, std::size_t j) {
  return caps.empty() ? 1.0 : std::min(1.0, caps[j]);
}

// Moves shares above their caps onto clusters that still have headroom,
// proportionally to their current share (evenly if they all hold zero).
void water_fill(std::vector<double>& x, const std::vector<bool>& blocked,
                std::span<const double> caps) {
  const std::size_t m = x.size();
  std::vector<bool> fixed(m, false);
  for (std::size_t pass = 0; pass <= m; ++pass) {
    double excess = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (x[j] > cap_of(caps, j) * (1.0 + kShareTolerance)) {
        excess += x[j] - cap_of(caps, j);
        x[j] = cap_of(caps, j);
        fixed[j] = true;
      }
    }
    if (excess <= kShareTolerance)
      return;
    double weight = 0.0;
    std::size_t free_count = 0;
    for (std::size_t j = 0; j < m; ++j) {
      if (blocked[j] || fixed[j]) continue;
      weight += x[j];
      ++free_count;
    }
    if (free_count == 0 && excess > 1e-9)
      throw NoCapacityError("demand exceeds the combined rating of available clusters");
    if (free_count == 0)
      return;
    for (std::size_t j = 0; j < m; ++j) {
      if (blocked[j] || fixed[j]) continue;
      x[j] += weight > 0.0 ? excess * x[j] / weight : excess / static_cast<double>(free_count);
    }
  }
}

void normalize(std::vector<double>& x) {
  const double s = std::accumulate(x.begin(), x.end(), 0.0);
  for (auto& v : x) v /= s;
}

} // namespace

void PsoParams::validate() const {
  if (!(inertia > 0.0 && inertia < 1.0)) throw std::invalid_argument("pso.inertia must lie in (0, 1)");
  if (particles < 2) throw std::invalid_argument("pso.particles must be >= 2");
  if (max_iterations < 0) throw std::invalid_argument("pso.max_iterations must be >= 0");
  if (!(velocity_min < velocity_max)) throw std::invalid_argument("pso velocity bounds are inverted");
  if (!(cognitive >= 0.0 && social >= 0.0))
    throw std::invalid_argument("pso learning factors must be >= 0");
  if (!(init_perturbation >= 0.0))
    throw std::invalid_argument("pso.init_perturbation must be >= 0");
}

AllocationVector balanced_allocation(const std::vector<bool>& blocked, std::span<const double> caps) {
  const std::size_t free_count =
      static_cast<std::size_t>(std::count(blocked.begin(), blocked.end(), false));
  if (free_count == 0)
    throw NoCapacityError("every cluster is at a blocking SoC bound");
  std::vector<double> x(blocked.size(), 0.0);
  for (std::size_t j = 0; j < x.size(); ++j)
    if (!blocked[j]) x[j] = 1.0 / static_cast<double>(free_count);
  water_fill(x, blocked, caps);
  return {std::move(x)};
}

std::vector<double> share_caps(const Plant& plant, double p_sys_w) {
  std::vector<double> caps(plant.size(), 1.0);
  if (p_sys_w == 0.0)
    return caps;
  for (std::size_t j = 0; j < caps.size(); ++j)
    caps[j] = std::min(1.0, plant.config().clusters[j].rated_power_w / std::abs(p_sys_w));
  return caps;
}

AllocationVector balanced_allocation(const Plant& plant, double p_sys_w) {
  return balanced_allocation(plant.blocked_mask(p_sys_w), share_caps(plant, p_sys_w));
}

AllocationVector repair(std::span<const double> k_raw, const std::vector<bool>& blocked,
                        std::span<const double> caps) {
  std::vector<double> x(k_raw.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    x[j] = blocked[j] ? 0.0 : std::clamp(k_raw[j], 0.0, 1.0);
    sum += x[j];
  }
  if (!(sum > 0.0))
    return balanced_allocation(blocked, caps);
  normalize(x);
  water_fill(x, blocked, caps);
  return {std::move(x)};
}

double fitness(const AllocationVector& k, double p_sys_w, const Plant& plant, double dt) {
  std::vector<ClusterStepResult> detail;
  PlantStepResult res;
  try {
    res = plant.evaluate(p_sys_w, k, dt, &detail);
  } catch (const InfeasibleAllocation&) {
    return kInfeasibleFitness;
  } catch (const InfeasiblePower&) {
    return kInfeasibleFitness;
  } catch (const std::domain_error&) {
    return kInfeasibleFitness;
  }
  const double unserved_wh = std::abs(p_sys_w - res.p_actual_w) * dt / kSecondsPerHour;
  return res.ledger.stored_wh - kUnservedPenalty * unserved_wh;
}

PsoResult pso_allocate(double p_sys_w, const Plant& plant, const PsoParams& params, double dt) {
  params.validate();
  const std::size_t m = plant.size();
  const auto blocked = plant.blocked_mask(p_sys_w);
  const auto caps = share_caps(plant, p_sys_w);
  const AllocationVector balanced = balanced_allocation(blocked, caps);

  PsoResult out;
  out.balanced_fitness = fitness(balanced, p_sys_w, plant, dt);
  out.best = balanced;
  out.best_fitness = out.balanced_fitness;
  out.trace.push_back({0, out.best_fitness, out.best});
  if (m == 1 || p_sys_w == 0.0)
    return out;

  std::mt19937_64 rng(params.rng_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> spread(-params.init_perturbation, params.init_perturbation);
  std::uniform_real_distribution<double> v0(params.velocity_min, params.velocity_max);

  const auto n = static_cast<std::size_t>(params.particles);
  std::vector<std::vector<double>> pos(n), vel(n, std::vector<double>(m, 0.0)), pbest(n);
  std::vector<double> pbest_f(n);

  for (std::size_t i = 0; i < n; ++i) {
    if (i == 0) {
      pos[i] = balanced.k;
    } else {
      std::vector<double> raw(balanced.k);
      for (auto& v : raw) v += spread(rng);
      pos[i] = repair(raw, blocked, caps).k;
    }
    for (std::size_t j = 0; j < m; ++j)
      if (!blocked[j]) vel[i][j] = v0(rng);
    pbest[i] = pos[i];
    pbest_f[i] = i == 0 ? out.balanced_fitness : fitness({pos[i]}, p_sys_w, plant, dt);
  }
  std::size_t g = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (pbest_f[i] > pbest_f[g]) g = i;
  std::vector<double> gbest = pbest[g];
  double gbest_f = pbest_f[g];
  out.trace[0] = {0, gbest_f, {gbest}};

  for (int it = 1; it <= params.max_iterations; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      auto& x = pos[i];
      auto& v = vel[i];
      for (std::size_t j = 0; j < m; ++j) {
        const double r1 = unit(rng);
        const double r2 = unit(rng);
        if (blocked[j]) {
          v[j] = 0.0;
          continue;
        }
        v[j] = params.inertia * v[j] + params.cognitive * r1 * (pbest[i][j] - x[j]) +
               params.social * r2 * (gbest[j] - x[j]);
        v[j] = std::clamp(v[j], params.velocity_min, params.velocity_max);
        x[j] += v[j];
      }
      x = repair(x, blocked, caps).k;
      const double f = fitness({x}, p_sys_w, plant, dt);
      if (f > pbest_f[i]) {
        pbest_f[i] = f;
        pbest[i] = x;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (pbest_f[i] > gbest_f) {
        gbest_f = pbest_f[i];
        gbest = pbest[i];
      }
    }
    out.trace.push_back({it, gbest_f, {gbest}});
  }
  out.best = {gbest};
  out.best_fitness = gbest_f;
  return out;
}

} // namespace bess
