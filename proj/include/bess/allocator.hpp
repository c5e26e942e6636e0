#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "bess/allocation_vector.hpp"
#include "bess/battery_plant.hpp"

namespace bess {

struct PsoParams {
  double inertia = 0.85;
  double cognitive = 0.4;
  double social = 0.5;
  int particles = 30;
  int max_iterations = 50;
  double velocity_min = -1.0;
  double velocity_max = 1.0;
  double init_perturbation = 0.1; // half-width of the uniform spread around balanced
  std::uint64_t rng_seed = 1;

  void validate() const;
};

class NoCapacityError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kInfeasibleFitness = -std::numeric_limits<double>::infinity();

/// Weight on undelivered AC energy when a cluster hits a SoC bound mid-step.
inline constexpr double kUnservedPenalty = 2.0;

/// Equal shares over unblocked clusters, respecting per-cluster limits.
AllocationVector balanced_allocation(const std::vector<bool>& blocked,
                                     std::span<const double> caps = {});
AllocationVector balanced_allocation(const Plant& plant, double p_sys_w);

/// Per-cluster share limits rated_j / |p_sys|.
std::vector<double> share_caps(const Plant& plant, double p_sys_w);

/// Clamp to [0, 1], zero blocked entries, renormalize, then shift any share
/// above its cap onto the remaining clusters. Falls back to balanced when
/// nothing positive survives the clamp.
AllocationVector repair(std::span<const double> k_raw, const std::vector<bool>& blocked,
                        std::span<const double> caps = {});

/// Net battery energy change (Wh) of one step under allocation k; larger is
/// better in both directions. Returns kInfeasibleFitness for allocations
/// that violate range, rating or SoC-bound constraints.
double fitness(const AllocationVector& k, double p_sys_w, const Plant& plant, double dt);

struct PsoIteration {
  int iteration = 0;
  double best_fitness = 0.0;
  AllocationVector best;
};

struct PsoResult {
  AllocationVector best;
  double best_fitness = kInfeasibleFitness;
  double balanced_fitness = kInfeasibleFitness;
  std::vector<PsoIteration> trace; // entry 0 is the initial swarm
};

PsoResult pso_allocate(double p_sys_w, const Plant& plant, const PsoParams& params, double dt);

} // namespace bess
