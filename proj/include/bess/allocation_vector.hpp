#pragma once

#include <cstddef>
#include <vector>

namespace bess {

/// Per-cluster shares of the instantaneous system power.
struct AllocationVector {
  std::vector<double> k;

  std::size_t size() const { return k.size(); }
  double operator[](std::size_t j) const { return k[j]; }
  bool operator==(const AllocationVector&) const = default;
};

} // namespace bess
