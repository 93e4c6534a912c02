#pragma once

// Checks one schedule against the dense reference on concrete tensors.

#include <cstdint>
#include <string>

#include "bigsched/exec.hpp"
#include "bigsched/igraph.hpp"

namespace bigsched {

struct CheckResult {
  std::string id;
  /// Interpreter output matches the reference.
  bool values_ok = false;
  /// Measured innermost trips equal the time polynomial under measured
  /// prefix counts.
  bool trips_ok = false;
  /// The linearized schedule computes the same output.
  bool linear_ok = false;
  std::int64_t trips = 0;
  double predicted = 0;

  bool ok() const { return values_ok && trips_ok && linear_ok; }
};

CheckResult check_schedule(const Schedule& s, const TensorSet& tensors, const DenseTensor& reference,
                           double rel = 1e-10);

}  // namespace bigsched
