#pragma once

// Exhaustive schedule generation: every constraint-respecting loop order,
// every producer/consumer split (recursively), unfused and maximally fused.

#include <cstddef>
#include <optional>
#include <vector>

#include "bigsched/error.hpp"
#include "bigsched/igraph.hpp"

namespace bigsched {

struct GenConfig {
  int max_memory_depth = 2;
  /// Allow splits that give a consumer a second temporary (T1 = B*C feeding
  /// A = T1*T2 alongside T2 = D*E).
  bool enable_split_mode_b = true;
  bool dedup = true;
  std::optional<std::size_t> cap;
};

/// Raised when generation exceeds GenConfig::cap.
class CapExceeded : public ValidationError {
 public:
  explicit CapExceeded(std::size_t partial)
      : ValidationError("schedule cap exceeded after " + std::to_string(partial) + " schedules"),
        partial_(partial) {}
  std::size_t partial() const { return partial_; }

 private:
  std::size_t partial_;
};

/// All unsplit schedules: one per linear extension of the access constraints.
std::vector<Lig> gen_ligs(const ContractionExpr& expr);

/// The full schedule space, temporaries named t1, t2, ... in pre-order,
/// sorted by id.
std::vector<Schedule> gen_schedules(const ContractionExpr& expr, const GenConfig& cfg = {});

/// Drops structural duplicates; first occurrence wins.
std::vector<Schedule> dedup(std::vector<Schedule> schedules);

/// n! * 2^n * (m!)^(2^n) * (m+1) for n inputs and m indices, as log10.
double finiteness_bound_log10(std::size_t n_inputs, std::size_t n_indices);

}  // namespace bigsched
