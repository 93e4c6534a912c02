#pragma once

// Symbolic iteration-time and auxiliary-memory polynomials of a schedule.

#include <cstdint>
#include <utility>
#include <vector>

#include "bigsched/igraph.hpp"
#include "bigsched/sympoly.hpp"

namespace bigsched {

struct CostProfile {
  SymPoly time;
  SymPoly mem;
  int loop_depth = 0;
  int mem_depth = 0;
  std::vector<TempTensor> temps;
};

/// Sum over leaves of the loop trip counts on the leaf's path. The sparse
/// loops of a path (the sparse tensor's leading d modes) contribute one
/// nnz(B,d); every other loop contributes its bound.
SymPoly time_complexity(const Big& graph);
/// Sum over temporaries of the product of their bounds; a scalar counts 1.
SymPoly memory_complexity(const Big& graph);
/// (loop depth, memory depth).
std::pair<int, int> depths(const Big& graph);
CostProfile profile(const Big& graph);

/// Records the mode extents of every sparse input so prefix counts can be
/// estimated from sparsity.
void attach_dims(Binding& binding, const ContractionExpr& expr);

/// Auxiliary memory in bytes: non-scalar temporaries by their bounds, each
/// scalar as one element.
std::int64_t aux_bytes(const Big& graph, const Binding& binding);

}  // namespace bigsched
