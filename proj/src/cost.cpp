#include "bigsched/cost.hpp"

#include <cmath>

namespace bigsched {

SymPoly time_complexity(const Big& graph) {
  const TensorAccess* sp = find_sparse_access(graph);
  SymPoly total;
  for (const auto& leaf : leaf_paths(graph, sp)) {
    std::vector<Symbol> trip;
    for (std::size_t p = 0; p < leaf.path.size(); ++p)
      if (!leaf.sparse[p]) trip.push_back(Symbol::bound(leaf.path[p].bound()));
    if (leaf.sparse_depth > 0) trip.push_back(Symbol::prefix_nnz(sp->tensor, leaf.sparse_depth));
    total += SymPoly::product(trip);
  }
  return total;
}

SymPoly memory_complexity(const Big& graph) {
  SymPoly total;
  for (const auto& t : temps_of(graph)) {
    std::vector<Symbol> dims;
    for (const auto& idx : t.indices) dims.push_back(Symbol::bound(idx.bound()));
    total += SymPoly::product(dims);
  }
  return total;
}

std::pair<int, int> depths(const Big& graph) { return {loop_depth(graph), mem_depth(graph)}; }

CostProfile profile(const Big& graph) {
  return CostProfile{time_complexity(graph), memory_complexity(graph), loop_depth(graph),
                     mem_depth(graph), temps_of(graph)};
}

void attach_dims(Binding& binding, const ContractionExpr& expr) {
  for (const auto& in : expr.inputs) {
    if (!in.is_sparse()) continue;
    std::vector<std::string> dims;
    for (const auto& idx : in.indices) dims.push_back(idx.bound());
    binding.tensor_dims[in.tensor] = dims;
  }
}

std::int64_t aux_bytes(const Big& graph, const Binding& binding) {
  SymPoly mem = memory_complexity(graph);
  std::int64_t scalars = mem.constant_term();
  mem -= SymPoly::constant(scalars);
  double elems = evaluate(mem, binding);
  return static_cast<std::int64_t>(std::llround(elems)) * binding.elem_bytes +
         static_cast<std::int64_t>(binding.elem_bytes) * scalars;
}

}  // namespace bigsched
