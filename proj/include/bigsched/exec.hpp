#pragma once

// Ground truth: dense reference contraction, a schedule interpreter that walks
// the sparse input by its compressed fibers and counts innermost iterations,
// and measured prefix counts.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "bigsched/igraph.hpp"
#include "bigsched/sympoly.hpp"

namespace bigsched {

using Coord = std::vector<std::int64_t>;

struct DenseTensor {
  std::vector<std::int64_t> dims;
  std::vector<double> data;

  static DenseTensor zeros(std::vector<std::int64_t> dims);
  std::int64_t size() const;
  double& at(const Coord& c);
  double at(const Coord& c) const;
};

/// All levels compressed: level l has `pos[l]` (segment starts, one more than
/// the nodes of level l-1) and `crd[l]` (sorted coordinates).
struct SparseCsf {
  std::vector<std::int64_t> dims;
  std::vector<std::vector<std::int64_t>> pos;
  std::vector<std::vector<std::int64_t>> crd;
  std::vector<double> vals;

  /// Sorts the entries and sums duplicates.
  static SparseCsf from_entries(std::vector<std::int64_t> dims,
                                std::vector<std::pair<Coord, double>> entries);
  /// Stores the nonzero entries of `dense`.
  static SparseCsf from_dense(const DenseTensor& dense);
  std::size_t order() const { return dims.size(); }
  std::size_t nnz() const { return vals.size(); }
  DenseTensor to_dense() const;
  std::vector<std::pair<Coord, double>> entries() const;
};

/// Distinct nonempty coordinate prefixes of length d.
std::int64_t measured_nnz_prefix(const SparseCsf& t, int d);

struct TensorSet {
  std::map<std::string, DenseTensor> dense;
  std::map<std::string, SparseCsf> sparse;

  /// Every tensor in dense form.
  std::map<std::string, DenseTensor> densified() const;
};

struct ExecStats {
  /// Innermost-body executions per leaf, leaves in pre-order.
  std::vector<std::int64_t> leaf_trip_counts;
  std::int64_t total = 0;
};

/// Extent of every bound symbol, read off the tensor shapes.
std::map<std::string, std::int64_t> infer_extents(const ContractionExpr& expr,
                                                  const TensorSet& tensors);

DenseTensor reference_contract(const ContractionExpr& expr,
                               const std::map<std::string, DenseTensor>& tensors);

/// Runs the schedule. Sparse inputs must be supplied in `tensors.sparse`.
std::pair<DenseTensor, ExecStats> interpret(const Big& graph, const ContractionExpr& expr,
                                            const TensorSet& tensors);

/// Bounds from the shapes and every prefix count measured on the sparse input.
Binding measured_binding(const ContractionExpr& expr, const TensorSet& tensors);

/// Deterministic random inputs: dense inputs fully populated, sparse inputs
/// keep each coordinate with probability `sparsity`. Values lie in [-1, 1).
TensorSet random_tensors(const ContractionExpr& expr,
                         const std::map<std::string, std::int64_t>& extents, double sparsity,
                         std::uint64_t seed);

/// max |a - b| <= rel * max |b| elementwise over equal shapes.
bool allclose(const DenseTensor& a, const DenseTensor& b, double rel = 1e-10);

/// Coordinate text format: `dims d1 d2 ...` then one `c1 c2 ... value` line
/// per entry; `#` starts a comment.
std::pair<std::vector<std::int64_t>, std::vector<std::pair<Coord, double>>> read_coordinate_text(
    std::istream& in);
void write_coordinate_text(std::ostream& out, const std::vector<std::int64_t>& dims,
                           const std::vector<std::pair<Coord, double>>& entries);

}  // namespace bigsched
