#pragma once

// Linear and branched iteration graphs. A Big is an immutable loop tree: a
// leaf is a Lig (a chain of loops around one `lhs += factors` body); an inner
// node fuses a loop prefix over a producer subtree that fills a temporary and
// a consumer subtree that reads it.

#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "bigsched/expr.hpp"

namespace bigsched {

/// `lhs += factors[0] * factors[1] * ...`. Accesses keep every mode index,
/// including those bound by enclosing fused loops.
struct Body {
  TensorAccess lhs;
  std::vector<TensorAccess> factors;

  IndexSet indices() const;
  bool operator==(const Body&) const = default;
};

struct Lig {
  /// Loops of this section only; indices fixed by enclosing loops are absent.
  IndexList order;
  Body body;

  bool operator==(const Lig&) const = default;
};

struct TempTensor {
  std::string name;
  IndexList indices;

  std::size_t arity() const { return indices.size(); }
  TensorAccess access() const;
  std::string str() const;
  bool operator==(const TempTensor&) const = default;
};

struct BigNode;

class Big {
 public:
  Big(Lig lig);
  Big(BigNode node);

  bool is_lig() const { return std::holds_alternative<Lig>(v_); }
  const Lig& lig() const { return std::get<Lig>(v_); }
  const BigNode& node() const { return *std::get<std::shared_ptr<const BigNode>>(v_); }

  bool operator==(const Big& other) const;

 private:
  std::variant<Lig, std::shared_ptr<const BigNode>> v_;
};

struct BigNode {
  IndexList fused;
  Big producer;
  Big consumer;
  TempTensor temp;
};

using Path = std::vector<int>;

/// The unsplit schedule of `expr` with the given loop order.
Lig make_lig(const ContractionExpr& expr, IndexList order);

/// Indices(producer) ∩ (Indices(consumer) ∪ Indices(output)), ordered by first
/// appearance in `order` (or in the producer accesses when `order` is empty).
IndexList temp_indices(std::span<const TensorAccess> producer,
                       std::span<const TensorAccess> consumer, const TensorAccess& output,
                       std::span<const IndexVar> order = {});

/// Splits the Lig at `path` after `loc` factors. pol=true makes the first
/// `loc` factors the producer, pol=false the last `loc`. The temporary takes
/// the producer's place in the consumer and the maximal common prefix of the
/// two derived orders is fused. `temp_name` defaults to the next free `tN`.
Big loopfuse(const Big& graph, const Path& path, int loc, bool pol, std::string temp_name = "");

/// Replaces the loop order of the Lig at `path`.
Big reorder(const Big& graph, const Path& path, const IndexList& order);

/// Collapses every branch back into one loop chain over the original
/// contraction.
Lig linearize(const Big& graph);

/// Empty iff the graph is well formed and respects every sparse access chain
/// on every root-to-leaf path.
std::vector<std::string> validate_big(const Big& graph);

/// Subtree at `path`; throws ValidationError when the path leaves the tree.
const Big& subtree(const Big& graph, const Path& path);

struct LeafPath {
  const Lig* leaf = nullptr;
  /// Enclosing fused loops followed by the leaf's own order.
  IndexList path;
  /// Per loop on `path`: iterates stored coordinates of the sparse tensor.
  std::vector<bool> sparse;
  /// Number of sparse loops on the path (they are the sparse tensor's
  /// leading modes).
  int sparse_depth = 0;
};

/// Leaves in pre-order (producer before consumer). A loop over mode d of
/// `sparse` is a sparse loop iff its subtree holds a leaf reading `sparse`
/// and modes 1..d-1 are enclosing loops.
std::vector<LeafPath> leaf_paths(const Big& graph, const TensorAccess* sparse);

/// First access with a compressed level found in any leaf.
const TensorAccess* find_sparse_access(const Big& graph);

/// Temporaries in pre-order (node, then producer, then consumer).
std::vector<TempTensor> temps_of(const Big& graph);
int loop_depth(const Big& graph);
int mem_depth(const Big& graph);
/// Every loop index in the subtree.
IndexSet loops_of(const Big& graph);
/// Name of the tensor the subtree ultimately writes.
std::string result_tensor(const Big& graph);

/// Renames temporaries t1, t2, ... in pre-order, skipping `reserved` names.
Big canonicalize_temps(const Big& graph, const std::set<std::string>& reserved);

/// Shape, per-node orders, fused prefixes, temp index sets and body factor
/// multisets; equal keys mean the same schedule.
std::string structural_key(const Big& graph);
/// 16 hex digits of the FNV-1a hash of the structural key.
std::string schedule_id(const Big& graph);

/// One-line form: `[l,m] { [i,j,k] t1(k) += B(i,j,k)*C(i,_)*D(j,_) ; ... }`,
/// indices bound by enclosing loops shown as `_`.
std::string pretty(const Big& graph);
/// Nested `forall`/`where` IR with full accesses.
std::string to_ir(const Big& graph);

struct Schedule {
  std::string id;
  Big graph;
  std::shared_ptr<const ContractionExpr> expr;
};

Schedule make_schedule(Big graph, std::shared_ptr<const ContractionExpr> expr);

}  // namespace bigsched
