#pragma once

// Einsum contractions, level formats and the loop-order constraints imposed
// by compressed levels.

#include <compare>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace bigsched {

/// A loop index such as `i` or `k2`. Its extent is the bound symbol, the
/// upper-cased name (`I`, `K2`).
struct IndexVar {
  std::string name;

  std::string bound() const;

  auto operator<=>(const IndexVar&) const = default;
};

using IndexSet = std::set<IndexVar>;
using IndexList = std::vector<IndexVar>;

enum class Level { Dense, Compressed };

struct TensorAccess {
  std::string tensor;
  IndexList indices;
  std::vector<Level> levels;
  /// Set on generated temporaries (always dense).
  bool temporary = false;

  std::size_t order() const { return indices.size(); }
  bool is_sparse() const;
  bool has(const IndexVar& idx) const;
  /// Position of `idx` among the modes, or npos.
  std::size_t mode_of(const IndexVar& idx) const;
  std::string str() const;

  bool operator==(const TensorAccess&) const = default;
};

struct ContractionExpr {
  TensorAccess output;
  std::vector<TensorAccess> inputs;
  /// Indices summed away, in first-appearance order over the inputs.
  IndexList contracted;

  /// The single input with a compressed level, if any.
  const TensorAccess* sparse_input() const;
  /// All indices: output modes first, then contracted indices.
  IndexList all_indices() const;
  std::string str() const;

  bool operator==(const ContractionExpr&) const = default;
};

using Formats = std::map<std::string, std::vector<Level>>;

/// Parses `Out(i,j) = In1(i,k) * In2(k,j)`. Tensors absent from `formats`
/// are dense.
ContractionExpr parse_einsum(std::string_view text, const Formats& formats = {});

/// Parses a level pattern over {d,c}, e.g. "ccc" or "dc".
std::vector<Level> parse_level_pattern(std::string_view pattern);

/// Parses one `NAME:pattern` flag value and adds it to `formats`.
void add_format_flag(Formats& formats, std::string_view flag);

std::string level_pattern(const std::vector<Level>& levels);

/// Checks the structural invariants of a contraction. `allow_multiple_sparse`
/// lifts the one-sparse-input restriction (used only by graph validation
/// tests; cost modeling assumes a single sparse input).
void validate_expr(const ContractionExpr& expr, bool allow_multiple_sparse = false);

/// Ordered precedence pairs (before, after).
using Precedence = std::pair<IndexVar, IndexVar>;

/// Precedence edges implied by every access with a compressed level: the
/// full chain of adjacent mode pairs. Throws ValidationError on a cycle.
std::set<Precedence> access_constraints(const ContractionExpr& expr);

/// True when `order` places the modes of every sparse access in `accesses`
/// in mode order (modes missing from `order` are ignored).
bool respects_sparse_order(std::span<const IndexVar> order,
                           std::span<const TensorAccess> accesses);

IndexSet indices_of(const TensorAccess& access);
IndexSet indices_of(std::span<const TensorAccess> accesses);

}  // namespace bigsched
