#pragma once

// Multivariate sum-of-products polynomials over loop bounds, sparse prefix
// counts and sparsities; the currency of all cost reasoning.

#include <compare>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace bigsched {

struct Symbol {
  enum class Kind { Bound, PrefixNnz, Sparsity };

  Kind kind = Kind::Bound;
  /// Bound symbol (`I`) or tensor name (`B`).
  std::string name;
  /// Level depth for PrefixNnz, 0 otherwise.
  int depth = 0;

  static Symbol bound(std::string name) { return {Kind::Bound, std::move(name), 0}; }
  static Symbol prefix_nnz(std::string tensor, int depth) {
    return {Kind::PrefixNnz, std::move(tensor), depth};
  }
  static Symbol sparsity(std::string tensor) { return {Kind::Sparsity, std::move(tensor), 0}; }

  /// `I`, `nnz(B,2)` or `s(B)`.
  std::string str() const;

  auto operator<=>(const Symbol&) const = default;
};

/// Sorted multiset of symbols.
using Monomial = std::vector<Symbol>;

class SymPoly {
 public:
  SymPoly() = default;

  static SymPoly constant(std::int64_t c);
  static SymPoly of(const Symbol& s);
  /// Product of the given symbols (coefficient 1); the empty product is 1.
  static SymPoly product(const std::vector<Symbol>& symbols);

  const std::map<Monomial, std::int64_t>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  /// Constant term (0 when absent).
  std::int64_t constant_term() const;
  std::vector<Symbol> symbols() const;

  SymPoly& operator+=(const SymPoly& other);
  SymPoly& operator-=(const SymPoly& other);
  SymPoly& operator*=(const SymPoly& other);
  friend SymPoly operator+(SymPoly a, const SymPoly& b) { return a += b; }
  friend SymPoly operator-(SymPoly a, const SymPoly& b) { return a -= b; }
  friend SymPoly operator*(SymPoly a, const SymPoly& b) { return a *= b; }

  bool operator==(const SymPoly&) const = default;
  auto operator<=>(const SymPoly& other) const { return terms_ <=> other.terms_; }

  /// Canonical text, e.g. `2*I*J*nnz(B,2) + K`; zero prints as `0`.
  std::string str() const;

 private:
  void add_term(const Monomial& m, std::int64_t c);

  std::map<Monomial, std::int64_t> terms_;
};

/// Parses the canonical text form (integer coefficients, `+`/`-`, `*`).
SymPoly parse_poly(std::string_view text);

struct Relation {
  enum class Op { Eq, Le, Lt, Ge, Gt };

  SymPoly lhs;
  Op op = Op::Eq;
  SymPoly rhs;

  std::string str() const;
  bool holds(double lhs_value, double rhs_value, double tol = 1e-9) const;

  bool operator==(const Relation&) const = default;
};

/// Parses `J = 2*I`, `nnz(B,1) <= I`, ...
Relation parse_relation(std::string_view text);

/// Concrete values for the symbols of a cost polynomial.
struct Binding {
  /// Extent per bound symbol (`I` -> 1800).
  std::map<std::string, double> bounds;
  /// Sparsity per sparse tensor, in (0, 1].
  std::map<std::string, double> sparsity;
  /// Measured prefix counts keyed by symbol text (`nnz(B,2)`); these take
  /// precedence over the uniform-sparsity estimate.
  std::map<std::string, double> nnz;
  /// Bound symbols of each sparse tensor's modes, needed by the estimate.
  std::map<std::string, std::vector<std::string>> tensor_dims;
  int elem_bytes = 4;

  double bound(const std::string& symbol) const;
  /// Measured value if present, else P_d * (1 - (1 - s)^R_d) where P_d is the
  /// product of the first d extents and R_d the product of the rest.
  double prefix_nnz(const std::string& tensor, int depth) const;
  double value(const Symbol& s) const;
};

double evaluate(const SymPoly& p, const Binding& b);

}  // namespace bigsched
