#pragma once

// Symbolic dominance between (time, memory) polynomial pairs, decided by an
// external SMT-LIB2 solver over real-valued bounds, sparsities and prefix
// counts.

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "bigsched/expr.hpp"
#include "bigsched/prune.hpp"
#include "bigsched/sympoly.hpp"

namespace bigsched {

struct Range {
  Symbol symbol;
  double lo = 0;
  double hi = 0;
};

struct ConstraintSet {
  std::vector<Range> ranges;
  std::vector<Relation> inferred;
  std::vector<Relation> user;
  /// Every symbol the expression can mention: bounds, s(t), nnz(t,d).
  std::vector<Symbol> vocabulary;
  /// Mode bound symbols of each sparse tensor.
  std::map<std::string, std::vector<std::string>> tensor_dims;
};

/// Bounds >= 1; for the sparse tensor t of order k: 0 <= nnz(t,d) <= D1..Dd,
/// nnz(t,d) <= nnz(t,d+1) <= nnz(t,d)*D(d+1), nnz(t,k) = s(t)*D1..Dk and
/// 0 < s(t) <= 1.
std::vector<Relation> infer_constraints(const ContractionExpr& expr);
std::vector<Symbol> vocabulary(const ContractionExpr& expr);

/// Inferred constraints plus the given ranges and user relations. Throws
/// ValidationError on lo > hi.
ConstraintSet make_constraints(const ContractionExpr& expr, std::vector<Range> ranges = {},
                               std::vector<Relation> user = {});

enum class Query { Q1, Q2 };

/// Q1: s worse somewhere, (Ts>Tc & Ns>=Nc) | (Ts>=Tc & Ns>Nc).
/// Q2: s better somewhere, (Ts<=Tc & Ns<Nc) | (Ts<Tc & Ns<=Nc).
std::string emit_smtlib(Query q, const ConstraintSet& cs, const SymPoly& ts, const SymPoly& ns,
                        const SymPoly& tc, const SymPoly& nc,
                        std::optional<std::int64_t> timeout_ms = std::nullopt);

/// SMT-LIB2 term for a polynomial.
std::string smt_term(const SymPoly& p);
/// Quoted symbol, e.g. `|nnz(B,3)|`.
std::string smt_symbol(const Symbol& s);

struct SolverConfig {
  std::string path = "z3";
  /// Per query, wall clock; the solver also gets it as `:timeout`.
  double timeout_s = 10.0;
  /// Worker threads for stage 3; 0 picks the hardware concurrency.
  unsigned jobs = 0;
  /// Settle a pair without the solver when a sampled feasible binding already
  /// shows s strictly better (Q2 sat).
  bool presolve = true;
};

/// Resolves a bare name through PATH; empty when not executable.
std::string resolve_solver(const std::string& path);
/// `$BIGSCHED_SOLVER`, else `z3`.
std::string default_solver_path();

enum class SatResult { Sat, Unsat, Unknown };

struct SolverReply {
  SatResult result = SatResult::Unknown;
  std::string diagnostic;
};

/// Runs one script; a timeout or crash yields Unknown with a diagnostic.
/// Throws SolverError when the executable cannot be started.
SolverReply run_solver(const SolverConfig& cfg, const std::string& script);

enum class Verdict { Dominated, NotDominated, Unknown };

std::string verdict_str(Verdict v);

struct DominanceResult {
  Verdict verdict = Verdict::Unknown;
  SatResult q1 = SatResult::Unknown;
  SatResult q2 = SatResult::Unknown;
  bool presolved = false;
  std::string diagnostic;
};

/// Does c dominate s? Dominated iff Q1 sat and Q2 unsat.
DominanceResult check_dominates(const SymPoly& ts, const SymPoly& ns, const SymPoly& tc,
                                const SymPoly& nc, const ConstraintSet& cs,
                                const SolverConfig& solver);
DominanceResult check_dominates(const Candidate& s, const Candidate& c, const ConstraintSet& cs,
                                const SolverConfig& solver);

struct Stage3Result {
  std::vector<Bucket> kept;
  std::vector<Removal> removals;
  std::size_t unknown = 0;
  std::vector<std::string> diagnostics;
};

/// Removes every bucket whose representative is dominated by another
/// bucket's representative; all comparisons run against the input set.
Stage3Result stage3_prune(const std::vector<Bucket>& buckets, const ConstraintSet& cs,
                          const SolverConfig& solver);

/// A binding drawn from the region described by `cs`: ranged symbols
/// uniformly, unranged bounds from [1, 256], unranged sparsity from (0, 1],
/// prefix counts between their inferred limits. Rejection-samples the user
/// relations; nullopt after `attempts` failures.
std::optional<Binding> sample_binding(const ConstraintSet& cs, std::mt19937_64& rng,
                                      int attempts = 1000);
/// Every range, inferred and user relation holds under `b`.
bool satisfies(const ConstraintSet& cs, const Binding& b, double tol = 1e-9);

}  // namespace bigsched
