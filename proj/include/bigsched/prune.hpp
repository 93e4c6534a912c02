#pragma once

// The pruning pipeline: memory-depth filter, loop/memory depth poset,
// SMT dominance (smt.hpp), the concrete LLC-budget selection and the cache
// access model that picks the final schedule.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bigsched/cost.hpp"
#include "bigsched/enumerate.hpp"
#include "bigsched/igraph.hpp"
#include "bigsched/sympoly.hpp"

namespace bigsched {

struct ConstraintSet;
struct SolverConfig;

struct TieBreak {
  /// Lowest id when false, a seeded pick otherwise.
  bool random = false;
  std::uint64_t seed = 0;
};

/// `hash` or `random:SEED`.
TieBreak parse_tie_break(const std::string& text);
std::string tie_break_str(const TieBreak& t);

struct PipelineConfig {
  int mem_depth_threshold = 2;
  std::int64_t llc_bytes = 0;
  double llc_fraction = 0.5;
  bool skip_stage2 = false;
  bool skip_stage3 = false;
  TieBreak tie_break;

  /// Throws UsageError on out-of-range fields.
  void check() const;
};

struct Candidate {
  Schedule schedule;
  CostProfile cost;
};

Candidate make_candidate(Schedule s);

/// Schedules sharing one (time, memory) polynomial pair.
struct Bucket {
  SymPoly time;
  SymPoly mem;
  std::vector<Candidate> members;
};

/// Buckets ordered by (time, memory); members keep input order.
std::vector<Bucket> bucketize(std::vector<Candidate> candidates);
std::size_t count_members(const std::vector<Bucket>& buckets);

std::vector<Bucket> stage1_memory_depth(const std::vector<Candidate>& candidates, int threshold);

/// s = (ls, ms) is removed by c = (lc, mc): deeper or equal on both, strictly
/// deeper on one.
bool depth_dominated(int ls, int ms, int lc, int mc);
std::vector<Bucket> stage2_depth_poset(const std::vector<Bucket>& buckets);

struct Stage4Result {
  std::vector<Candidate> selected;
  double min_time = 0;
  /// No schedule fit the budget; the minimum was taken over all of them.
  bool fallback = false;
};

Stage4Result stage4_concrete(const std::vector<Bucket>& buckets, const Binding& b,
                             const PipelineConfig& cfg);

/// Sum over leaves of the access strides along the leaf's innermost loop.
double cache_cost(const Big& graph, const Binding& b);
/// Mode pairs, over every access of every leaf, whose loops run in the
/// opposite order to the modes.
int order_inversions(const Big& graph);

const Candidate& stage5_cache(const std::vector<Candidate>& candidates, const Binding& b,
                              const TieBreak& tie);

struct StageCount {
  std::string stage;
  std::size_t schedules = 0;
  std::size_t buckets = 0;
};

struct Removal {
  std::string time;
  std::string mem;
  std::string dominator_time;
  std::string dominator_mem;
};

struct Report {
  std::string expr;
  std::vector<StageCount> counts;
  /// Surviving buckets after the compile-time stages.
  std::vector<Bucket> frontier;
  std::vector<Removal> smt_removals;
  std::size_t smt_unknown = 0;
  std::vector<std::string> warnings;

  /// Run-time outcome, present when a binding was supplied.
  std::optional<Candidate> chosen;
  double chosen_time = 0;
  std::int64_t chosen_aux_bytes = 0;
  double chosen_cache_cost = 0;
  std::size_t stage4_survivors = 0;
  bool stage4_fallback = false;
};

/// Enumerate, then stages 1 to 3, then 4 and 5 when `binding` is given. A
/// missing solver turns stage 3 off with a warning.
Report run_pipeline(const ContractionExpr& expr, const GenConfig& gen, const PipelineConfig& cfg,
                    const ConstraintSet& constraints, const SolverConfig& solver,
                    const std::optional<Binding>& binding);

/// Stages 4 and 5 over an existing frontier.
void select_runtime(Report& report, const Binding& binding, const PipelineConfig& cfg);

}  // namespace bigsched
