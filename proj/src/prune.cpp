#include "bigsched/prune.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "bigsched/error.hpp"
#include "bigsched/smt.hpp"

namespace bigsched {

TieBreak parse_tie_break(const std::string& text) {
  if (text == "hash") return {};
  const std::string prefix = "random:";
  if (text.rfind(prefix, 0) == 0) {
    std::string num = text.substr(prefix.size());
    if (!num.empty() && std::ranges::all_of(num, [](char c) { return c >= '0' && c <= '9'; }))
      return {true, std::stoull(num)};
  }
  throw UsageError("tie break must be 'hash' or 'random:SEED', got '" + text + "'");
}

std::string tie_break_str(const TieBreak& t) {
  return t.random ? "random:" + std::to_string(t.seed) : "hash";
}

void PipelineConfig::check() const {
  if (mem_depth_threshold < 0) throw UsageError("memory depth threshold must be >= 0");
  if (!(llc_fraction > 0 && llc_fraction <= 1)) throw UsageError("llc fraction must lie in (0, 1]");
  if (llc_bytes < 0) throw UsageError("llc bytes must be positive");
}

Candidate make_candidate(Schedule s) {
  CostProfile cost = profile(s.graph);
  return {std::move(s), std::move(cost)};
}

std::vector<Bucket> bucketize(std::vector<Candidate> candidates) {
  std::map<std::pair<SymPoly, SymPoly>, std::vector<Candidate>> groups;
  for (auto& c : candidates) {
    auto key = std::pair{c.cost.time, c.cost.mem};
    groups[key].push_back(std::move(c));
  }
  std::vector<Bucket> out;
  for (auto& [key, members] : groups) out.push_back({key.first, key.second, std::move(members)});
  return out;
}

std::size_t count_members(const std::vector<Bucket>& buckets) {
  std::size_t n = 0;
  for (const auto& b : buckets) n += b.members.size();
  return n;
}

std::vector<Bucket> stage1_memory_depth(const std::vector<Candidate>& candidates, int threshold) {
  std::vector<Candidate> kept;
  for (const auto& c : candidates)
    if (c.cost.mem_depth <= threshold) kept.push_back(c);
  return bucketize(std::move(kept));
}

bool depth_dominated(int ls, int ms, int lc, int mc) {
  return (ls > lc && ms >= mc) || (ls >= lc && ms > mc);
}

std::vector<Bucket> stage2_depth_poset(const std::vector<Bucket>& buckets) {
  std::set<std::pair<int, int>> pairs;
  for (const auto& b : buckets)
    for (const auto& c : b.members) pairs.insert({c.cost.loop_depth, c.cost.mem_depth});
  auto dominated = [&](int l, int m) {
    return std::ranges::any_of(pairs, [&](const auto& p) { return depth_dominated(l, m, p.first, p.second); });
  };
  std::vector<Bucket> out;
  for (const auto& b : buckets) {
    Bucket kept{b.time, b.mem, {}};
    for (const auto& c : b.members)
      if (!dominated(c.cost.loop_depth, c.cost.mem_depth)) kept.members.push_back(c);
    if (!kept.members.empty()) out.push_back(std::move(kept));
  }
  return out;
}

namespace {

bool near(double a, double b) {
  return std::fabs(a - b) <= 1e-12 * std::max({1.0, std::fabs(a), std::fabs(b)});
}

}  // namespace

Stage4Result stage4_concrete(const std::vector<Bucket>& buckets, const Binding& b,
                             const PipelineConfig& cfg) {
  cfg.check();
  if (cfg.llc_bytes <= 0) throw UsageError("llc bytes are required for the run-time stages");
  const double budget = cfg.llc_fraction * static_cast<double>(cfg.llc_bytes);

  struct Scored {
    const Bucket* bucket;
    double time;
    bool fits;
  };
  std::vector<Scored> scored;
  for (const auto& bucket : buckets) {
    if (bucket.members.empty()) continue;
    double t = evaluate(bucket.time, b);
    double bytes = static_cast<double>(aux_bytes(bucket.members.front().schedule.graph, b));
    scored.push_back({&bucket, t, bytes <= budget});
  }

  Stage4Result out;
  out.fallback = std::ranges::none_of(scored, &Scored::fits);
  std::optional<double> best;
  for (const auto& s : scored)
    if (out.fallback || s.fits) best = best ? std::min(*best, s.time) : s.time;
  if (!best) return out;
  out.min_time = *best;
  for (const auto& s : scored)
    if ((out.fallback || s.fits) && near(s.time, *best))
      for (const auto& m : s.bucket->members) out.selected.push_back(m);
  std::ranges::stable_sort(out.selected, {}, [](const Candidate& c) { return c.schedule.id; });
  return out;
}

double cache_cost(const Big& graph, const Binding& b) {
  double total = 0;
  for (const auto& leaf : leaf_paths(graph, find_sparse_access(graph))) {
    if (leaf.path.empty()) continue;
    const IndexVar& inner = leaf.path.back();
    std::vector<const TensorAccess*> accesses{&leaf.leaf->body.lhs};
    for (const auto& f : leaf.leaf->body.factors) accesses.push_back(&f);
    for (const auto* a : accesses) {
      std::size_t mode = a->mode_of(inner);
      if (mode == std::string::npos || mode + 1 == a->order()) continue;
      double stride = 1;
      for (std::size_t m = mode + 1; m < a->order(); ++m) stride *= b.bound(a->indices[m].bound());
      total += stride;
    }
  }
  return total;
}

int order_inversions(const Big& graph) {
  int total = 0;
  for (const auto& leaf : leaf_paths(graph, find_sparse_access(graph))) {
    std::map<IndexVar, std::size_t> pos;
    for (std::size_t p = 0; p < leaf.path.size(); ++p) pos[leaf.path[p]] = p;
    std::vector<const TensorAccess*> accesses{&leaf.leaf->body.lhs};
    for (const auto& f : leaf.leaf->body.factors) accesses.push_back(&f);
    for (const auto* a : accesses)
      for (std::size_t x = 0; x < a->order(); ++x)
        for (std::size_t y = x + 1; y < a->order(); ++y) {
          auto px = pos.find(a->indices[x]), py = pos.find(a->indices[y]);
          if (px != pos.end() && py != pos.end() && px->second > py->second) ++total;
        }
  }
  return total;
}

const Candidate& stage5_cache(const std::vector<Candidate>& candidates, const Binding& b,
                              const TieBreak& tie) {
  if (candidates.empty()) throw ValidationError("cache stage needs at least one schedule");
  std::vector<double> cost;
  for (const auto& c : candidates) cost.push_back(cache_cost(c.schedule.graph, b));
  double best_cost = *std::ranges::min_element(cost);

  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    if (near(cost[i], best_cost)) pool.push_back(i);

  std::vector<int> inv(candidates.size(), 0);
  for (auto i : pool) inv[i] = order_inversions(candidates[i].schedule.graph);
  int best_inv = inv[*std::ranges::min_element(pool, {}, [&](auto i) { return inv[i]; })];
  std::erase_if(pool, [&](auto i) { return inv[i] != best_inv; });

  std::ranges::sort(pool, {}, [&](auto i) { return candidates[i].schedule.id; });
  if (!tie.random) return candidates[pool.front()];
  std::mt19937_64 rng(tie.seed);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  return candidates[pool[pick(rng)]];
}

void select_runtime(Report& report, const Binding& binding, const PipelineConfig& cfg) {
  Binding b = binding;
  if (b.tensor_dims.empty())
    for (const auto& bucket : report.frontier)
      if (!bucket.members.empty()) {
        attach_dims(b, *bucket.members.front().schedule.expr);
        break;
      }

  Stage4Result s4 = stage4_concrete(report.frontier, b, cfg);
  report.stage4_survivors = s4.selected.size();
  report.stage4_fallback = s4.fallback;
  report.counts.push_back({"stage4", s4.selected.size(), bucketize(s4.selected).size()});
  if (s4.fallback)
    report.warnings.push_back("no schedule fits the memory budget; minimum time taken over all");
  if (s4.selected.empty()) return;

  const Candidate& best = stage5_cache(s4.selected, b, cfg.tie_break);
  report.counts.push_back({"stage5", 1, 1});
  report.chosen = best;
  report.chosen_time = evaluate(best.cost.time, b);
  report.chosen_aux_bytes = aux_bytes(best.schedule.graph, b);
  report.chosen_cache_cost = cache_cost(best.schedule.graph, b);
}

Report run_pipeline(const ContractionExpr& expr, const GenConfig& gen, const PipelineConfig& cfg,
                    const ConstraintSet& constraints, const SolverConfig& solver,
                    const std::optional<Binding>& binding) {
  cfg.check();
  Report report;
  report.expr = expr.str();

  std::vector<Candidate> all;
  for (auto& s : gen_schedules(expr, gen)) all.push_back(make_candidate(std::move(s)));
  report.counts.push_back({"enumerate", all.size(), bucketize(all).size()});

  std::vector<Bucket> buckets = stage1_memory_depth(all, cfg.mem_depth_threshold);
  report.counts.push_back({"stage1", count_members(buckets), buckets.size()});

  if (!cfg.skip_stage2) {
    buckets = stage2_depth_poset(buckets);
    report.counts.push_back({"stage2", count_members(buckets), buckets.size()});
  }

  if (!cfg.skip_stage3) {
    if (resolve_solver(solver.path).empty()) {
      report.warnings.push_back("solver '" + solver.path + "' not found; stage 3 skipped");
    } else {
      Stage3Result s3 = stage3_prune(buckets, constraints, solver);
      buckets = std::move(s3.kept);
      report.smt_removals = std::move(s3.removals);
      report.smt_unknown = s3.unknown;
      if (s3.unknown > 0)
        report.warnings.push_back(std::to_string(s3.unknown) +
                                  " dominance queries were inconclusive; kept");
      report.counts.push_back({"stage3", count_members(buckets), buckets.size()});
    }
  }
  report.frontier = std::move(buckets);

  if (binding) select_runtime(report, *binding, cfg);
  return report;
}

}  // namespace bigsched
