#include <doctest.h>

#include <set>

#include "bigsched/error.hpp"
#include "bigsched/prune.hpp"
#include "bigsched/smt.hpp"
#include "fixtures.hpp"

using namespace bigsched;

namespace {

Candidate cand(const Big& g) { return make_candidate(fx::sched(g)); }

std::vector<Candidate> kernel_candidates() {
  std::vector<Candidate> out;
  for (const auto& s : fx::kernel_space()) out.push_back(make_candidate(s));
  return out;
}

Binding case1() {
  Binding b;
  b.bounds = {{"I", 1800}, {"J", 800}, {"K", 1000}, {"L", 64}, {"M", 16}, {"N", 32}};
  b.sparsity = {{"B", 0.08}};
  attach_dims(b, fx::kernel());
  return b;
}

Binding case2() {
  Binding b = case1();
  b.bounds["J"] = 1600;
  b.bounds["K"] = 2000;
  b.sparsity["B"] = 0.02;
  return b;
}

PipelineConfig llc20() {
  PipelineConfig cfg;
  cfg.llc_bytes = 20LL * 1024 * 1024;
  return cfg;
}

const StageCount* count_of(const Report& r, const std::string& stage) {
  auto it = std::ranges::find(r.counts, stage, &StageCount::stage);
  return it == r.counts.end() ? nullptr : &*it;
}

std::set<std::pair<int, int>> depth_pairs(const std::vector<Bucket>& buckets) {
  std::set<std::pair<int, int>> out;
  for (const auto& b : buckets)
    for (const auto& m : b.members) out.insert({m.cost.loop_depth, m.cost.mem_depth});
  return out;
}

}  // namespace

TEST_CASE("tie-break parsing") {
  CHECK_FALSE(parse_tie_break("hash").random);
  TieBreak r = parse_tie_break("random:17");
  CHECK(r.random);
  CHECK(r.seed == 17);
  CHECK(tie_break_str(r) == "random:17");
  CHECK_THROWS_AS(parse_tie_break("random"), UsageError);
  CHECK_THROWS_AS(parse_tie_break("coin"), UsageError);
}

TEST_CASE("buckets group by the polynomial pair") {
  auto buckets = bucketize({cand(fx::jk_scalar()), cand(fx::k_temp()), cand(fx::jk_temp()), cand(fx::jk_scalar())});
  CHECK(buckets.size() == 3);
  CHECK(count_members(buckets) == 4);
  for (const auto& b : buckets)
    for (const auto& m : b.members) {
      CHECK(m.cost.time == b.time);
      CHECK(m.cost.mem == b.mem);
    }
}

TEST_CASE("stage 1 drops temporaries deeper than the threshold") {
  std::vector<Candidate> c{cand(fx::unsplit()), cand(fx::k_temp()), cand(fx::jk_scalar())};
  CHECK(count_members(stage1_memory_depth(c, 2)) == 3);
  CHECK(count_members(stage1_memory_depth(c, 1)) == 2);
  auto zero = stage1_memory_depth(c, 0);
  REQUIRE(count_members(zero) == 1);
  CHECK(zero[0].members[0].cost.mem_depth == 0);

  GenConfig three;
  three.max_memory_depth = 3;
  std::vector<Candidate> wide;
  for (const auto& s : gen_schedules(fx::kernel(), three)) wide.push_back(make_candidate(s));
  auto kept = stage1_memory_depth(wide, 2);
  for (const auto& b : kept)
    for (const auto& m : b.members) CHECK(m.cost.mem_depth <= 2);
  CHECK(count_members(kept) == fx::kernel_space().size());
}

TEST_CASE("depth dominance rule") {
  CHECK(depth_dominated(5, 2, 4, 2));
  CHECK(depth_dominated(5, 2, 5, 1));
  CHECK_FALSE(depth_dominated(4, 2, 4, 2));
  CHECK_FALSE(depth_dominated(6, 0, 5, 1));
  CHECK_FALSE(depth_dominated(4, 2, 5, 1));
}

TEST_CASE("stage 2 on the four shape depths") {
  auto out = stage2_depth_poset(
      bucketize({cand(fx::unsplit()), cand(fx::k_temp()), cand(fx::jk_scalar()), cand(fx::jk_temp())}));
  CHECK(depth_pairs(out) == std::set<std::pair<int, int>>{{6, 0}, {5, 1}, {4, 2}});

  // Equal depth pairs are incomparable.
  auto same = stage2_depth_poset(bucketize({cand(fx::jk_scalar()), cand(fx::jk_k())}));
  CHECK(count_members(same) == 2);
}

TEST_CASE("stage 2 is order independent and keeps a temp-free schedule or its dominator") {
  auto buckets = stage1_memory_depth(kernel_candidates(), 2);
  auto forward = stage2_depth_poset(buckets);
  std::vector<Bucket> reversed(buckets.rbegin(), buckets.rend());
  auto backward = stage2_depth_poset(reversed);
  CHECK(count_members(forward) == count_members(backward));
  CHECK(depth_pairs(forward) == depth_pairs(backward));
  REQUIRE(count_members(forward) > 0);

  // Brute-force minimal elements of the depth pairs.
  auto all = depth_pairs(buckets);
  std::set<std::pair<int, int>> minimal;
  for (auto [l, m] : all)
    if (std::ranges::none_of(all, [&](auto c) { return depth_dominated(l, m, c.first, c.second); }))
      minimal.insert({l, m});
  CHECK(depth_pairs(forward) == minimal);

  bool temp_free = std::ranges::any_of(depth_pairs(forward), [](auto p) { return p.second == 0; });
  int best_free = 100;
  for (auto [l, m] : all)
    if (m == 0) best_free = std::min(best_free, l);
  bool dominator = std::ranges::any_of(
      depth_pairs(forward), [&](auto p) { return depth_dominated(best_free, 0, p.first, p.second); });
  CHECK((temp_free || dominator));
}

TEST_CASE("stage 4 under the large-temp binding rejects the J*K temporary") {
  auto buckets = stage1_memory_depth(kernel_candidates(), 2);
  Binding b = case2();
  Stage4Result r = stage4_concrete(buckets, b, llc20());
  REQUIRE_FALSE(r.selected.empty());
  CHECK_FALSE(r.fallback);
  std::string excluded = fx::sched(fx::jk_scalar()).id;
  CHECK(aux_bytes(fx::jk_scalar(), b) > 10LL * 1024 * 1024);
  for (const auto& c : r.selected) {
    CHECK(c.schedule.id != excluded);
    CHECK(aux_bytes(c.schedule.graph, b) <= 10LL * 1024 * 1024);
  }

  // After the depth poset, the pick carries no temporary larger than K.
  PipelineConfig cfg = llc20();
  cfg.skip_stage3 = true;
  Report rep = run_pipeline(fx::kernel(), {}, cfg, make_constraints(fx::kernel(), {}, {}), {}, b);
  REQUIRE(rep.chosen);
  for (const auto& t : rep.chosen->cost.temps) {
    double volume = 1;
    for (const auto& i : t.indices) volume *= b.bound(i.bound());
    CHECK(volume <= b.bound("K"));
  }
}

TEST_CASE("stage 4 keeps every co-minimal schedule and falls back when nothing fits") {
  auto buckets = bucketize({cand(fx::jk_scalar()), cand(fx::jk_k()), cand(fx::jk_temp())});
  Binding b = case1();
  PipelineConfig cfg = llc20();
  Stage4Result r = stage4_concrete(buckets, b, cfg);
  CHECK(r.selected.size() == 2);  // jk_scalar and jk_k share a time polynomial.

  cfg.llc_bytes = 16;
  Stage4Result fb = stage4_concrete(buckets, b, cfg);
  CHECK(fb.fallback);
  CHECK(fb.selected.size() == 2);

  Stage4Result one = stage4_concrete(bucketize({cand(fx::unsplit())}), b, llc20());
  REQUIRE(one.selected.size() == 1);
  CHECK(one.selected[0].schedule.id == fx::sched(fx::unsplit()).id);

  cfg.llc_bytes = 0;
  CHECK_THROWS_AS(stage4_concrete(buckets, b, cfg), UsageError);
}

TEST_CASE("stage 4 selection is invariant under rescaling every time value") {
  auto buckets = stage1_memory_depth(kernel_candidates(), 2);
  auto scaled = buckets;
  for (auto& b : scaled) b.time = b.time * SymPoly::constant(1000);
  Binding b = case1();
  std::set<std::string> x, y;
  for (const auto& c : stage4_concrete(buckets, b, llc20()).selected) x.insert(c.schedule.id);
  for (const auto& c : stage4_concrete(scaled, b, llc20()).selected) y.insert(c.schedule.id);
  CHECK_FALSE(x.empty());
  CHECK(x == y);
}

TEST_CASE("stride cache cost") {
  ContractionExpr e = parse_einsum("A(j)=B(i,j)");
  Binding b;
  b.bounds = {{"I", 7}, {"J", 11}};
  CHECK(cache_cost(Big(make_lig(e, fx::idx("ji"))), b) == 11);  // i over B(i,j)
  CHECK(cache_cost(Big(make_lig(e, fx::idx("ij"))), b) == 0);   // j is last
  ContractionExpr f = parse_einsum("A(j,k)=B(j,i)*C(j,k)");
  b.bounds["K"] = 5;
  CHECK(cache_cost(Big(make_lig(f, fx::idx("jki"))), b) == 0);  // i last or absent
  ContractionExpr g = parse_einsum("A(i)=B(i,j,k)");
  b.bounds["J"] = 3;
  CHECK(cache_cost(Big(make_lig(g, fx::idx("jki"))), b) == 15);  // trailing J*K
}

TEST_CASE("stage 5 prefers natural order, then the lowest id") {
  ContractionExpr e = parse_einsum("A(i,j)=B(i,j)");
  Binding b;
  b.bounds = {{"I", 4}, {"J", 4}};
  auto ij = make_candidate(make_schedule(Big(make_lig(e, fx::idx("ij"))), std::make_shared<const ContractionExpr>(e)));
  auto ji = make_candidate(make_schedule(Big(make_lig(e, fx::idx("ji"))), std::make_shared<const ContractionExpr>(e)));
  CHECK(order_inversions(ij.schedule.graph) == 0);
  CHECK(order_inversions(ji.schedule.graph) == 2);
  CHECK(stage5_cache({ji, ij}, b, {}).schedule.id == ij.schedule.id);

  // Identical scores fall to the lowest id, or to the seeded pick.
  auto c2 = cand(fx::jk_scalar()), d2 = cand(fx::jk_k());
  Binding k = case1();
  if (cache_cost(c2.schedule.graph, k) == cache_cost(d2.schedule.graph, k) &&
      order_inversions(c2.schedule.graph) == order_inversions(d2.schedule.graph)) {
    std::string low = std::min(c2.schedule.id, d2.schedule.id);
    CHECK(stage5_cache({c2, d2}, k, {}).schedule.id == low);
    CHECK(stage5_cache({d2, c2}, k, {}).schedule.id == low);
  }
  TieBreak seeded{true, 5};
  CHECK(stage5_cache({c2, d2}, k, seeded).schedule.id == stage5_cache({c2, d2}, k, seeded).schedule.id);
}

TEST_CASE("pipeline without the solver picks a depth-4 schedule under the small-temp binding") {
  PipelineConfig cfg = llc20();
  cfg.skip_stage3 = true;
  Report r = run_pipeline(fx::kernel(), {}, cfg, make_constraints(fx::kernel(), {}, {}), {}, case1());
  REQUIRE(r.chosen);
  CHECK(r.chosen->cost.loop_depth == 4);
  REQUIRE(count_of(r, "enumerate"));
  CHECK(count_of(r, "enumerate")->schedules == fx::kernel_space().size());
  CHECK_FALSE(count_of(r, "stage3"));
  for (std::size_t i = 1; i < r.counts.size(); ++i) CHECK(r.counts[i].schedules <= r.counts[i - 1].schedules);
  CHECK(r.counts.back().schedules == 1);
}

TEST_CASE("skipping stage 2 passes stage 1 output straight through") {
  PipelineConfig cfg = llc20();
  cfg.skip_stage2 = true;
  cfg.skip_stage3 = true;
  Report r = run_pipeline(fx::kernel(), {}, cfg, make_constraints(fx::kernel(), {}, {}), {}, std::nullopt);
  CHECK_FALSE(count_of(r, "stage2"));
  CHECK(count_members(r.frontier) == count_of(r, "stage1")->schedules);
  CHECK_FALSE(r.chosen);
}

TEST_CASE("a single-candidate space passes every stage unchanged") {
  ContractionExpr e = parse_einsum("A(i)=B(i)");
  PipelineConfig cfg = llc20();
  cfg.skip_stage3 = true;
  Binding b;
  b.bounds = {{"I", 10}};
  Report r = run_pipeline(e, {}, cfg, make_constraints(e, {}, {}), {}, b);
  for (const auto& c : r.counts) CHECK(c.schedules == 1);
  REQUIRE(r.chosen);
}
