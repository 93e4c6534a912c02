// One PASS/FAIL line per acceptance criterion. Exits non-zero when any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "bigsched/exec.hpp"
#include "bigsched/json_io.hpp"
#include "bigsched/prune.hpp"
#include "bigsched/smt.hpp"
#include "bigsched/verify.hpp"
#include "unit/fixtures.hpp"

using namespace bigsched;
using fx::idx;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int n, bool ok, const std::string& detail) {
  std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", n, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

void run(int n, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(n, false, std::string("exception: ") + e.what());
  }
}

std::string names(const IndexList& l) {
  std::string s;
  for (const auto& x : l) s += x.name;
  return s;
}

std::vector<TensorAccess> pick(const ContractionExpr& e, std::initializer_list<int> which) {
  std::vector<TensorAccess> out;
  for (int w : which) out.push_back(e.inputs[static_cast<std::size_t>(w)]);
  return out;
}

Binding case_binding(double j, double k, double s) {
  Binding b;
  b.bounds = {{"I", 1800}, {"J", j}, {"K", k}, {"L", 64}, {"M", 16}, {"N", 32}};
  b.sparsity = {{"B", s}};
  attach_dims(b, fx::kernel());
  return b;
}

ConstraintSet wide_ranges() {
  auto b = [](const char* n) { return Symbol::bound(n); };
  return make_constraints(fx::kernel(), {{b("I"), 1, 1800},
                                         {b("J"), 1, 1600},
                                         {b("K"), 400, 4000},
                                         {b("L"), 8, 256},
                                         {b("M"), 8, 256},
                                         {b("N"), 8, 256},
                                         {Symbol::sparsity("B"), 0.001, 0.01}});
}

std::vector<Candidate> candidates(const std::vector<Schedule>& all) {
  std::vector<Candidate> out;
  for (const auto& s : all) out.push_back(make_candidate(s));
  return out;
}

const char* sat_str(SatResult r) {
  return r == SatResult::Sat ? "sat" : r == SatResult::Unsat ? "unsat" : "unknown";
}

constexpr double kMiB = 1024.0 * 1024.0;

}  // namespace

int main() {
  const ContractionExpr e = fx::kernel();
  const bool solver_ok = !resolve_solver(default_solver_path()).empty();
  SolverConfig solver;
  solver.path = default_solver_path();

  run(1, [&] {
    auto t0 = Clock::now();
    IndexList order = idx("lmnijk");
    IndexList split3 = temp_indices(pick(e, {0, 1, 2}), pick(e, {3}), e.output, order);
    IndexList split2 = temp_indices(pick(e, {0, 1}), pick(e, {2, 3}), e.output, order);
    const Big gb = fx::k_temp(), gc = fx::jk_scalar();
    const BigNode& b = gb.node();
    const BigNode& c = gc.node();
    const BigNode& inner = subtree(gc, {1}).node();
    double dt = seconds_since(t0);
    bool ok = split3 == idx("lmk") && split2 == idx("ljk") && b.temp.indices == idx("k") &&
              c.temp.indices == idx("jk") && c.temp.name == "t1" && inner.temp.indices.empty() &&
              inner.temp.name == "t2" && dt < 1.0;
    std::ostringstream d;
    d << "splits {" << names(split3) << "} {" << names(split2) << "}, fused T(" << names(b.temp.indices)
      << ") " << c.temp.name << "(" << names(c.temp.indices) << ") " << inner.temp.name << "("
      << names(inner.temp.indices) << "), " << dt << " s";
    report(1, ok, d.str());
  });

  run(2, [&] {
    auto t0 = Clock::now();
    auto all = gen_schedules(e);
    double dt = seconds_since(t0);
    std::set<std::pair<int, int>> seen;
    for (const auto& s : all) seen.insert(depths(s.graph));
    GenConfig three;
    three.max_memory_depth = 3;
    auto wide = gen_schedules(e, three);
    const Schedule* unfused = nullptr;
    for (const auto& s : wide)
      if (!s.graph.is_lig() && s.graph.node().fused.empty() && s.graph.node().temp.indices == idx("lmk"))
        unfused = &s;
    bool dropped = false;
    int unfused_depth = -1;
    if (unfused) {
      unfused_depth = mem_depth(unfused->graph);
      auto kept = stage1_memory_depth(candidates(wide), 2);
      dropped = true;
      for (const auto& bucket : kept)
        for (const auto& m : bucket.members)
          if (m.schedule.id == unfused->id) dropped = false;
    }
    bool ok = seen.contains({6, 0}) && seen.contains({5, 1}) && seen.contains({4, 2}) &&
              unfused_depth == 3 && dropped && dt < 30.0;
    std::ostringstream d;
    d << all.size() << " schedules in " << dt << " s; (6,0) " << seen.contains({6, 0}) << " (5,1) "
      << seen.contains({5, 1}) << " (4,2) " << seen.contains({4, 2}) << "; unfused split t1(l,m,k) mem depth "
      << unfused_depth << ", dropped by stage 1: " << dropped;
    report(2, ok, d.str());
  });

  run(3, [&] {
    SymPoly ta = time_complexity(fx::unsplit()), tb = time_complexity(fx::k_temp());
    bool ok = ta == parse_poly("nnz(B,3)*L*M*N") && tb == parse_poly("nnz(B,3)*L*M + L*M*N*K");
    report(3, ok, "T(unsplit) = " + ta.str() + ", T(K temp) = " + tb.str());
  });

  run(4, [&] {
    Binding b = case_binding(800, 1000, 0.08);
    double ratio = evaluate(time_complexity(fx::unsplit()), b) / evaluate(time_complexity(fx::k_temp()), b);
    std::ostringstream d;
    d << "ratio " << ratio << " (expected 31.7 +/- 0.5)";
    report(4, std::abs(ratio - 31.7) <= 0.5, d.str());
  });

  run(5, [&] {
    double small = aux_bytes(fx::jk_temp(), case_binding(800, 1000, 0.08)) / kMiB;
    double large = aux_bytes(fx::jk_temp(), case_binding(1600, 2000, 0.02)) / kMiB;
    std::ostringstream d;
    d.precision(4);
    d << std::fixed << "J*K temp " << small << " MiB and " << large << " MiB (expected 3.05, 12.21 +/- 0.01)";
    report(5, std::abs(small - 3.05) <= 0.01 && std::abs(large - 12.21) <= 0.01, d.str());
  });

  run(6, [&] {
    Binding b = case_binding(1600, 2000, 0.02);
    PipelineConfig cfg;
    cfg.llc_bytes = 20LL * 1024 * 1024;
    cfg.skip_stage3 = true;
    auto all = candidates(gen_schedules(e));
    auto s1 = stage1_memory_depth(all, 2);
    Stage4Result s4 = stage4_concrete(s1, b, cfg);
    std::string big_id = fx::sched(fx::jk_scalar()).id;
    bool rejected = std::ranges::none_of(s4.selected, [&](const Candidate& c) { return c.schedule.id == big_id; });
    bool big_over = aux_bytes(fx::jk_scalar(), b) > cfg.llc_fraction * static_cast<double>(cfg.llc_bytes);

    Report r = run_pipeline(e, {}, cfg, make_constraints(e), solver, b);
    double largest = 0;
    if (r.chosen)
      for (const auto& t : r.chosen->cost.temps) {
        double v = 1;
        for (const auto& i : t.indices) v *= b.bound(i.bound());
        largest = std::max(largest, v);
      }
    bool ok = big_over && rejected && !s4.fallback && r.chosen && largest <= b.bound("K");
    std::ostringstream d;
    d << "J*K+1 temp (" << aux_bytes(fx::jk_scalar(), b) / kMiB << " MiB) rejected: " << rejected
      << "; chosen " << (r.chosen ? pretty(r.chosen->schedule.graph) : std::string("none"))
      << ", largest temp " << largest << " elements (K = " << b.bound("K") << ")";
    report(6, ok, d.str());
  });

  run(7, [&] {
    if (!solver_ok) {
      report(7, false, "solver '" + solver.path + "' not found");
      return;
    }
    auto t0 = Clock::now();
    SolverConfig raw = solver;
    raw.presolve = false;
    ConstraintSet ranged = wide_ranges();
    SymPoly te = time_complexity(fx::jk_temp()), ne = memory_complexity(fx::jk_temp());
    SymPoly tc = time_complexity(fx::jk_scalar()), nc = memory_complexity(fx::jk_scalar());
    SatResult q1 = run_solver(raw, emit_smtlib(Query::Q1, ranged, te, ne, tc, nc)).result;
    SatResult q2 = run_solver(raw, emit_smtlib(Query::Q2, ranged, te, ne, tc, nc)).result;
    Verdict ec = check_dominates(te, ne, tc, nc, ranged, raw).verdict;
    bool a_ok = q1 == SatResult::Sat && q2 == SatResult::Unsat && ec == Verdict::Dominated;

    ConstraintSet free = make_constraints(e);
    SymPoly ta = time_complexity(fx::unsplit()), na = memory_complexity(fx::unsplit());
    SymPoly tb = time_complexity(fx::k_temp()), nb = memory_complexity(fx::k_temp());
    Verdict ab = check_dominates(ta, na, tb, nb, free, raw).verdict;
    Verdict ba = check_dominates(tb, nb, ta, na, free, raw).verdict;
    SatResult ab_q2 = run_solver(raw, emit_smtlib(Query::Q2, free, ta, na, tb, nb)).result;
    bool b_ok = ab != Verdict::Dominated && ab_q2 == SatResult::Sat;
    double dt = seconds_since(t0);

    std::ostringstream d;
    d << "(a) J*K temp vs J*K+1 temp under ranges: Q1 " << sat_str(q1) << ", Q2 " << sat_str(q2) << ", verdict "
      << verdict_str(ec) << " (expected sat/unsat/dominated); (b) unsplit vs K temp unconstrained: verdict "
      << verdict_str(ab) << ", Q2 " << sat_str(ab_q2) << " (reverse: " << verdict_str(ba) << "); " << dt
      << " s";
    report(7, a_ok && b_ok && dt < 60.0, d.str());
  });

  run(8, [&] {
    auto t0 = Clock::now();
    auto all = gen_schedules(e);
    std::map<std::string, std::int64_t> ext{{"I", 5}, {"J", 5}, {"K", 5}, {"L", 4}, {"M", 4}, {"N", 4}};
    std::size_t checks = 0, bad_values = 0, bad_trips = 0, bad_linear = 0;
    std::uint64_t seed = 1;
    for (double s : {0.1, 0.3, 1.0}) {
      TensorSet t = random_tensors(e, ext, s, seed++);
      DenseTensor ref = reference_contract(e, t.densified());
      for (const auto& sc : all) {
        CheckResult r = check_schedule(sc, t, ref, 1e-10);
        ++checks;
        bad_values += !r.values_ok;
        bad_trips += !r.trips_ok;
        bad_linear += !r.linear_ok;
      }
    }
    bool a = bad_values == 0, b = bad_trips == 0, c = bad_linear == 0;

    // (d) against a brute-force minimal set.
    auto s1 = stage1_memory_depth(candidates(all), 2);
    auto s2 = stage2_depth_poset(s1);
    std::set<std::pair<int, int>> before, after;
    for (const auto& bk : s1)
      for (const auto& m : bk.members) before.insert({m.cost.loop_depth, m.cost.mem_depth});
    for (const auto& bk : s2)
      for (const auto& m : bk.members) after.insert({m.cost.loop_depth, m.cost.mem_depth});
    int free_depth = 1 << 20;
    for (auto [l, m] : before)
      if (m == 0) free_depth = std::min(free_depth, l);
    bool has_free = std::ranges::any_of(after, [](auto p) { return p.second == 0; });
    bool has_dom = std::ranges::any_of(after, [&](auto p) { return depth_dominated(free_depth, 0, p.first, p.second); });
    bool d = count_members(s2) > 0 && (has_free || has_dom);

    // (e)
    double bound = finiteness_bound_log10(e.inputs.size(), e.all_indices().size());
    bool e_ok = std::log10(static_cast<double>(all.size())) <= bound;

    // (f)
    bool f = false;
    std::size_t removals = 0, samples = 0, counterexamples = 0;
    if (solver_ok) {
      ConstraintSet cs = wide_ranges();
      Stage3Result r3 = stage3_prune(s2, cs, solver);
      removals = r3.removals.size();
      std::mt19937_64 rng(2024);
      for (const auto& x : r3.removals) {
        SymPoly ts = parse_poly(x.time), ns = parse_poly(x.mem);
        SymPoly tc = parse_poly(x.dominator_time), nc = parse_poly(x.dominator_mem);
        for (int n = 0; n < 1000; ++n) {
          auto bnd = sample_binding(cs, rng);
          if (!bnd) {
            ++counterexamples;
            continue;
          }
          ++samples;
          double a1 = evaluate(ts, *bnd), c1 = evaluate(tc, *bnd);
          double a2 = evaluate(ns, *bnd), c2 = evaluate(nc, *bnd);
          if ((a1 < c1 && a2 <= c2) || (a1 <= c1 && a2 < c2)) ++counterexamples;
        }
      }
      f = counterexamples == 0;
    }
    double dt = seconds_since(t0);
    std::ostringstream out;
    out << "(a) " << checks - bad_values << "/" << checks << " outputs within 1e-10; (b) " << checks - bad_trips
        << "/" << checks << " trip totals exact; (c) " << checks - bad_linear << "/" << checks
        << " linearized equal; (d) stage 2 keeps " << count_members(s2) << ", temp-free or dominator: "
        << (has_free || has_dom) << "; (e) log10 count " << std::log10(static_cast<double>(all.size()))
        << " <= " << bound << "; (f) " << removals << " removals, " << samples << " samples, "
        << counterexamples << " counterexamples" << (solver_ok ? "" : " (no solver)") << "; " << dt << " s";
    report(8, a && b && c && d && e_ok && f, out.str());
  });

  run(9, [&] {
    PipelineConfig cfg;
    cfg.llc_bytes = 20LL * 1024 * 1024;
    cfg.tie_break = parse_tie_break("random:7");
    Binding b = case_binding(800, 1000, 0.08);
    ConstraintSet cs = wide_ranges();
    auto once = [&] { return report_to_json(run_pipeline(e, {}, cfg, cs, solver, b), cfg).dump(2); };
    std::string x = once(), y = once();
    report(9, x == y && !x.empty(), "two runs, " + std::to_string(x.size()) + " bytes each, identical: " +
                                        (x == y ? "yes" : "no"));
  });

  return failures == 0 ? 0 : 1;
}
