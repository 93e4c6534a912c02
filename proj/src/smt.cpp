#include "bigsched/smt.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "bigsched/error.hpp"

extern char** environ;

namespace bigsched {

namespace {

SymPoly sym(const Symbol& s) { return SymPoly::of(s); }

SymPoly bound_product(const std::vector<std::string>& dims, std::size_t n) {
  std::vector<Symbol> syms;
  for (std::size_t m = 0; m < n; ++m) syms.push_back(Symbol::bound(dims[m]));
  return SymPoly::product(syms);
}

std::vector<std::string> dims_of(const TensorAccess& t) {
  std::vector<std::string> out;
  for (const auto& idx : t.indices) out.push_back(idx.bound());
  return out;
}

}  // namespace

std::vector<Symbol> vocabulary(const ContractionExpr& expr) {
  std::set<Symbol> out;
  for (const auto& idx : expr.all_indices()) out.insert(Symbol::bound(idx.bound()));
  for (const auto& in : expr.inputs) {
    if (!in.is_sparse()) continue;
    out.insert(Symbol::sparsity(in.tensor));
    for (int d = 1; d <= static_cast<int>(in.order()); ++d)
      out.insert(Symbol::prefix_nnz(in.tensor, d));
  }
  return {out.begin(), out.end()};
}

std::vector<Relation> infer_constraints(const ContractionExpr& expr) {
  using Op = Relation::Op;
  std::vector<Relation> out;
  const SymPoly one = SymPoly::constant(1), zero;
  for (const auto& idx : expr.all_indices())
    out.push_back({sym(Symbol::bound(idx.bound())), Op::Ge, one});
  for (const auto& in : expr.inputs) {
    if (!in.is_sparse()) continue;
    auto dims = dims_of(in);
    int k = static_cast<int>(dims.size());
    for (int d = 1; d <= k; ++d) {
      SymPoly nnz = sym(Symbol::prefix_nnz(in.tensor, d));
      out.push_back({nnz, Op::Ge, zero});
      out.push_back({nnz, Op::Le, bound_product(dims, d)});
      if (d < k) {
        SymPoly next = sym(Symbol::prefix_nnz(in.tensor, d + 1));
        out.push_back({nnz, Op::Le, next});
        out.push_back({next, Op::Le, nnz * sym(Symbol::bound(dims[d]))});
      }
    }
    SymPoly s = sym(Symbol::sparsity(in.tensor));
    out.push_back({sym(Symbol::prefix_nnz(in.tensor, k)), Op::Eq, s * bound_product(dims, k)});
    out.push_back({s, Op::Gt, zero});
    out.push_back({s, Op::Le, one});
  }
  return out;
}

ConstraintSet make_constraints(const ContractionExpr& expr, std::vector<Range> ranges,
                               std::vector<Relation> user) {
  for (const auto& r : ranges)
    if (!(r.lo <= r.hi))
      throw ValidationError("range for " + r.symbol.str() + " has lo > hi");
  ConstraintSet cs;
  cs.ranges = std::move(ranges);
  cs.user = std::move(user);
  cs.inferred = infer_constraints(expr);
  cs.vocabulary = vocabulary(expr);
  for (const auto& in : expr.inputs)
    if (in.is_sparse()) cs.tensor_dims[in.tensor] = dims_of(in);
  return cs;
}

// ---- SMT-LIB text ----

namespace {

std::string real_literal(double v) {
  bool neg = v < 0;
  double a = std::fabs(v);
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, a, std::chars_format::fixed);
  std::string text(buf, res.ptr);
  if (text.find('.') == std::string::npos) text += ".0";
  return neg ? "(- " + text + ")" : text;
}

std::string int_literal(std::int64_t c) {
  std::string text = std::to_string(c < 0 ? -c : c) + ".0";
  return c < 0 ? "(- " + text + ")" : text;
}

const char* op_text(Relation::Op op) {
  switch (op) {
    case Relation::Op::Eq: return "=";
    case Relation::Op::Le: return "<=";
    case Relation::Op::Lt: return "<";
    case Relation::Op::Ge: return ">=";
    case Relation::Op::Gt: return ">";
  }
  return "=";
}

std::string relation_term(const Relation& r) {
  return std::string("(") + op_text(r.op) + " " + smt_term(r.lhs) + " " + smt_term(r.rhs) + ")";
}

}  // namespace

std::string smt_symbol(const Symbol& s) { return "|" + s.str() + "|"; }

std::string smt_term(const SymPoly& p) {
  if (p.is_zero()) return "0.0";
  std::vector<std::string> terms;
  for (const auto& [mono, coef] : p.terms()) {
    std::vector<std::string> parts;
    if (coef != 1 || mono.empty()) parts.push_back(int_literal(coef));
    for (const auto& s : mono) parts.push_back(smt_symbol(s));
    if (parts.size() == 1) {
      terms.push_back(parts[0]);
    } else {
      std::string t = "(*";
      for (const auto& x : parts) t += " " + x;
      terms.push_back(t + ")");
    }
  }
  if (terms.size() == 1) return terms[0];
  std::string out = "(+";
  for (const auto& t : terms) out += " " + t;
  return out + ")";
}

std::string emit_smtlib(Query q, const ConstraintSet& cs, const SymPoly& ts, const SymPoly& ns,
                        const SymPoly& tc, const SymPoly& nc,
                        std::optional<std::int64_t> timeout_ms) {
  std::set<Symbol> symbols(cs.vocabulary.begin(), cs.vocabulary.end());
  for (const auto* p : {&ts, &ns, &tc, &nc})
    for (const auto& s : p->symbols()) symbols.insert(s);
  for (const auto* rels : {&cs.inferred, &cs.user})
    for (const auto& r : *rels)
      for (const auto* p : {&r.lhs, &r.rhs})
        for (const auto& s : p->symbols()) symbols.insert(s);
  for (const auto& r : cs.ranges) symbols.insert(r.symbol);

  std::ostringstream out;
  if (timeout_ms) out << "(set-option :timeout " << *timeout_ms << ")\n";
  out << "(set-logic QF_NRA)\n";
  for (const auto& s : symbols) out << "(declare-fun " << smt_symbol(s) << " () Real)\n";
  for (const auto& r : cs.ranges) {
    out << "(assert (<= " << real_literal(r.lo) << " " << smt_symbol(r.symbol) << "))\n";
    out << "(assert (<= " << smt_symbol(r.symbol) << " " << real_literal(r.hi) << "))\n";
  }
  for (const auto& r : cs.inferred) out << "(assert " << relation_term(r) << ")\n";
  for (const auto& r : cs.user) out << "(assert " << relation_term(r) << ")\n";

  std::string a = smt_term(ts), b = smt_term(tc), m = smt_term(ns), n = smt_term(nc);
  auto cmp = [](const char* op, const std::string& x, const std::string& y) {
    return std::string("(") + op + " " + x + " " + y + ")";
  };
  if (q == Query::Q1)
    out << "(assert (or (and " << cmp(">", a, b) << " " << cmp(">=", m, n) << ") (and "
        << cmp(">=", a, b) << " " << cmp(">", m, n) << ")))\n";
  else
    out << "(assert (or (and " << cmp("<=", a, b) << " " << cmp("<", m, n) << ") (and "
        << cmp("<", a, b) << " " << cmp("<=", m, n) << ")))\n";
  out << "(check-sat)\n";
  return out.str();
}

// ---- solver process ----

std::string resolve_solver(const std::string& path) {
  namespace fs = std::filesystem;
  auto executable = [](const fs::path& p) {
    std::error_code ec;
    return fs::is_regular_file(p, ec) && ::access(p.c_str(), X_OK) == 0;
  };
  if (path.empty()) return {};
  if (path.find('/') != std::string::npos) return executable(path) ? path : std::string{};
  const char* env = std::getenv("PATH");
  std::istringstream dirs(env ? env : "/usr/local/bin:/usr/bin:/bin");
  std::string dir;
  while (std::getline(dirs, dir, ':')) {
    fs::path p = fs::path(dir.empty() ? "." : dir) / path;
    if (executable(p)) return p.string();
  }
  return {};
}

std::string default_solver_path() {
  const char* env = std::getenv("BIGSCHED_SOLVER");
  return env && *env ? env : "z3";
}

SolverReply run_solver(const SolverConfig& cfg, const std::string& script) {
  static std::once_flag sigpipe_once;
  std::call_once(sigpipe_once, [] { ::signal(SIGPIPE, SIG_IGN); });

  std::string exe = resolve_solver(cfg.path);
  if (exe.empty()) throw SolverError("solver not found: " + cfg.path);

  int in_pipe[2], out_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw SolverError("pipe failed");
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw SolverError("pipe failed");
  }

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in_pipe[0], 0);
  posix_spawn_file_actions_adddup2(&actions, out_pipe[1], 1);
  posix_spawn_file_actions_adddup2(&actions, out_pipe[1], 2);

  std::vector<std::string> args{exe};
  if (std::filesystem::path(exe).filename().string().find("z3") != std::string::npos) {
    args.push_back("-in");
    args.push_back("-smt2");
  }
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);

  pid_t pid = 0;
  int rc = ::posix_spawn(&pid, exe.c_str(), &actions, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  if (rc != 0) {
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    throw SolverError("cannot start solver " + exe + ": " + std::strerror(rc));
  }

  using Clock = std::chrono::steady_clock;
  auto deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                     std::chrono::duration<double>(cfg.timeout_s));

  // Scripts are small; a short write only happens when the solver died.
  std::size_t written = 0;
  while (written < script.size()) {
    ssize_t w = ::write(in_pipe[1], script.data() + written, script.size() - written);
    if (w <= 0) break;
    written += static_cast<std::size_t>(w);
  }
  ::close(in_pipe[1]);

  std::string output;
  bool timed_out = false;
  char buf[4096];
  for (;;) {
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    if (left.count() <= 0) {
      timed_out = true;
      break;
    }
    pollfd pfd{out_pipe[0], POLLIN, 0};
    int pr = ::poll(&pfd, 1, static_cast<int>(std::min<std::int64_t>(left.count(), 1000)));
    if (pr < 0 && errno == EINTR) continue;
    if (pr == 0) continue;
    ssize_t r = ::read(out_pipe[0], buf, sizeof buf);
    if (r <= 0) break;
    output.append(buf, static_cast<std::size_t>(r));
  }
  ::close(out_pipe[0]);
  if (timed_out) ::kill(pid, SIGKILL);
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }

  SolverReply reply;
  if (timed_out) {
    reply.diagnostic = "timeout after " + std::to_string(cfg.timeout_s) + " s";
    return reply;
  }
  std::istringstream lines(output);
  std::string line;
  while (std::getline(lines, line)) {
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    line = line.substr(b, line.find_last_not_of(" \t\r") - b + 1);
    if (line == "sat") reply.result = SatResult::Sat;
    else if (line == "unsat") reply.result = SatResult::Unsat;
    else if (line == "unknown" || line == "timeout") reply.result = SatResult::Unknown;
    else {
      reply.diagnostic += line + "\n";
      continue;
    }
    return reply;
  }
  if (WIFSIGNALED(status))
    reply.diagnostic += "solver killed by signal " + std::to_string(WTERMSIG(status));
  else if (reply.diagnostic.empty())
    reply.diagnostic = "no verdict from solver";
  return reply;
}

std::string verdict_str(Verdict v) {
  switch (v) {
    case Verdict::Dominated: return "dominated";
    case Verdict::NotDominated: return "not-dominated";
    case Verdict::Unknown: return "unknown";
  }
  return "unknown";
}

// ---- sampling ----

bool satisfies(const ConstraintSet& cs, const Binding& b, double tol) {
  for (const auto& r : cs.ranges) {
    double v = b.value(r.symbol);
    double slack = tol * std::max({1.0, std::fabs(r.lo), std::fabs(r.hi)});
    if (v < r.lo - slack || v > r.hi + slack) return false;
  }
  for (const auto* rels : {&cs.inferred, &cs.user})
    for (const auto& r : *rels)
      if (!r.holds(evaluate(r.lhs, b), evaluate(r.rhs, b), tol)) return false;
  return true;
}

std::optional<Binding> sample_binding(const ConstraintSet& cs, std::mt19937_64& rng, int attempts) {
  std::map<Symbol, std::pair<double, double>> range;
  for (const auto& r : cs.ranges) range[r.symbol] = {r.lo, r.hi};
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // Ends of a range are drawn often: dominance questions tend to turn there.
  auto draw = [&](double lo, double hi) {
    double u = unit(rng);
    if (u < 0.2) return lo;
    if (u < 0.4) return hi;
    return lo + (hi - lo) * unit(rng);
  };

  for (int attempt = 0; attempt < attempts; ++attempt) {
    Binding b;
    b.tensor_dims = cs.tensor_dims;
    for (const auto& s : cs.vocabulary) {
      if (s.kind == Symbol::Kind::Bound) {
        auto it = range.find(s);
        auto [lo, hi] = it != range.end() ? it->second : std::pair{1.0, 256.0};
        b.bounds[s.name] = draw(std::max(lo, 1.0), std::max(hi, 1.0));
      } else if (s.kind == Symbol::Kind::Sparsity) {
        auto it = range.find(s);
        auto [lo, hi] = it != range.end() ? it->second : std::pair{1e-6, 1.0};
        b.sparsity[s.name] = draw(std::max(lo, 1e-12), std::min(hi, 1.0));
      }
    }
    for (const auto& [tensor, dims] : cs.tensor_dims) {
      int k = static_cast<int>(dims.size());
      std::vector<double> p(k + 1, 1.0);
      for (int d = 1; d <= k; ++d) p[d] = p[d - 1] * b.bound(dims[d - 1]);
      double next = b.sparsity.at(tensor) * p[k];
      b.nnz[Symbol::prefix_nnz(tensor, k).str()] = next;
      for (int d = k - 1; d >= 1; --d) {
        double lo = next / b.bound(dims[d]);
        double hi = std::min(next, p[d]);
        next = lo + (hi - lo) * unit(rng);
        b.nnz[Symbol::prefix_nnz(tensor, d).str()] = next;
      }
    }
    if (satisfies(cs, b)) return b;
  }
  return std::nullopt;
}

// ---- dominance ----

namespace {

bool same(const SymPoly& a, const SymPoly& b) { return a == b; }

// Strictly better beyond rounding noise.
bool less(double x, double y) { return x < y - 1e-9 * std::max({1.0, std::fabs(x), std::fabs(y)}); }
bool less_eq(double x, double y) { return !less(y, x); }

bool witness_better(const SymPoly& ts, const SymPoly& ns, const SymPoly& tc, const SymPoly& nc,
                    const ConstraintSet& cs) {
  std::mt19937_64 rng(0x51a7e5ULL);
  for (int i = 0; i < 64; ++i) {
    auto b = sample_binding(cs, rng, 50);
    if (!b) return false;
    double a = evaluate(ts, *b), c = evaluate(tc, *b), m = evaluate(ns, *b), n = evaluate(nc, *b);
    if ((less_eq(a, c) && less(m, n)) || (less(a, c) && less_eq(m, n))) return true;
  }
  return false;
}

}  // namespace

DominanceResult check_dominates(const SymPoly& ts, const SymPoly& ns, const SymPoly& tc,
                                const SymPoly& nc, const ConstraintSet& cs,
                                const SolverConfig& solver) {
  DominanceResult r;
  if (solver.presolve) {
    if (same(ts, tc) && same(ns, nc)) {
      r.verdict = Verdict::NotDominated;
      r.q1 = SatResult::Unsat;
      r.presolved = true;
      return r;
    }
    if (witness_better(ts, ns, tc, nc, cs)) {
      r.verdict = Verdict::NotDominated;
      r.q2 = SatResult::Sat;
      r.presolved = true;
      return r;
    }
  }
  auto ms = static_cast<std::int64_t>(std::ceil(solver.timeout_s * 1000));
  SolverReply q1 = run_solver(solver, emit_smtlib(Query::Q1, cs, ts, ns, tc, nc, ms));
  r.q1 = q1.result;
  if (q1.result == SatResult::Unsat) {
    r.verdict = Verdict::NotDominated;
    return r;
  }
  SolverReply q2 = run_solver(solver, emit_smtlib(Query::Q2, cs, ts, ns, tc, nc, ms));
  r.q2 = q2.result;
  if (q2.result == SatResult::Sat) {
    r.verdict = Verdict::NotDominated;
  } else if (q1.result == SatResult::Sat && q2.result == SatResult::Unsat) {
    r.verdict = Verdict::Dominated;
  } else {
    r.verdict = Verdict::Unknown;
    r.diagnostic = q1.diagnostic + q2.diagnostic;
  }
  return r;
}

DominanceResult check_dominates(const Candidate& s, const Candidate& c, const ConstraintSet& cs,
                                const SolverConfig& solver) {
  return check_dominates(s.cost.time, s.cost.mem, c.cost.time, c.cost.mem, cs, solver);
}

Stage3Result stage3_prune(const std::vector<Bucket>& buckets, const ConstraintSet& cs,
                          const SolverConfig& solver) {
  const std::size_t n = buckets.size();
  struct Outcome {
    std::optional<std::size_t> by;
    std::size_t unknown = 0;
    std::string diagnostic;
  };
  std::vector<Outcome> outcomes(n);
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr err;

  auto work = [&] {
    for (;;) {
      std::size_t s = next++;
      if (s >= n) return;
      try {
        Outcome& o = outcomes[s];
        for (std::size_t c = 0; c < n && !o.by; ++c) {
          if (c == s) continue;
          auto r = check_dominates(buckets[s].time, buckets[s].mem, buckets[c].time,
                                   buckets[c].mem, cs, solver);
          if (r.verdict == Verdict::Dominated) o.by = c;
          if (r.verdict == Verdict::Unknown) {
            ++o.unknown;
            o.diagnostic += buckets[s].time.str() + " vs " + buckets[c].time.str() + ": " +
                            r.diagnostic;
          }
        }
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!err) err = std::current_exception();
        next = n;
      }
    }
  };

  unsigned jobs = solver.jobs ? solver.jobs : std::max(1u, std::thread::hardware_concurrency());
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, std::max<std::size_t>(n, 1)));
  std::vector<std::thread> pool;
  for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);

  Stage3Result out;
  for (std::size_t s = 0; s < n; ++s) {
    out.unknown += outcomes[s].unknown;
    if (!outcomes[s].diagnostic.empty()) out.diagnostics.push_back(outcomes[s].diagnostic);
    if (auto c = outcomes[s].by) {
      out.removals.push_back({buckets[s].time.str(), buckets[s].mem.str(), buckets[*c].time.str(),
                              buckets[*c].mem.str()});
    } else {
      out.kept.push_back(buckets[s]);
    }
  }
  return out;
}

}  // namespace bigsched
