// bigsched: enumerate, prune, select, verify and emit schedules for a sparse
// tensor contraction.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "bigsched/emit.hpp"
#include "bigsched/enumerate.hpp"
#include "bigsched/error.hpp"
#include "bigsched/exec.hpp"
#include "bigsched/json_io.hpp"
#include "bigsched/prune.hpp"
#include "bigsched/smt.hpp"
#include "bigsched/verify.hpp"

using namespace bigsched;

namespace {

struct ExprOpts {
  std::string expr;
  std::vector<std::string> sparse;
  int max_mem = 2;
  bool no_split_b = false;
  std::size_t cap = 0;

  void add(CLI::App* app, bool required = true) {
    auto* e = app->add_option("--expr", expr, "contraction, e.g. \"A(i,j)=B(i,k)*C(k,j)\"");
    if (required) e->required();
    app->add_option("--sparse", sparse, "level formats, e.g. B:ccc (repeatable)");
    app->add_option("--max-mem-depth", max_mem, "largest temporary arity generated")->capture_default_str();
    app->add_flag("--no-split-b", no_split_b, "no second temporary in a consumer");
    app->add_option("--cap", cap, "fail beyond this many schedules per section");
  }

  ContractionExpr parse() const {
    Formats f;
    for (const auto& s : sparse) add_format_flag(f, s);
    return parse_einsum(expr, f);
  }

  GenConfig gen() const {
    GenConfig g;
    g.max_memory_depth = max_mem;
    g.enable_split_mode_b = !no_split_b;
    if (cap) g.cap = cap;
    return g;
  }
};

struct PruneOpts {
  int mem_threshold = 2;
  bool skip2 = false, skip3 = false, stage3 = false;
  std::string constraints;
  std::string solver;
  double timeout = 10.0;
  unsigned jobs = 0;

  void add(CLI::App* app) {
    app->add_option("--mem-threshold", mem_threshold, "stage 1 memory depth limit")->capture_default_str();
    app->add_flag("--skip-stage2", skip2, "bypass the depth poset");
    app->add_flag("--skip-stage3", skip3, "bypass the solver stage");
    app->add_option("--constraints", constraints, "ranges and user relations (JSON); enables stage 3");
    app->add_flag("--stage3", stage3, "run stage 3 on inferred constraints alone");
    app->add_option("--solver", solver, "SMT-LIB2 solver executable (default $BIGSCHED_SOLVER or z3)");
    app->add_option("--timeout", timeout, "seconds per solver query")->capture_default_str();
    app->add_option("--jobs", jobs, "solver workers (0: one per core)");
  }
};

void write_out(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    return;
  }
  write_text_file(path, text);
}

void print_warnings(const Report& r) {
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
}

Report pipeline(const ExprOpts& eo, const PruneOpts& po, PipelineConfig& pc,
                const std::optional<Binding>& binding) {
  ContractionExpr expr = eo.parse();
  pc.mem_depth_threshold = po.mem_threshold;
  pc.skip_stage2 = po.skip2;
  pc.skip_stage3 = po.skip3 || (po.constraints.empty() && !po.stage3);

  ConstraintSet cs = po.constraints.empty()
                         ? make_constraints(expr)
                         : constraints_from_json(read_json_file(po.constraints), expr);
  SolverConfig sc;
  sc.path = po.solver.empty() ? default_solver_path() : po.solver;
  sc.timeout_s = po.timeout;
  sc.jobs = po.jobs;
  if (!pc.skip_stage3 && !po.solver.empty() && resolve_solver(po.solver).empty())
    throw SolverError("solver not found: " + po.solver);
  return run_pipeline(expr, eo.gen(), pc, cs, sc, binding);
}

std::map<std::string, std::int64_t> parse_extents(const std::string& text,
                                                  const ContractionExpr& expr) {
  std::map<std::string, std::int64_t> out;
  std::optional<std::int64_t> all;
  std::istringstream in(text);
  std::string item;
  auto number = [&](const std::string& s) {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || v < 1) throw UsageError("bad extent '" + s + "' in --random");
    return static_cast<std::int64_t>(v);
  };
  while (std::getline(in, item, ',')) {
    auto eq = item.find('=');
    if (eq == std::string::npos)
      all = number(item);
    else
      out[item.substr(0, eq)] = number(item.substr(eq + 1));
  }
  for (const auto& idx : expr.all_indices()) {
    if (out.contains(idx.bound())) continue;
    if (!all) throw UsageError("--random gives no extent for " + idx.bound());
    out[idx.bound()] = *all;
  }
  return out;
}

TensorSet load_tensors(const std::vector<std::string>& specs, const ContractionExpr& expr) {
  TensorSet t;
  for (const auto& spec : specs) {
    auto eq = spec.find('=');
    if (eq == std::string::npos) throw UsageError("--tensor expects NAME=FILE, got '" + spec + "'");
    std::string name = spec.substr(0, eq), path = spec.substr(eq + 1);
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read " + path);
    auto [dims, entries] = read_coordinate_text(in);
    auto it = std::ranges::find(expr.inputs, name, &TensorAccess::tensor);
    if (it == expr.inputs.end()) throw UsageError("tensor " + name + " is not an input");
    SparseCsf csf = SparseCsf::from_entries(dims, entries);
    if (it->is_sparse())
      t.sparse[name] = std::move(csf);
    else
      t.dense[name] = csf.to_dense();
  }
  for (const auto& in : expr.inputs)
    if (!t.sparse.contains(in.tensor) && !t.dense.contains(in.tensor))
      throw UsageError("no data for input " + in.tensor);
  return t;
}

int run(int argc, char** argv) {
  CLI::App app{"Schedule space exploration for sparse tensor contractions"};
  app.require_subcommand(1);

  ExprOpts eo;
  PruneOpts po;
  std::string out_path;

  auto* enumerate = app.add_subcommand("enumerate", "write every schedule");
  eo.add(enumerate);
  enumerate->add_option("-o,--out", out_path, "output file ('-' for stdout)")->default_val("schedules.json");

  auto* prune = app.add_subcommand("prune", "compile-time stages 1 to 3");
  eo.add(prune);
  po.add(prune);
  prune->add_option("-o,--out", out_path, "output file")->default_val("frontier.json");

  std::string bounds_path, tie = "hash";
  std::int64_t llc_bytes = 0;
  double llc_fraction = 0.5;
  auto* select = app.add_subcommand("select", "all stages, concrete binding included");
  eo.add(select);
  po.add(select);
  select->add_option("--bounds", bounds_path, "binding JSON")->required();
  select->add_option("--llc-bytes", llc_bytes, "last level cache size")->required();
  select->add_option("--llc-fraction", llc_fraction, "share of the LLC temporaries may use")->capture_default_str();
  select->add_option("--tie-break", tie, "hash or random:SEED")->capture_default_str();
  select->add_option("-o,--out", out_path, "report file")->default_val("report.json");

  std::string random_dims = "5", sparsities = "0.1,0.3,1.0", id;
  std::uint64_t seed = 1;
  std::vector<std::string> tensor_files;
  auto* verify = app.add_subcommand("verify", "oracle, trip count and linearization checks");
  eo.add(verify);
  verify->add_option("--random", random_dims, "extents: N for all, or I=5,L=4,...")->capture_default_str();
  verify->add_option("--sparsity", sparsities, "comma-separated sparsities")->capture_default_str();
  verify->add_option("--seed", seed, "generator seed")->capture_default_str();
  verify->add_option("--tensor", tensor_files, "NAME=FILE coordinate text (repeatable)");
  verify->add_option("--id", id, "check one schedule only");

  std::string schedules_path, format = "pseudo";
  auto* emit_cmd = app.add_subcommand("emit", "source text for one schedule");
  emit_cmd->add_option("--schedules", schedules_path, "schedules JSON from enumerate");
  eo.add(emit_cmd, false);
  emit_cmd->add_option("--id", id, "schedule id")->required();
  emit_cmd->add_option("--format", format, "pseudo or c")->capture_default_str();
  emit_cmd->add_option("-o,--out", out_path, "output file")->default_val("-");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  if (enumerate->parsed()) {
    ContractionExpr expr = eo.parse();
    std::vector<Candidate> all;
    for (auto& s : gen_schedules(expr, eo.gen())) all.push_back(make_candidate(std::move(s)));
    write_out(out_path, schedules_to_json(expr, eo.gen(), all).dump(2) + "\n");
    std::cerr << all.size() << " schedules\n";
    return 0;
  }

  if (prune->parsed()) {
    PipelineConfig pc;
    Report r = pipeline(eo, po, pc, std::nullopt);
    print_warnings(r);
    write_out(out_path, report_to_json(r, pc).dump(2) + "\n");
    for (const auto& c : r.counts) std::cerr << c.stage << ": " << c.schedules << " schedules, " << c.buckets << " buckets\n";
    return 0;
  }

  if (select->parsed()) {
    PipelineConfig pc;
    pc.llc_bytes = llc_bytes;
    pc.llc_fraction = llc_fraction;
    pc.tie_break = parse_tie_break(tie);
    Binding b = binding_from_json(read_json_file(bounds_path));
    Report r = pipeline(eo, po, pc, b);
    print_warnings(r);
    write_out(out_path, report_to_json(r, pc).dump(2) + "\n");
    if (r.chosen) std::cout << r.chosen->schedule.id << "  " << pretty(r.chosen->schedule.graph) << "\n";
    return 0;
  }

  if (verify->parsed()) {
    ContractionExpr expr = eo.parse();
    std::vector<Schedule> schedules = gen_schedules(expr, eo.gen());
    if (!id.empty()) {
      std::erase_if(schedules, [&](const Schedule& s) { return s.id != id; });
      if (schedules.empty()) throw ValidationError("unknown schedule id " + id);
    }
    std::vector<TensorSet> inputs;
    std::vector<std::string> labels;
    if (!tensor_files.empty()) {
      inputs.push_back(load_tensors(tensor_files, expr));
      labels.push_back("files");
    } else {
      auto extents = parse_extents(random_dims, expr);
      std::istringstream in(sparsities);
      std::string item;
      while (std::getline(in, item, ',')) {
        double s = std::stod(item);
        if (!(s > 0 && s <= 1)) throw UsageError("sparsity must lie in (0, 1]");
        inputs.push_back(random_tensors(expr, extents, s, seed));
        labels.push_back("sparsity " + item);
      }
    }
    std::size_t failures = 0, checks = 0;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      DenseTensor ref = reference_contract(expr, inputs[k].densified());
      std::size_t bad = 0;
      for (const auto& s : schedules) {
        CheckResult c = check_schedule(s, inputs[k], ref);
        ++checks;
        if (c.ok()) continue;
        ++bad;
        std::cerr << "FAIL " << s.id << " (" << labels[k] << "): values " << c.values_ok
                  << " trips " << c.trips << " vs " << c.predicted << " linear " << c.linear_ok << "\n";
      }
      failures += bad;
      std::cout << labels[k] << ": " << schedules.size() - bad << "/" << schedules.size() << " schedules ok\n";
    }
    std::cout << (failures ? "FAILED " : "ok ") << checks - failures << "/" << checks << " checks\n";
    return failures ? 2 : 0;
  }

  if (emit_cmd->parsed()) {
    std::vector<Schedule> schedules;
    if (!schedules_path.empty()) {
      schedules = schedules_from_json(read_json_file(schedules_path)).schedules;
    } else if (!eo.expr.empty()) {
      schedules = gen_schedules(eo.parse(), eo.gen());
    } else {
      throw UsageError("emit needs --schedules or --expr");
    }
    auto it = std::ranges::find(schedules, id, &Schedule::id);
    if (it == schedules.end()) throw ValidationError("unknown schedule id " + id);
    write_out(out_path, emit(*it, parse_emit_format(format)));
    return 0;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
