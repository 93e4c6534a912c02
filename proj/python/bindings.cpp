// Python module: every call takes and returns plain text or JSON strings so
// the Python side works with dicts and lists.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <optional>

#include "bigsched/emit.hpp"
#include "bigsched/error.hpp"
#include "bigsched/exec.hpp"
#include "bigsched/json_io.hpp"
#include "bigsched/verify.hpp"

namespace py = pybind11;
using namespace bigsched;

namespace {

ContractionExpr parse(const std::string& expr, const std::vector<std::string>& sparse) {
  Formats f;
  for (const auto& flag : sparse) add_format_flag(f, flag);
  return parse_einsum(expr, f);
}

GenConfig gen_config(int max_mem_depth, bool split_b) {
  GenConfig g;
  g.max_memory_depth = max_mem_depth;
  g.enable_split_mode_b = split_b;
  return g;
}

std::string enumerate_json(const std::string& expr, const std::vector<std::string>& sparse,
                           int max_mem_depth, bool split_b) {
  ContractionExpr e = parse(expr, sparse);
  GenConfig g = gen_config(max_mem_depth, split_b);
  std::vector<Candidate> cs;
  for (auto& s : gen_schedules(e, g)) cs.push_back(make_candidate(std::move(s)));
  return schedules_to_json(e, g, cs).dump();
}

std::string pipeline_json(const std::string& expr, const std::vector<std::string>& sparse,
                          const std::optional<std::string>& bounds,
                          const std::optional<std::string>& constraints, std::int64_t llc_bytes,
                          double llc_fraction, int mem_threshold, bool skip_stage2, bool stage3,
                          const std::string& solver_path, double timeout, const std::string& tie_break,
                          int max_mem_depth) {
  ContractionExpr e = parse(expr, sparse);
  PipelineConfig cfg;
  cfg.mem_depth_threshold = mem_threshold;
  cfg.llc_bytes = llc_bytes;
  cfg.llc_fraction = llc_fraction;
  cfg.skip_stage2 = skip_stage2;
  cfg.skip_stage3 = !(stage3 || constraints);
  cfg.tie_break = parse_tie_break(tie_break);
  SolverConfig solver;
  solver.path = solver_path.empty() ? default_solver_path() : solver_path;
  solver.timeout_s = timeout;
  if (!cfg.skip_stage3 && !solver_path.empty() && resolve_solver(solver.path).empty())
    throw SolverError("solver '" + solver.path + "' not found");
  ConstraintSet cs = constraints ? constraints_from_json(parse_json(*constraints, "constraints"), e)
                                 : make_constraints(e);
  std::optional<Binding> b;
  if (bounds) b = binding_from_json(parse_json(*bounds, "bounds"));
  py::gil_scoped_release release;
  Report r = run_pipeline(e, gen_config(max_mem_depth, true), cfg, cs, solver, b);
  return report_to_json(r, cfg).dump();
}

const Schedule& find(const std::vector<Schedule>& all, const std::string& id) {
  auto it = std::ranges::find(all, id, &Schedule::id);
  if (it == all.end()) throw ValidationError("no schedule with id " + id);
  return *it;
}

std::string emit_text(const std::string& expr, const std::vector<std::string>& sparse,
                      const std::string& id, const std::string& format) {
  ContractionExpr e = parse(expr, sparse);
  auto all = gen_schedules(e);
  return emit(find(all, id), parse_emit_format(format));
}

py::dict verify_random(const std::string& expr, const std::vector<std::string>& sparse,
                       const std::map<std::string, std::int64_t>& extents,
                       const std::vector<double>& sparsities, std::uint64_t seed,
                       const std::optional<std::string>& id) {
  ContractionExpr e = parse(expr, sparse);
  auto all = gen_schedules(e);
  std::vector<Schedule> chosen;
  if (id)
    chosen.push_back(find(all, *id));
  else
    chosen = all;
  std::size_t checks = 0, failed = 0;
  std::vector<std::string> bad;
  {
    py::gil_scoped_release release;
    std::uint64_t k = seed;
    for (double s : sparsities) {
      TensorSet t = random_tensors(e, extents, s, k++);
      DenseTensor ref = reference_contract(e, t.densified());
      for (const auto& sc : chosen) {
        ++checks;
        if (!check_schedule(sc, t, ref).ok()) {
          ++failed;
          if (std::ranges::find(bad, sc.id) == bad.end()) bad.push_back(sc.id);
        }
      }
    }
  }
  py::dict out;
  out["checks"] = checks;
  out["failed"] = failed;
  out["failing_ids"] = bad;
  return out;
}

double evaluate_text(const std::string& poly, const std::string& binding, const std::string& expr,
                     const std::vector<std::string>& sparse) {
  Binding b = binding_from_json(parse_json(binding, "binding"));
  if (!expr.empty()) attach_dims(b, parse(expr, sparse));
  return evaluate(parse_poly(poly), b);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Schedule space exploration for sparse tensor contractions";

  static py::exception<Error> base(m, "BigschedError");
  static py::exception<UsageError> usage(m, "UsageError", base.ptr());
  static py::exception<ValidationError> validation(m, "ValidationError", base.ptr());
  static py::exception<SolverError> solver(m, "SolverError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const UsageError& e) {
      PyErr_SetString(usage.ptr(), e.what());
    } catch (const ValidationError& e) {
      PyErr_SetString(validation.ptr(), e.what());
    } catch (const SolverError& e) {
      PyErr_SetString(solver.ptr(), e.what());
    } catch (const Error& e) {
      PyErr_SetString(base.ptr(), e.what());
    }
  });

  m.def("parse_einsum", [](const std::string& expr, const std::vector<std::string>& sparse) {
    return parse(expr, sparse).str();
  }, py::arg("expr"), py::arg("sparse") = std::vector<std::string>{});
  m.def("enumerate_json", &enumerate_json, py::arg("expr"), py::arg("sparse"), py::arg("max_mem_depth") = 2,
        py::arg("split_b") = true);
  m.def("pipeline_json", &pipeline_json, py::arg("expr"), py::arg("sparse"), py::arg("bounds"),
        py::arg("constraints"), py::arg("llc_bytes"), py::arg("llc_fraction"), py::arg("mem_threshold"),
        py::arg("skip_stage2"), py::arg("stage3"), py::arg("solver"), py::arg("timeout"),
        py::arg("tie_break"), py::arg("max_mem_depth"));
  m.def("emit", &emit_text, py::arg("expr"), py::arg("sparse"), py::arg("id"), py::arg("format") = "pseudo");
  m.def("verify_random", &verify_random, py::arg("expr"), py::arg("sparse"), py::arg("extents"),
        py::arg("sparsities"), py::arg("seed") = 1, py::arg("id") = std::nullopt);
  m.def("evaluate", &evaluate_text, py::arg("poly"), py::arg("binding"), py::arg("expr") = "",
        py::arg("sparse") = std::vector<std::string>{});
  m.def("solver_available", [](const std::string& path) {
    return !resolve_solver(path.empty() ? default_solver_path() : path).empty();
  }, py::arg("path") = "");
}
