#pragma once

// JSON documents: schedule lists, binding and constraint files, pipeline
// reports. Every writer is deterministic; every reader throws ValidationError
// on malformed input.

#include <string>
#include <vector>

#include <json.hpp>

#include "bigsched/enumerate.hpp"
#include "bigsched/prune.hpp"
#include "bigsched/smt.hpp"

namespace bigsched {

using Json = nlohmann::ordered_json;

Json access_to_json(const TensorAccess& a);
TensorAccess access_from_json(const Json& j);

Json graph_to_json(const Big& g);
Big graph_from_json(const Json& j);

/// Id, depths, polynomials, temporaries, one-line form and graph.
Json candidate_to_json(const Candidate& c);

/// `{"B": "ccc"}` for every input with a compressed level.
Json formats_to_json(const ContractionExpr& expr);
Formats formats_from_json(const Json& j);

Json schedules_to_json(const ContractionExpr& expr, const GenConfig& gen,
                       const std::vector<Candidate>& candidates);

struct ScheduleDoc {
  std::shared_ptr<const ContractionExpr> expr;
  std::vector<Schedule> schedules;
};

/// Reads a schedules document back; graphs are revalidated and ids checked.
ScheduleDoc schedules_from_json(const Json& j);

/// `{"bounds": {"I": 1800}, "sparsity": {"B": 0.08}, "nnz": {"nnz(B,1)": 5},
/// "elem_bytes": 4}`; only `bounds` is required.
Binding binding_from_json(const Json& j);
Json binding_to_json(const Binding& b);

/// `{"ranges": {"I": [1, 1800], "s(B)": [0.001, 0.01]}, "user": ["J = 2*I"]}`.
/// Range keys are symbol texts; `"sparsity": {"B": [lo, hi]}` is accepted too.
ConstraintSet constraints_from_json(const Json& j, const ContractionExpr& expr);

Json report_to_json(const Report& r, const PipelineConfig& cfg);

/// Parses text, mapping parse errors to ValidationError.
Json parse_json(const std::string& text, const std::string& what);
Json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace bigsched
