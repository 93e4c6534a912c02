#include "bigsched/json_io.hpp"

#include <fstream>
#include <sstream>

#include "bigsched/error.hpp"

namespace bigsched {

namespace {

Json index_list(const IndexList& l) {
  Json out = Json::array();
  for (const auto& idx : l) out.push_back(idx.name);
  return out;
}

IndexList index_list_from(const Json& j) {
  IndexList out;
  for (const auto& x : j) out.push_back(IndexVar{x.get<std::string>()});
  return out;
}

const Json& field(const Json& j, const char* key, const char* what) {
  if (!j.is_object() || !j.contains(key))
    throw ValidationError(std::string(what) + " is missing field '" + key + "'");
  return j.at(key);
}

// Every typed read goes through here so nlohmann type errors surface as
// validation failures.
template <class F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed ") + what + ": " + e.what());
  }
}

}  // namespace

Json access_to_json(const TensorAccess& a) {
  Json j;
  j["tensor"] = a.tensor;
  j["indices"] = index_list(a.indices);
  j["levels"] = level_pattern(a.levels);
  if (a.temporary) j["temporary"] = true;
  return j;
}

TensorAccess access_from_json(const Json& j) {
  return guarded("access", [&] {
    TensorAccess a;
    a.tensor = field(j, "tensor", "access").get<std::string>();
    a.indices = index_list_from(field(j, "indices", "access"));
    a.levels = parse_level_pattern(j.value("levels", std::string(a.indices.size(), 'd')));
    a.temporary = j.value("temporary", false);
    if (a.levels.size() != a.indices.size())
      throw ValidationError("access " + a.tensor + " has " + std::to_string(a.levels.size()) +
                            " levels for " + std::to_string(a.indices.size()) + " modes");
    return a;
  });
}

Json graph_to_json(const Big& g) {
  Json j;
  if (g.is_lig()) {
    j["order"] = index_list(g.lig().order);
    j["lhs"] = access_to_json(g.lig().body.lhs);
    Json f = Json::array();
    for (const auto& a : g.lig().body.factors) f.push_back(access_to_json(a));
    j["factors"] = std::move(f);
    return j;
  }
  const BigNode& n = g.node();
  j["fused"] = index_list(n.fused);
  j["temp"] = {{"name", n.temp.name}, {"indices", index_list(n.temp.indices)}};
  j["producer"] = graph_to_json(n.producer);
  j["consumer"] = graph_to_json(n.consumer);
  return j;
}

Big graph_from_json(const Json& j) {
  return guarded("graph", [&]() -> Big {
    if (j.contains("order")) {
      Body body{access_from_json(field(j, "lhs", "leaf")), {}};
      for (const auto& f : field(j, "factors", "leaf")) body.factors.push_back(access_from_json(f));
      return Big(Lig{index_list_from(j.at("order")), std::move(body)});
    }
    const Json& t = field(j, "temp", "node");
    TempTensor temp{field(t, "name", "temp").get<std::string>(),
                    index_list_from(field(t, "indices", "temp"))};
    return Big(BigNode{index_list_from(field(j, "fused", "node")),
                       graph_from_json(field(j, "producer", "node")),
                       graph_from_json(field(j, "consumer", "node")), std::move(temp)});
  });
}

Json candidate_to_json(const Candidate& c) {
  Json j;
  j["id"] = c.schedule.id;
  j["loop_depth"] = c.cost.loop_depth;
  j["mem_depth"] = c.cost.mem_depth;
  j["time"] = c.cost.time.str();
  j["mem"] = c.cost.mem.str();
  Json temps = Json::array();
  for (const auto& t : c.cost.temps) temps.push_back(t.str());
  j["temps"] = std::move(temps);
  j["pretty"] = pretty(c.schedule.graph);
  j["graph"] = graph_to_json(c.schedule.graph);
  return j;
}

Json formats_to_json(const ContractionExpr& expr) {
  Json j = Json::object();
  for (const auto& in : expr.inputs)
    if (in.is_sparse()) j[in.tensor] = level_pattern(in.levels);
  return j;
}

Formats formats_from_json(const Json& j) {
  return guarded("formats", [&] {
    Formats f;
    for (const auto& [name, pattern] : j.items())
      f[name] = parse_level_pattern(pattern.get<std::string>());
    return f;
  });
}

Json schedules_to_json(const ContractionExpr& expr, const GenConfig& gen,
                       const std::vector<Candidate>& candidates) {
  Json j;
  j["expr"] = expr.str();
  j["formats"] = formats_to_json(expr);
  j["config"] = {{"max_memory_depth", gen.max_memory_depth},
                 {"split_mode_b", gen.enable_split_mode_b},
                 {"dedup", gen.dedup}};
  j["count"] = candidates.size();
  Json list = Json::array();
  for (const auto& c : candidates) list.push_back(candidate_to_json(c));
  j["schedules"] = std::move(list);
  return j;
}

ScheduleDoc schedules_from_json(const Json& j) {
  return guarded("schedules document", [&] {
    ScheduleDoc doc;
    Formats formats = j.contains("formats") ? formats_from_json(j.at("formats")) : Formats{};
    doc.expr = std::make_shared<const ContractionExpr>(
        parse_einsum(field(j, "expr", "schedules document").get<std::string>(), formats));
    for (const auto& s : field(j, "schedules", "schedules document")) {
      Big g = graph_from_json(field(s, "graph", "schedule"));
      auto problems = validate_big(g);
      if (!problems.empty()) throw ValidationError("invalid schedule graph: " + problems.front());
      Schedule sched = make_schedule(std::move(g), doc.expr);
      if (s.contains("id") && s.at("id").get<std::string>() != sched.id)
        throw ValidationError("schedule id " + s.at("id").get<std::string>() +
                              " does not match its graph (" + sched.id + ")");
      doc.schedules.push_back(std::move(sched));
    }
    return doc;
  });
}

Binding binding_from_json(const Json& j) {
  return guarded("binding", [&] {
    Binding b;
    for (const auto& [k, v] : field(j, "bounds", "binding").items()) {
      double x = v.get<double>();
      if (!(x >= 1)) throw ValidationError("bound " + k + " must be >= 1");
      b.bounds[k] = x;
    }
    if (j.contains("sparsity"))
      for (const auto& [k, v] : j.at("sparsity").items()) {
        double s = v.get<double>();
        if (!(s > 0 && s <= 1)) throw ValidationError("sparsity of " + k + " must lie in (0, 1]");
        b.sparsity[k] = s;
      }
    if (j.contains("nnz"))
      for (const auto& [k, v] : j.at("nnz").items()) b.nnz[k] = v.get<double>();
    b.elem_bytes = j.value("elem_bytes", 4);
    if (b.elem_bytes <= 0) throw ValidationError("elem_bytes must be positive");
    return b;
  });
}

Json binding_to_json(const Binding& b) {
  Json j;
  j["bounds"] = Json::object();
  for (const auto& [k, v] : b.bounds) j["bounds"][k] = v;
  j["sparsity"] = Json::object();
  for (const auto& [k, v] : b.sparsity) j["sparsity"][k] = v;
  if (!b.nnz.empty()) {
    j["nnz"] = Json::object();
    for (const auto& [k, v] : b.nnz) j["nnz"][k] = v;
  }
  j["elem_bytes"] = b.elem_bytes;
  return j;
}

ConstraintSet constraints_from_json(const Json& j, const ContractionExpr& expr) {
  return guarded("constraints", [&] {
    auto pair_of = [](const std::string& key, const Json& v) {
      if (!v.is_array() || v.size() != 2)
        throw ValidationError("range for " + key + " must be [lo, hi]");
      return std::pair{v[0].get<double>(), v[1].get<double>()};
    };
    auto symbol_of = [](const std::string& text) {
      SymPoly p = parse_poly(text);
      if (p.terms().size() != 1 || p.terms().begin()->first.size() != 1 ||
          p.terms().begin()->second != 1)
        throw ValidationError("range key '" + text + "' is not a single symbol");
      return p.terms().begin()->first.front();
    };
    std::vector<Range> ranges;
    if (j.contains("ranges"))
      for (const auto& [k, v] : j.at("ranges").items()) {
        auto [lo, hi] = pair_of(k, v);
        ranges.push_back({symbol_of(k), lo, hi});
      }
    if (j.contains("sparsity"))
      for (const auto& [k, v] : j.at("sparsity").items()) {
        auto [lo, hi] = pair_of(k, v);
        ranges.push_back({Symbol::sparsity(k), lo, hi});
      }
    std::vector<Relation> user;
    if (j.contains("user"))
      for (const auto& r : j.at("user")) user.push_back(parse_relation(r.get<std::string>()));

    auto known = vocabulary(expr);
    auto check = [&](const Symbol& s) {
      if (std::ranges::find(known, s) == known.end())
        throw ValidationError("constraint symbol " + s.str() + " does not occur in " + expr.str());
    };
    for (const auto& r : ranges) check(r.symbol);
    for (const auto& r : user)
      for (const auto* p : {&r.lhs, &r.rhs})
        for (const auto& s : p->symbols()) check(s);
    return make_constraints(expr, std::move(ranges), std::move(user));
  });
}

Json report_to_json(const Report& r, const PipelineConfig& cfg) {
  Json j;
  j["expr"] = r.expr;
  j["config"] = {{"mem_depth_threshold", cfg.mem_depth_threshold},
                 {"llc_bytes", cfg.llc_bytes},
                 {"llc_fraction", cfg.llc_fraction},
                 {"skip_stage2", cfg.skip_stage2},
                 {"skip_stage3", cfg.skip_stage3},
                 {"tie_break", tie_break_str(cfg.tie_break)}};
  Json counts = Json::array();
  for (const auto& c : r.counts)
    counts.push_back({{"stage", c.stage}, {"schedules", c.schedules}, {"buckets", c.buckets}});
  j["counts"] = std::move(counts);

  Json frontier = Json::array();
  for (const auto& b : r.frontier) {
    Json ids = Json::array();
    for (const auto& m : b.members) ids.push_back(m.schedule.id);
    const auto& rep = b.members.front().cost;
    frontier.push_back({{"time", b.time.str()},
                        {"mem", b.mem.str()},
                        {"loop_depth", rep.loop_depth},
                        {"mem_depth", rep.mem_depth},
                        {"members", std::move(ids)}});
  }
  j["frontier"] = std::move(frontier);

  Json removals = Json::array();
  for (const auto& x : r.smt_removals)
    removals.push_back({{"time", x.time},
                        {"mem", x.mem},
                        {"dominator_time", x.dominator_time},
                        {"dominator_mem", x.dominator_mem}});
  j["smt"] = {{"removals", std::move(removals)}, {"unknown", r.smt_unknown}};
  j["warnings"] = r.warnings;

  if (r.chosen) {
    Json c = candidate_to_json(*r.chosen);
    c["time_value"] = r.chosen_time;
    c["aux_bytes"] = r.chosen_aux_bytes;
    c["cache_cost"] = r.chosen_cache_cost;
    j["stage4"] = {{"survivors", r.stage4_survivors}, {"fallback", r.stage4_fallback}};
    j["chosen"] = std::move(c);
  } else {
    j["chosen"] = nullptr;
  }
  return j;
}

Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("malformed JSON in " + what + ": " + e.what());
  }
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json(ss.str(), path);
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write " + path);
  out << text;
}

}  // namespace bigsched
