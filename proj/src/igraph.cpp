#include "bigsched/igraph.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <map>

#include "bigsched/error.hpp"

namespace bigsched {

IndexSet Body::indices() const {
  IndexSet out = indices_of(lhs);
  for (const auto& f : factors) out.insert(f.indices.begin(), f.indices.end());
  return out;
}

TensorAccess TempTensor::access() const {
  TensorAccess a;
  a.tensor = name;
  a.indices = indices;
  a.levels.assign(indices.size(), Level::Dense);
  a.temporary = true;
  return a;
}

std::string TempTensor::str() const {
  if (indices.empty()) return name;
  return access().str();
}

Big::Big(Lig lig) : v_(std::move(lig)) {}
Big::Big(BigNode node) : v_(std::make_shared<const BigNode>(std::move(node))) {}

bool Big::operator==(const Big& other) const {
  if (is_lig() != other.is_lig()) return false;
  if (is_lig()) return lig() == other.lig();
  const BigNode& a = node();
  const BigNode& b = other.node();
  return a.fused == b.fused && a.temp == b.temp && a.producer == b.producer &&
         a.consumer == b.consumer;
}

Lig make_lig(const ContractionExpr& expr, IndexList order) {
  return Lig{std::move(order), Body{expr.output, expr.inputs}};
}

namespace {

std::string join(const IndexList& list, const char* sep = ",") {
  std::string out;
  for (const auto& idx : list) out += (out.empty() ? "" : sep) + idx.name;
  return out;
}

IndexList restrict_order(const IndexList& order, const IndexSet& keep) {
  IndexList out;
  for (const auto& idx : order)
    if (keep.contains(idx)) out.push_back(idx);
  return out;
}

bool contains(const IndexList& list, const IndexVar& idx) {
  return std::ranges::find(list, idx) != list.end();
}

void collect_names(const Big& g, std::set<std::string>& out) {
  if (g.is_lig()) {
    out.insert(g.lig().body.lhs.tensor);
    for (const auto& f : g.lig().body.factors) out.insert(f.tensor);
    return;
  }
  out.insert(g.node().temp.name);
  collect_names(g.node().producer, out);
  collect_names(g.node().consumer, out);
}

IndexList bound_at(const Big& graph, const Path& path) {
  IndexList bound;
  const Big* cur = &graph;
  for (int step : path) {
    if (cur->is_lig()) throw ValidationError("path leaves the graph at a linear section");
    const BigNode& n = cur->node();
    bound.insert(bound.end(), n.fused.begin(), n.fused.end());
    cur = step == 0 ? &n.producer : &n.consumer;
  }
  return bound;
}

Big replace_at(const Big& graph, const Path& path, std::size_t depth, const Big& sub) {
  if (depth == path.size()) return sub;
  const BigNode& n = graph.node();
  BigNode copy = n;
  if (path[depth] == 0)
    copy.producer = replace_at(n.producer, path, depth + 1, sub);
  else
    copy.consumer = replace_at(n.consumer, path, depth + 1, sub);
  return Big(std::move(copy));
}

void check_path(const Path& path) {
  for (int step : path)
    if (step != 0 && step != 1) throw UsageError("path entries must be 0 or 1");
}

std::string path_str(const Path& path) {
  std::string out = "{";
  for (std::size_t i = 0; i < path.size(); ++i) out += (i ? "," : "") + std::to_string(path[i]);
  return out + "}";
}

}  // namespace

IndexList temp_indices(std::span<const TensorAccess> producer,
                       std::span<const TensorAccess> consumer, const TensorAccess& output,
                       std::span<const IndexVar> order) {
  IndexSet visible = indices_of(consumer);
  visible.insert(output.indices.begin(), output.indices.end());
  IndexSet wanted;
  for (const auto& idx : indices_of(producer))
    if (visible.contains(idx)) wanted.insert(idx);

  IndexList out;
  for (const auto& idx : order)
    if (wanted.contains(idx) && !contains(out, idx)) out.push_back(idx);
  for (const auto& acc : producer)
    for (const auto& idx : acc.indices)
      if (wanted.contains(idx) && !contains(out, idx)) out.push_back(idx);
  return out;
}

const Big& subtree(const Big& graph, const Path& path) {
  check_path(path);
  const Big* cur = &graph;
  for (int step : path) {
    if (cur->is_lig()) throw ValidationError("path " + path_str(path) + " leaves the graph");
    cur = step == 0 ? &cur->node().producer : &cur->node().consumer;
  }
  return *cur;
}

Big loopfuse(const Big& graph, const Path& path, int loc, bool pol, std::string temp_name) {
  const Big& target = subtree(graph, path);
  if (!target.is_lig())
    throw ValidationError("path " + path_str(path) + " does not address a linear section");
  const Lig& lig = target.lig();
  const int n = static_cast<int>(lig.body.factors.size());
  if (loc < 1 || loc >= n)
    throw ValidationError("split position " + std::to_string(loc) + " out of range for " +
                          std::to_string(n) + " factors");

  const int p_begin = pol ? 0 : n - loc;
  const int p_end = pol ? loc : n;
  std::vector<TensorAccess> prod, cons;
  for (int f = 0; f < n; ++f)
    (f >= p_begin && f < p_end ? prod : cons).push_back(lig.body.factors[f]);

  IndexList bound = bound_at(graph, path);
  IndexSet bound_set(bound.begin(), bound.end());
  IndexList tidx;
  for (const auto& idx : temp_indices(prod, cons, lig.body.lhs, lig.order))
    if (!bound_set.contains(idx)) tidx.push_back(idx);

  if (temp_name.empty()) {
    std::set<std::string> used;
    collect_names(graph, used);
    for (int k = 1;; ++k)
      if (!used.contains("t" + std::to_string(k))) {
        temp_name = "t" + std::to_string(k);
        break;
      }
  }

  IndexSet cons_idx = indices_of(cons);
  cons_idx.insert(lig.body.lhs.indices.begin(), lig.body.lhs.indices.end());
  IndexList p_order = restrict_order(lig.order, indices_of(prod));
  IndexList c_order = restrict_order(lig.order, cons_idx);
  std::size_t f = 0;
  while (f < p_order.size() && f < c_order.size() && p_order[f] == c_order[f]) ++f;
  IndexList fused(p_order.begin(), p_order.begin() + static_cast<std::ptrdiff_t>(f));

  TempTensor temp{temp_name, {}};
  for (const auto& idx : tidx)
    if (!contains(fused, idx)) temp.indices.push_back(idx);

  Lig p_lig{IndexList(p_order.begin() + static_cast<std::ptrdiff_t>(f), p_order.end()),
            Body{temp.access(), prod}};
  std::vector<TensorAccess> c_factors = cons;
  c_factors.insert(c_factors.begin() + (pol ? 0 : static_cast<std::ptrdiff_t>(cons.size())),
                   temp.access());
  Lig c_lig{IndexList(c_order.begin() + static_cast<std::ptrdiff_t>(f), c_order.end()),
            Body{lig.body.lhs, c_factors}};

  Big result = replace_at(graph, path, 0, Big(BigNode{fused, Big(p_lig), Big(c_lig), temp}));
  auto violations = validate_big(result);
  if (!violations.empty()) throw ValidationError("loopfuse refused: " + violations.front());
  return result;
}

Big reorder(const Big& graph, const Path& path, const IndexList& order) {
  const Big& target = subtree(graph, path);
  if (!target.is_lig())
    throw ValidationError("path " + path_str(path) + " does not address a linear section");
  const Lig& lig = target.lig();
  IndexList a = lig.order, b = order;
  std::ranges::sort(a);
  std::ranges::sort(b);
  if (a != b || std::ranges::adjacent_find(b) != b.end())
    throw ValidationError("reorder: [" + join(order) + "] is not a permutation of [" +
                          join(lig.order) + "]");
  Big result = replace_at(graph, path, 0, Big(Lig{order, lig.body}));
  auto violations = validate_big(result);
  if (!violations.empty()) throw ValidationError("reorder refused: " + violations.front());
  return result;
}

namespace {

bool accesses_sparse(const Lig& lig) {
  if (lig.body.lhs.is_sparse()) return true;
  return std::ranges::any_of(lig.body.factors, [](const auto& f) { return f.is_sparse(); });
}

}  // namespace

Lig linearize(const Big& graph) {
  if (graph.is_lig()) return graph.lig();
  const BigNode& n = graph.node();
  Lig p = linearize(n.producer);
  Lig c = linearize(n.consumer);

  std::vector<TensorAccess> factors;
  bool substituted = false;
  for (const auto& f : c.body.factors) {
    if (f.tensor == n.temp.name && !substituted) {
      factors.insert(factors.end(), p.body.factors.begin(), p.body.factors.end());
      substituted = true;
    } else {
      factors.push_back(f);
    }
  }
  if (!substituted) throw ValidationError("consumer never reads temporary " + n.temp.name);

  // The side holding the sparse tensor keeps its order; the other side's
  // extra loops follow.
  const Lig& first = accesses_sparse(p) && !accesses_sparse(c) ? p : c;
  const Lig& second = &first == &p ? c : p;
  IndexList order = n.fused;
  for (const auto& idx : first.order) order.push_back(idx);
  for (const auto& idx : second.order)
    if (!contains(order, idx)) order.push_back(idx);
  return Lig{order, Body{c.body.lhs, factors}};
}

namespace {

bool reads_tensor(const Big& g, const std::string& name) {
  if (g.is_lig())
    return std::ranges::any_of(g.lig().body.factors, [&](const auto& f) { return f.tensor == name; });
  return reads_tensor(g.node().producer, name) || reads_tensor(g.node().consumer, name);
}

void collect_sparse(const Big& g, std::vector<TensorAccess>& out) {
  if (g.is_lig()) {
    for (const auto& f : g.lig().body.factors)
      if (f.is_sparse()) out.push_back(f);
    return;
  }
  collect_sparse(g.node().producer, out);
  collect_sparse(g.node().consumer, out);
}

bool has_cycle(const std::set<Precedence>& edges) {
  std::map<IndexVar, int> indegree;
  for (const auto& [a, b] : edges) {
    indegree[a];
    ++indegree[b];
  }
  std::vector<IndexVar> ready;
  for (const auto& [v, d] : indegree)
    if (d == 0) ready.push_back(v);
  std::size_t seen = 0;
  while (!ready.empty()) {
    IndexVar v = ready.back();
    ready.pop_back();
    ++seen;
    for (const auto& [a, b] : edges)
      if (a == v && --indegree[b] == 0) ready.push_back(b);
  }
  return seen != indegree.size();
}

void validate_rec(const Big& g, const IndexList& above, std::vector<std::string>& out) {
  if (g.is_lig()) {
    const Lig& lig = g.lig();
    IndexList full = above;
    full.insert(full.end(), lig.order.begin(), lig.order.end());
    IndexSet seen;
    for (const auto& idx : full)
      if (!seen.insert(idx).second)
        out.push_back("index " + idx.name + " repeats on the path [" + join(full) + "]");
    for (const auto& idx : lig.body.indices())
      if (!seen.contains(idx))
        out.push_back("index " + idx.name + " of " + lig.body.lhs.str() +
                      " body has no enclosing loop");
    std::vector<TensorAccess> accesses = lig.body.factors;
    accesses.push_back(lig.body.lhs);
    for (const auto& acc : accesses) {
      if (!acc.is_sparse()) continue;
      if (!respects_sparse_order(full, std::span<const TensorAccess>(&acc, 1)))
        out.push_back("path [" + join(full) + "] breaks the access order of " + acc.str());
    }
    return;
  }

  const BigNode& n = g.node();
  IndexList full = above;
  full.insert(full.end(), n.fused.begin(), n.fused.end());
  validate_rec(n.producer, full, out);
  validate_rec(n.consumer, full, out);

  IndexSet p_loops = loops_of(n.producer);
  IndexSet c_loops = loops_of(n.consumer);
  IndexSet shared;
  for (const auto& idx : p_loops)
    if (c_loops.contains(idx)) shared.insert(idx);
  IndexSet temp_set(n.temp.indices.begin(), n.temp.indices.end());
  if (temp_set.size() != n.temp.indices.size())
    out.push_back("temporary " + n.temp.str() + " repeats an index");
  if (temp_set != shared) {
    IndexList s(shared.begin(), shared.end());
    out.push_back("temporary " + n.temp.str() + " does not match the shared unfused loops {" +
                  join(s) + "}");
  }
  if (result_tensor(n.producer) != n.temp.name)
    out.push_back("producer does not write temporary " + n.temp.name);
  if (!reads_tensor(n.consumer, n.temp.name))
    out.push_back("consumer does not read temporary " + n.temp.name);

  // Shared indices need one relative order that every sparse access on
  // either side can follow.
  std::vector<TensorAccess> sparse;
  collect_sparse(n.producer, sparse);
  collect_sparse(n.consumer, sparse);
  std::set<Precedence> edges;
  for (const auto& acc : sparse) {
    IndexList kept = restrict_order(acc.indices, temp_set);
    for (std::size_t a = 0; a + 1 < kept.size(); ++a) edges.insert({kept[a], kept[a + 1]});
  }
  if (has_cycle(edges))
    out.push_back("shared indices of " + n.temp.str() +
                  " admit no common order in producer and consumer");
}

}  // namespace

std::vector<std::string> validate_big(const Big& graph) {
  std::vector<std::string> out;
  validate_rec(graph, {}, out);
  return out;
}

namespace {

bool touches(const Big& g, const std::string& tensor) {
  if (g.is_lig()) {
    const Body& b = g.lig().body;
    if (b.lhs.tensor == tensor) return true;
    return std::ranges::any_of(b.factors, [&](const auto& f) { return f.tensor == tensor; });
  }
  return touches(g.node().producer, tensor) || touches(g.node().consumer, tensor);
}

struct PathState {
  IndexList path;
  std::vector<bool> sparse;
};

void leaves_rec(const Big& g, const TensorAccess* sp, PathState st, std::vector<LeafPath>& out) {
  bool below = sp && touches(g, sp->tensor);
  auto push_loop = [&](const IndexVar& idx) {
    bool is_sparse = false;
    if (below) {
      std::size_t mode = sp->mode_of(idx);
      if (mode != std::string::npos) {
        is_sparse = true;
        for (std::size_t m = 0; m < mode; ++m)
          if (!contains(st.path, sp->indices[m])) is_sparse = false;
      }
    }
    st.path.push_back(idx);
    st.sparse.push_back(is_sparse);
  };

  if (g.is_lig()) {
    for (const auto& idx : g.lig().order) push_loop(idx);
    LeafPath leaf;
    leaf.leaf = &g.lig();
    leaf.path = st.path;
    leaf.sparse = st.sparse;
    leaf.sparse_depth = static_cast<int>(std::ranges::count(st.sparse, true));
    out.push_back(std::move(leaf));
    return;
  }
  const BigNode& n = g.node();
  for (const auto& idx : n.fused) push_loop(idx);
  leaves_rec(n.producer, sp, st, out);
  leaves_rec(n.consumer, sp, st, out);
}

}  // namespace

std::vector<LeafPath> leaf_paths(const Big& graph, const TensorAccess* sparse) {
  std::vector<LeafPath> out;
  leaves_rec(graph, sparse, {}, out);
  return out;
}

const TensorAccess* find_sparse_access(const Big& graph) {
  if (graph.is_lig()) {
    for (const auto& f : graph.lig().body.factors)
      if (f.is_sparse()) return &f;
    return nullptr;
  }
  if (auto* p = find_sparse_access(graph.node().producer)) return p;
  return find_sparse_access(graph.node().consumer);
}

namespace {

void temps_rec(const Big& g, std::vector<TempTensor>& out) {
  if (g.is_lig()) return;
  out.push_back(g.node().temp);
  temps_rec(g.node().producer, out);
  temps_rec(g.node().consumer, out);
}

}  // namespace

std::vector<TempTensor> temps_of(const Big& graph) {
  std::vector<TempTensor> out;
  temps_rec(graph, out);
  return out;
}

int loop_depth(const Big& graph) {
  if (graph.is_lig()) return static_cast<int>(graph.lig().order.size());
  const BigNode& n = graph.node();
  return static_cast<int>(n.fused.size()) + std::max(loop_depth(n.producer), loop_depth(n.consumer));
}

int mem_depth(const Big& graph) {
  if (graph.is_lig()) return 0;
  const BigNode& n = graph.node();
  return std::max({static_cast<int>(n.temp.arity()), mem_depth(n.producer), mem_depth(n.consumer)});
}

IndexSet loops_of(const Big& graph) {
  if (graph.is_lig()) return IndexSet(graph.lig().order.begin(), graph.lig().order.end());
  const BigNode& n = graph.node();
  IndexSet out(n.fused.begin(), n.fused.end());
  for (const auto& idx : loops_of(n.producer)) out.insert(idx);
  for (const auto& idx : loops_of(n.consumer)) out.insert(idx);
  return out;
}

std::string result_tensor(const Big& graph) {
  if (graph.is_lig()) return graph.lig().body.lhs.tensor;
  return result_tensor(graph.node().consumer);
}

namespace {

Big rename_rec(const Big& g, const std::map<std::string, std::string>& names) {
  auto fix = [&](TensorAccess a) {
    if (auto it = names.find(a.tensor); it != names.end()) a.tensor = it->second;
    return a;
  };
  if (g.is_lig()) {
    Lig lig = g.lig();
    lig.body.lhs = fix(lig.body.lhs);
    for (auto& f : lig.body.factors) f = fix(f);
    return Big(std::move(lig));
  }
  const BigNode& n = g.node();
  TempTensor temp = n.temp;
  if (auto it = names.find(temp.name); it != names.end()) temp.name = it->second;
  return Big(BigNode{n.fused, rename_rec(n.producer, names), rename_rec(n.consumer, names), temp});
}

}  // namespace

Big canonicalize_temps(const Big& graph, const std::set<std::string>& reserved) {
  std::map<std::string, std::string> names;
  int next = 1;
  for (const auto& t : temps_of(graph)) {
    std::string name;
    do name = "t" + std::to_string(next++);
    while (reserved.contains(name));
    names[t.name] = name;
  }
  return rename_rec(graph, names);
}

namespace {

std::string access_key(const TensorAccess& a) {
  if (!a.temporary) return a.str() + level_pattern(a.levels);
  IndexList sorted = a.indices;
  std::ranges::sort(sorted);
  return a.tensor + "(" + join(sorted) + ")";
}

std::string key_rec(const Big& g) {
  if (g.is_lig()) {
    const Lig& lig = g.lig();
    std::vector<std::string> fs;
    for (const auto& f : lig.body.factors) fs.push_back(access_key(f));
    std::ranges::sort(fs);
    std::string out = "L(" + join(lig.order) + "|" + access_key(lig.body.lhs);
    for (const auto& f : fs) out += ";" + f;
    return out + ")";
  }
  const BigNode& n = g.node();
  IndexList sorted = n.temp.indices;
  std::ranges::sort(sorted);
  return "N(" + join(n.fused) + "|" + n.temp.name + ":" + join(sorted) + "|" + key_rec(n.producer) +
         "|" + key_rec(n.consumer) + ")";
}

}  // namespace

std::string structural_key(const Big& graph) { return key_rec(graph); }

std::string schedule_id(const Big& graph) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : structural_key(graph)) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

std::string access_text(const TensorAccess& a, const IndexSet& bound) {
  std::string out = a.tensor;
  if (a.indices.empty()) return out;
  out += "(";
  for (std::size_t m = 0; m < a.indices.size(); ++m) {
    if (m) out += ",";
    out += bound.contains(a.indices[m]) ? "_" : a.indices[m].name;
  }
  return out + ")";
}

std::string body_text(const Body& b, const IndexSet& bound, const char* mul) {
  std::string out = access_text(b.lhs, bound) + " += ";
  for (std::size_t f = 0; f < b.factors.size(); ++f) {
    if (f) out += mul;
    out += access_text(b.factors[f], bound);
  }
  return out;
}

std::string pretty_rec(const Big& g, IndexSet bound) {
  if (g.is_lig()) {
    const Lig& lig = g.lig();
    return "[" + join(lig.order) + "] " + body_text(lig.body, bound, "*");
  }
  const BigNode& n = g.node();
  bound.insert(n.fused.begin(), n.fused.end());
  std::string head = n.fused.empty() ? "" : "[" + join(n.fused) + "] ";
  return head + "{ " + pretty_rec(n.producer, bound) + " ; " + pretty_rec(n.consumer, bound) + " }";
}

std::string ir_rec(const Big& g, int indent) {
  auto loops_open = [](const IndexList& order) {
    std::string out;
    for (const auto& idx : order) out += "forall(" + idx.name + ", ";
    return out;
  };
  if (g.is_lig()) {
    const Lig& lig = g.lig();
    return loops_open(lig.order) + body_text(lig.body, {}, " * ") + std::string(lig.order.size(), ')');
  }
  const BigNode& n = g.node();
  std::string pad(static_cast<std::size_t>(indent + 2), ' ');
  return loops_open(n.fused) + "where(\n" + pad + ir_rec(n.consumer, indent + 2) + ",\n" + pad +
         ir_rec(n.producer, indent + 2) + ")" + std::string(n.fused.size(), ')');
}

}  // namespace

std::string pretty(const Big& graph) { return pretty_rec(graph, {}); }

std::string to_ir(const Big& graph) { return ir_rec(graph, 0); }

Schedule make_schedule(Big graph, std::shared_ptr<const ContractionExpr> expr) {
  std::string id = schedule_id(graph);
  return Schedule{std::move(id), std::move(graph), std::move(expr)};
}

}  // namespace bigsched
