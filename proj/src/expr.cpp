#include "bigsched/expr.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>

#include "bigsched/error.hpp"

namespace bigsched {

std::string IndexVar::bound() const {
  std::string out = name;
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

bool TensorAccess::is_sparse() const {
  return std::ranges::any_of(levels, [](Level l) { return l == Level::Compressed; });
}

bool TensorAccess::has(const IndexVar& idx) const {
  return std::ranges::find(indices, idx) != indices.end();
}

std::size_t TensorAccess::mode_of(const IndexVar& idx) const {
  auto it = std::ranges::find(indices, idx);
  return it == indices.end() ? std::string::npos : static_cast<std::size_t>(it - indices.begin());
}

std::string TensorAccess::str() const {
  std::string out = tensor + "(";
  for (std::size_t m = 0; m < indices.size(); ++m) {
    if (m) out += ",";
    out += indices[m].name;
  }
  return out + ")";
}

const TensorAccess* ContractionExpr::sparse_input() const {
  for (const auto& in : inputs)
    if (in.is_sparse()) return &in;
  return nullptr;
}

IndexList ContractionExpr::all_indices() const {
  IndexList out = output.indices;
  out.insert(out.end(), contracted.begin(), contracted.end());
  return out;
}

std::string ContractionExpr::str() const {
  std::string out = output.str() + "=";
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (i) out += "*";
    out += inputs[i].str();
  }
  return out;
}

namespace {

class EinsumParser {
 public:
  explicit EinsumParser(std::string_view text) : text_(text) {}

  ContractionExpr parse() {
    ContractionExpr expr;
    expr.output = access();
    skip_ws();
    expect('=');
    expr.inputs.push_back(access());
    skip_ws();
    while (pos_ < text_.size() && text_[pos_] == '*') {
      ++pos_;
      expr.inputs.push_back(access());
      skip_ws();
    }
    if (pos_ != text_.size()) fail("unexpected character '" + std::string(1, text_[pos_]) + "'");
    return expr;
  }

 private:
  TensorAccess access() {
    skip_ws();
    TensorAccess acc;
    std::size_t start = pos_;
    if (pos_ >= text_.size() || !std::isalpha(static_cast<unsigned char>(text_[pos_])))
      fail("expected tensor name");
    while (pos_ < text_.size() && std::isalnum(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    acc.tensor = std::string(text_.substr(start, pos_ - start));
    skip_ws();
    expect('(');
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == ')') {
      ++pos_;
      return acc;
    }
    for (;;) {
      skip_ws();
      std::size_t idx_start = pos_;
      if (pos_ >= text_.size() || !std::islower(static_cast<unsigned char>(text_[pos_])))
        fail("expected index name (a lowercase letter with optional digits)");
      ++pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      IndexVar idx{std::string(text_.substr(idx_start, pos_ - idx_start))};
      if (acc.has(idx))
        throw ParseError("index '" + idx.name + "' repeated in access to " + acc.tensor, idx_start);
      acc.indices.push_back(idx);
      skip_ws();
      if (pos_ < text_.size() && text_[pos_] == ',') {
        ++pos_;
        continue;
      }
      expect(')');
      break;
    }
    return acc;
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  void expect(char c) {
    if (pos_ >= text_.size() || text_[pos_] != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

ContractionExpr parse_einsum(std::string_view text, const Formats& formats) {
  ContractionExpr expr = EinsumParser(text).parse();

  std::set<std::string> names;
  names.insert(expr.output.tensor);
  for (const auto& in : expr.inputs) names.insert(in.tensor);
  for (const auto& [name, levels] : formats) {
    if (!names.contains(name))
      throw ValidationError("format given for unknown tensor '" + name + "'");
  }

  auto assign_levels = [&](TensorAccess& acc) {
    auto it = formats.find(acc.tensor);
    if (it == formats.end()) {
      acc.levels.assign(acc.order(), Level::Dense);
      return;
    }
    if (it->second.size() != acc.order())
      throw ValidationError("format for '" + acc.tensor + "' has " +
                            std::to_string(it->second.size()) + " levels but the tensor has order " +
                            std::to_string(acc.order()));
    acc.levels = it->second;
  };
  assign_levels(expr.output);
  for (auto& in : expr.inputs) assign_levels(in);

  IndexSet seen(expr.output.indices.begin(), expr.output.indices.end());
  for (const auto& in : expr.inputs)
    for (const auto& idx : in.indices)
      if (!seen.contains(idx)) {
        seen.insert(idx);
        expr.contracted.push_back(idx);
      }

  validate_expr(expr);
  return expr;
}

void validate_expr(const ContractionExpr& expr, bool allow_multiple_sparse) {
  if (expr.inputs.empty()) throw ValidationError("contraction has no inputs");
  if (expr.output.is_sparse())
    throw ValidationError("output '" + expr.output.tensor + "' must be dense");

  std::map<std::string, std::size_t> arity;
  auto check_arity = [&](const TensorAccess& acc) {
    if (acc.levels.size() != acc.order())
      throw ValidationError("levels of '" + acc.tensor + "' do not match its order");
    auto [it, inserted] = arity.emplace(acc.tensor, acc.order());
    if (!inserted && it->second != acc.order())
      throw ValidationError("tensor '" + acc.tensor + "' used with different orders");
  };
  check_arity(expr.output);
  for (const auto& in : expr.inputs) check_arity(in);

  IndexSet in_idx = indices_of(expr.inputs);
  for (const auto& idx : expr.output.indices)
    if (!in_idx.contains(idx))
      throw ValidationError("output index '" + idx.name + "' does not appear in any input");

  IndexSet out_idx = indices_of(expr.output);
  IndexSet expected;
  for (const auto& idx : in_idx)
    if (!out_idx.contains(idx)) expected.insert(idx);
  if (IndexSet(expr.contracted.begin(), expr.contracted.end()) != expected)
    throw ValidationError("contracted index set is inconsistent with the accesses");

  auto sparse_count = std::ranges::count_if(expr.inputs, [](const auto& a) { return a.is_sparse(); });
  if (sparse_count > 1 && !allow_multiple_sparse)
    throw ValidationError("at most one input may have compressed levels (got " +
                          std::to_string(sparse_count) + ")");
  access_constraints(expr);
}

std::vector<Level> parse_level_pattern(std::string_view pattern) {
  std::vector<Level> out;
  for (char c : pattern) {
    if (c == 'd' || c == 'D')
      out.push_back(Level::Dense);
    else if (c == 'c' || c == 'C' || c == 's' || c == 'S')
      out.push_back(Level::Compressed);
    else
      throw UsageError("bad level pattern '" + std::string(pattern) + "' (use d/c per level)");
  }
  return out;
}

void add_format_flag(Formats& formats, std::string_view flag) {
  auto colon = flag.find(':');
  if (colon == std::string_view::npos || colon == 0)
    throw UsageError("expected NAME:pattern, got '" + std::string(flag) + "'");
  formats[std::string(flag.substr(0, colon))] = parse_level_pattern(flag.substr(colon + 1));
}

std::string level_pattern(const std::vector<Level>& levels) {
  std::string out;
  for (Level l : levels) out += l == Level::Dense ? 'd' : 'c';
  return out;
}

std::set<Precedence> access_constraints(const ContractionExpr& expr) {
  std::set<Precedence> edges;
  std::map<Precedence, std::string> origin;
  for (const auto& in : expr.inputs) {
    if (!in.is_sparse()) continue;
    for (std::size_t m = 0; m + 1 < in.indices.size(); ++m) {
      Precedence e{in.indices[m], in.indices[m + 1]};
      edges.insert(e);
      origin.emplace(e, in.str());
    }
  }

  // Kahn's algorithm; leftover nodes sit on a cycle.
  std::map<IndexVar, int> indegree;
  for (const auto& [a, b] : edges) {
    indegree[a];
    ++indegree[b];
  }
  std::vector<IndexVar> ready;
  for (const auto& [v, d] : indegree)
    if (d == 0) ready.push_back(v);
  std::size_t visited = 0;
  while (!ready.empty()) {
    IndexVar v = ready.back();
    ready.pop_back();
    ++visited;
    for (const auto& [a, b] : edges)
      if (a == v && --indegree[b] == 0) ready.push_back(b);
  }
  if (visited != indegree.size()) {
    std::set<std::string> culprits;
    for (const auto& [e, acc] : origin)
      if (indegree[e.first] > 0 && indegree[e.second] > 0) culprits.insert(acc);
    std::string list;
    for (const auto& c : culprits) list += (list.empty() ? "" : ", ") + c;
    throw ValidationError("sparse access constraints form a cycle across " + list);
  }
  return edges;
}

bool respects_sparse_order(std::span<const IndexVar> order, std::span<const TensorAccess> accesses) {
  for (const auto& acc : accesses) {
    if (!acc.is_sparse()) continue;
    std::size_t last = 0;
    bool first = true;
    for (const auto& idx : acc.indices) {
      auto it = std::ranges::find(order, idx);
      if (it == order.end()) continue;
      auto pos = static_cast<std::size_t>(it - order.begin());
      if (!first && pos < last) return false;
      last = pos;
      first = false;
    }
  }
  return true;
}

IndexSet indices_of(const TensorAccess& access) {
  return IndexSet(access.indices.begin(), access.indices.end());
}

IndexSet indices_of(std::span<const TensorAccess> accesses) {
  IndexSet out;
  for (const auto& acc : accesses) out.insert(acc.indices.begin(), acc.indices.end());
  return out;
}

}  // namespace bigsched
