#include "bigsched/sympoly.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "bigsched/error.hpp"

namespace bigsched {

std::string Symbol::str() const {
  switch (kind) {
    case Kind::Bound:
      return name;
    case Kind::PrefixNnz:
      return "nnz(" + name + "," + std::to_string(depth) + ")";
    case Kind::Sparsity:
      return "s(" + name + ")";
  }
  return name;
}

SymPoly SymPoly::constant(std::int64_t c) {
  SymPoly p;
  p.add_term({}, c);
  return p;
}

SymPoly SymPoly::of(const Symbol& s) {
  SymPoly p;
  p.add_term({s}, 1);
  return p;
}

SymPoly SymPoly::product(const std::vector<Symbol>& symbols) {
  Monomial m = symbols;
  std::ranges::sort(m);
  SymPoly p;
  p.add_term(m, 1);
  return p;
}

std::int64_t SymPoly::constant_term() const {
  auto it = terms_.find(Monomial{});
  return it == terms_.end() ? 0 : it->second;
}

std::vector<Symbol> SymPoly::symbols() const {
  std::set<Symbol> all;
  for (const auto& [m, c] : terms_) all.insert(m.begin(), m.end());
  return {all.begin(), all.end()};
}

void SymPoly::add_term(const Monomial& m, std::int64_t c) {
  if (c == 0) return;
  auto [it, inserted] = terms_.emplace(m, c);
  if (!inserted) {
    it->second += c;
    if (it->second == 0) terms_.erase(it);
  }
}

SymPoly& SymPoly::operator+=(const SymPoly& other) {
  for (const auto& [m, c] : other.terms_) add_term(m, c);
  return *this;
}

SymPoly& SymPoly::operator-=(const SymPoly& other) {
  for (const auto& [m, c] : other.terms_) add_term(m, -c);
  return *this;
}

SymPoly& SymPoly::operator*=(const SymPoly& other) {
  SymPoly out;
  for (const auto& [ma, ca] : terms_)
    for (const auto& [mb, cb] : other.terms_) {
      Monomial m;
      m.reserve(ma.size() + mb.size());
      std::ranges::merge(ma, mb, std::back_inserter(m));
      out.add_term(m, ca * cb);
    }
  *this = std::move(out);
  return *this;
}

std::string SymPoly::str() const {
  if (terms_.empty()) return "0";
  std::string out;
  bool first = true;
  for (const auto& [m, c] : terms_) {
    std::int64_t mag = c < 0 ? -c : c;
    if (first)
      out += c < 0 ? "-" : "";
    else
      out += c < 0 ? " - " : " + ";
    first = false;
    std::string body;
    for (const auto& s : m) body += (body.empty() ? "" : "*") + s.str();
    if (body.empty())
      out += std::to_string(mag);
    else if (mag == 1)
      out += body;
    else
      out += std::to_string(mag) + "*" + body;
  }
  return out;
}

namespace {

class PolyParser {
 public:
  explicit PolyParser(std::string_view text) : text_(text) {}

  SymPoly poly() {
    SymPoly out;
    skip_ws();
    int sign = 1;
    if (peek() == '-') {
      sign = -1;
      ++pos_;
    } else if (peek() == '+') {
      ++pos_;
    }
    out += term() * SymPoly::constant(sign);
    for (;;) {
      skip_ws();
      char c = peek();
      if (c != '+' && c != '-') break;
      ++pos_;
      out += term() * SymPoly::constant(c == '-' ? -1 : 1);
    }
    return out;
  }

  bool at_end() {
    skip_ws();
    return pos_ >= text_.size();
  }

  std::size_t pos() const { return pos_; }
  std::string_view rest() const { return text_.substr(pos_); }
  void advance(std::size_t n) { pos_ += n; }

 private:
  SymPoly term() {
    SymPoly out = factor();
    for (;;) {
      skip_ws();
      if (peek() != '*') break;
      ++pos_;
      out *= factor();
    }
    return out;
  }

  SymPoly factor() {
    skip_ws();
    char c = peek();
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
      return SymPoly::constant(std::stoll(std::string(text_.substr(start, pos_ - start))));
    }
    if (c == '(') {
      ++pos_;
      SymPoly inner = poly();
      skip_ws();
      expect(')');
      return inner;
    }
    if (!std::isalpha(static_cast<unsigned char>(c))) fail("expected a symbol or number");
    std::size_t start = pos_;
    while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_') ++pos_;
    std::string word(text_.substr(start, pos_ - start));
    skip_ws();
    if ((word == "nnz" || word == "s") && peek() == '(') {
      ++pos_;
      skip_ws();
      std::size_t t0 = pos_;
      while (std::isalnum(static_cast<unsigned char>(peek()))) ++pos_;
      std::string tensor(text_.substr(t0, pos_ - t0));
      if (tensor.empty()) fail("expected tensor name");
      skip_ws();
      if (word == "s") {
        expect(')');
        return SymPoly::of(Symbol::sparsity(tensor));
      }
      expect(',');
      skip_ws();
      std::size_t d0 = pos_;
      while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
      if (d0 == pos_) fail("expected level depth");
      int depth = std::stoi(std::string(text_.substr(d0, pos_ - d0)));
      skip_ws();
      expect(')');
      return SymPoly::of(Symbol::prefix_nnz(tensor, depth));
    }
    return SymPoly::of(Symbol::bound(word));
  }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError("polynomial: " + msg, pos_);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

SymPoly parse_poly(std::string_view text) {
  PolyParser p(text);
  SymPoly out = p.poly();
  if (!p.at_end()) throw ParseError("polynomial: trailing input", p.pos());
  return out;
}

std::string Relation::str() const {
  const char* ops[] = {"=", "<=", "<", ">=", ">"};
  return lhs.str() + " " + ops[static_cast<int>(op)] + " " + rhs.str();
}

bool Relation::holds(double l, double r, double tol) const {
  double slack = tol * std::max({1.0, std::fabs(l), std::fabs(r)});
  switch (op) {
    case Op::Eq:
      return std::fabs(l - r) <= slack;
    case Op::Le:
      return l <= r + slack;
    case Op::Lt:
      return l < r;
    case Op::Ge:
      return l + slack >= r;
    case Op::Gt:
      return l > r;
  }
  return false;
}

Relation parse_relation(std::string_view text) {
  static const std::pair<std::string_view, Relation::Op> kOps[] = {
      {"<=", Relation::Op::Le}, {">=", Relation::Op::Ge}, {"==", Relation::Op::Eq},
      {"<", Relation::Op::Lt},  {">", Relation::Op::Gt},  {"=", Relation::Op::Eq}};
  for (std::size_t i = 0; i < text.size(); ++i) {
    for (const auto& [tok, op] : kOps) {
      if (text.substr(i, tok.size()) == tok) {
        Relation r;
        r.lhs = parse_poly(text.substr(0, i));
        r.op = op;
        r.rhs = parse_poly(text.substr(i + tok.size()));
        return r;
      }
    }
  }
  throw ValidationError("relation '" + std::string(text) + "' has no comparison operator");
}

double Binding::bound(const std::string& symbol) const {
  auto it = bounds.find(symbol);
  if (it == bounds.end()) throw ValidationError("unbound symbol " + symbol);
  return it->second;
}

double Binding::prefix_nnz(const std::string& tensor, int depth) const {
  std::string key = Symbol::prefix_nnz(tensor, depth).str();
  if (auto it = nnz.find(key); it != nnz.end()) return it->second;

  auto dims = tensor_dims.find(tensor);
  if (dims == tensor_dims.end()) throw ValidationError("unbound symbol " + key + " (no dims for " + tensor + ")");
  auto sp = sparsity.find(tensor);
  if (sp == sparsity.end()) throw ValidationError("unbound symbol s(" + tensor + ")");
  const auto& d = dims->second;
  if (depth < 1 || depth > static_cast<int>(d.size()))
    throw ValidationError("level depth out of range in " + key);
  double prefix = 1.0, rest = 1.0;
  for (int m = 0; m < static_cast<int>(d.size()); ++m) (m < depth ? prefix : rest) *= bound(d[m]);
  double s = sp->second;
  if (depth == static_cast<int>(d.size())) return s * prefix;
  // 1 - (1 - s)^rest, computed stably.
  double nonempty = s >= 1.0 ? 1.0 : -std::expm1(rest * std::log1p(-s));
  return prefix * nonempty;
}

double Binding::value(const Symbol& s) const {
  switch (s.kind) {
    case Symbol::Kind::Bound:
      return bound(s.name);
    case Symbol::Kind::PrefixNnz:
      return prefix_nnz(s.name, s.depth);
    case Symbol::Kind::Sparsity: {
      auto it = sparsity.find(s.name);
      if (it == sparsity.end()) throw ValidationError("unbound symbol " + s.str());
      return it->second;
    }
  }
  return 0;
}

double evaluate(const SymPoly& p, const Binding& b) {
  double total = 0;
  for (const auto& [m, c] : p.terms()) {
    double term = static_cast<double>(c);
    for (const auto& s : m) term *= b.value(s);
    total += term;
  }
  return total;
}

}  // namespace bigsched
