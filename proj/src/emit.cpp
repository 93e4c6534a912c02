#include "bigsched/emit.hpp"

#include <algorithm>
#include <sstream>

#include "bigsched/error.hpp"

namespace bigsched {

EmitFormat parse_emit_format(const std::string& text) {
  if (text == "pseudo") return EmitFormat::Pseudo;
  if (text == "c") return EmitFormat::C;
  throw UsageError("format must be 'pseudo' or 'c', got '" + text + "'");
}

std::string emit_pseudo(const Schedule& s) {
  std::string out = "// " + s.expr->str() + "\n// schedule " + s.id + "\n";
  return out + to_ir(s.graph) + "\n";
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

class CWriter {
 public:
  CWriter(const Schedule& s, std::ostringstream& out) : out_(out) {
    sp_ = s.expr->sparse_input();
  }

  void graph(const Big& g, IndexList enclosing, int depth) {
    bool below = sp_ && touches(g, sp_->tensor);
    int opened = 0;
    auto open = [&](const IndexVar& idx) {
      open_loop(idx, below, enclosing, depth + opened);
      enclosing.push_back(idx);
      ++opened;
    };
    if (g.is_lig()) {
      for (const auto& idx : g.lig().order) open(idx);
      line(depth + opened, statement(g.lig().body));
    } else {
      const BigNode& n = g.node();
      for (const auto& idx : n.fused) open(idx);
      const TempTensor& t = n.temp;
      if (t.indices.empty())
        line(depth + opened, t.name + " = 0.0;");
      else
        line(depth + opened, "memset(" + t.name + ", 0, sizeof(double) * " + volume(t.indices) + ");");
      graph(n.producer, enclosing, depth + opened);
      graph(n.consumer, enclosing, depth + opened);
    }
    for (int d = opened; d > 0; --d) line(depth + d - 1, "}");
  }

  void line(int depth, const std::string& text) {
    out_ << std::string(static_cast<std::size_t>(2 * depth + 2), ' ') << text << "\n";
  }

 private:
  void open_loop(const IndexVar& idx, bool below, const IndexList& enclosing, int depth) {
    std::size_t mode = sp_ && below ? sp_->mode_of(idx) : std::string::npos;
    bool sparse = mode != std::string::npos;
    for (std::size_t m = 0; sparse && m < mode; ++m)
      if (std::ranges::find(enclosing, sp_->indices[m]) == enclosing.end()) sparse = false;
    if (!sparse) {
      line(depth, "for (int " + idx.name + " = 0; " + idx.name + " < " + idx.bound() + "; " +
                      idx.name + "++) {");
      return;
    }
    std::string level = std::to_string(mode + 1);
    std::string p = "p" + sp_->tensor + level;
    std::string parent = mode == 0 ? "0" : "p" + sp_->tensor + std::to_string(mode);
    std::string arr = sp_->tensor + level;
    line(depth, "for (int " + p + " = " + arr + "_pos[" + parent + "]; " + p + " < " + arr +
                    "_pos[" + parent + " + 1]; " + p + "++) {");
    line(depth + 1, "int " + idx.name + " = " + arr + "_crd[" + p + "];");
  }

  static std::string volume(const IndexList& idx) {
    std::string out;
    for (std::size_t m = 0; m < idx.size(); ++m) out += (m ? " * " : "") + idx[m].bound();
    return out;
  }

  std::string element(const TensorAccess& a) const {
    if (a.temporary && a.indices.empty()) return a.tensor;
    if (sp_ && a.tensor == sp_->tensor && !a.temporary)
      return a.tensor + "_vals[p" + a.tensor + std::to_string(a.order()) + "]";
    if (a.indices.empty()) return a.tensor + "[0]";
    std::string flat = a.indices[0].name;
    for (std::size_t m = 1; m < a.indices.size(); ++m)
      flat = (m > 1 ? "(" + flat + ")" : flat) + " * " + a.indices[m].bound() + " + " + a.indices[m].name;
    return a.tensor + "[" + flat + "]";
  }

  std::string statement(const Body& b) const {
    std::string rhs;
    for (std::size_t f = 0; f < b.factors.size(); ++f) rhs += (f ? " * " : "") + element(b.factors[f]);
    return element(b.lhs) + " += " + rhs + ";";
  }

  std::ostringstream& out_;
  const TensorAccess* sp_ = nullptr;
};

}  // namespace

std::string emit_c(const Schedule& s, const std::string& name) {
  const ContractionExpr& e = *s.expr;
  std::ostringstream out;
  out << "// " << e.str() << "\n// schedule " << s.id << "\n";
  out << "#include <stdlib.h>\n#include <string.h>\n\n";

  std::vector<std::string> params;
  for (const auto& idx : e.all_indices()) params.push_back("int " + idx.bound());
  for (const auto& in : e.inputs) {
    if (in.is_sparse()) {
      for (std::size_t l = 1; l <= in.order(); ++l) {
        std::string arr = in.tensor + std::to_string(l);
        params.push_back("const int* " + arr + "_pos");
        params.push_back("const int* " + arr + "_crd");
      }
      params.push_back("const double* " + in.tensor + "_vals");
    } else {
      params.push_back("const double* " + in.tensor);
    }
  }
  params.push_back("double* " + e.output.tensor);

  out << "void " << name << "(";
  for (std::size_t p = 0; p < params.size(); ++p) out << (p ? ", " : "") << params[p];
  out << ") {\n";

  CWriter w(s, out);
  auto temps = temps_of(s.graph);
  for (const auto& t : temps) {
    if (t.indices.empty()) {
      w.line(0, "double " + t.name + " = 0.0;");
      continue;
    }
    std::string vol;
    for (std::size_t m = 0; m < t.indices.size(); ++m) vol += (m ? " * " : "") + t.indices[m].bound();
    w.line(0, "double* " + t.name + " = (double*)malloc(sizeof(double) * " + vol + ");");
  }
  w.graph(s.graph, {}, 0);
  for (const auto& t : temps)
    if (!t.indices.empty()) w.line(0, "free(" + t.name + ");");
  out << "}\n";
  return out.str();
}

std::string emit(const Schedule& s, EmitFormat format) {
  return format == EmitFormat::C ? emit_c(s) : emit_pseudo(s);
}

}  // namespace bigsched
