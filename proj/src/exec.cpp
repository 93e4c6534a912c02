#include "bigsched/exec.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "bigsched/error.hpp"

namespace bigsched {

DenseTensor DenseTensor::zeros(std::vector<std::int64_t> dims) {
  DenseTensor t;
  t.dims = std::move(dims);
  t.data.assign(static_cast<std::size_t>(t.size()), 0.0);
  return t;
}

std::int64_t DenseTensor::size() const {
  std::int64_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

namespace {

std::int64_t flat_index(const std::vector<std::int64_t>& dims, const Coord& c) {
  if (c.size() != dims.size()) throw ValidationError("coordinate rank does not match tensor order");
  std::int64_t off = 0;
  for (std::size_t m = 0; m < dims.size(); ++m) {
    if (c[m] < 0 || c[m] >= dims[m]) throw ValidationError("coordinate out of range");
    off = off * dims[m] + c[m];
  }
  return off;
}

}  // namespace

double& DenseTensor::at(const Coord& c) { return data[static_cast<std::size_t>(flat_index(dims, c))]; }
double DenseTensor::at(const Coord& c) const {
  return data[static_cast<std::size_t>(flat_index(dims, c))];
}

SparseCsf SparseCsf::from_entries(std::vector<std::int64_t> dims,
                                  std::vector<std::pair<Coord, double>> entries) {
  for (const auto& [c, v] : entries) flat_index(dims, c);
  std::ranges::sort(entries, {}, &std::pair<Coord, double>::first);
  std::vector<std::pair<Coord, double>> merged;
  for (auto& e : entries) {
    if (!merged.empty() && merged.back().first == e.first)
      merged.back().second += e.second;
    else
      merged.push_back(std::move(e));
  }

  SparseCsf t;
  t.dims = std::move(dims);
  const std::size_t k = t.dims.size();
  t.pos.assign(k, {});
  t.crd.assign(k, {});
  if (k == 0) {
    for (const auto& e : merged) t.vals.push_back(e.second);
    return t;
  }
  // parent[l][n]: node of level l-1 owning node n of level l.
  std::vector<std::vector<std::int64_t>> parent(k);
  for (std::size_t e = 0; e < merged.size(); ++e) {
    const Coord& c = merged[e].first;
    // First level where this entry leaves the previous entry's path.
    std::size_t split = 0;
    if (e > 0) {
      const Coord& prev = merged[e - 1].first;
      while (split < k && prev[split] == c[split]) ++split;
    }
    for (std::size_t l = split; l < k; ++l) {
      t.crd[l].push_back(c[l]);
      parent[l].push_back(l == 0 ? 0 : static_cast<std::int64_t>(t.crd[l - 1].size()) - 1);
    }
    t.vals.push_back(merged[e].second);
  }
  for (std::size_t l = 0; l < k; ++l) {
    std::size_t owners = l == 0 ? 1 : t.crd[l - 1].size();
    t.pos[l].assign(owners + 1, 0);
    for (auto p : parent[l]) ++t.pos[l][static_cast<std::size_t>(p) + 1];
    for (std::size_t p = 0; p < owners; ++p) t.pos[l][p + 1] += t.pos[l][p];
  }
  return t;
}

SparseCsf SparseCsf::from_dense(const DenseTensor& dense) {
  std::vector<std::pair<Coord, double>> entries;
  Coord c(dense.dims.size(), 0);
  for (std::int64_t flat = 0; flat < dense.size(); ++flat) {
    std::int64_t rest = flat;
    for (std::size_t m = dense.dims.size(); m-- > 0;) {
      c[m] = rest % dense.dims[m];
      rest /= dense.dims[m];
    }
    double v = dense.data[static_cast<std::size_t>(flat)];
    if (v != 0.0) entries.emplace_back(c, v);
  }
  return from_entries(dense.dims, std::move(entries));
}

std::vector<std::pair<Coord, double>> SparseCsf::entries() const {
  std::vector<std::pair<Coord, double>> out;
  const std::size_t k = order();
  if (k == 0) {
    for (double v : vals) out.emplace_back(Coord{}, v);
    return out;
  }
  Coord c(k, 0);
  std::function<void(std::size_t, std::int64_t)> walk = [&](std::size_t l, std::int64_t parent) {
    for (auto p = pos[l][static_cast<std::size_t>(parent)];
         p < pos[l][static_cast<std::size_t>(parent) + 1]; ++p) {
      c[l] = crd[l][static_cast<std::size_t>(p)];
      if (l + 1 == k)
        out.emplace_back(c, vals[static_cast<std::size_t>(p)]);
      else
        walk(l + 1, p);
    }
  };
  walk(0, 0);
  return out;
}

DenseTensor SparseCsf::to_dense() const {
  DenseTensor d = DenseTensor::zeros(dims);
  for (const auto& [c, v] : entries()) d.at(c) += v;
  return d;
}

std::int64_t measured_nnz_prefix(const SparseCsf& t, int d) {
  if (d < 1 || d > static_cast<int>(t.order()))
    throw ValidationError("prefix depth " + std::to_string(d) + " out of range for order " +
                          std::to_string(t.order()));
  return static_cast<std::int64_t>(t.crd[static_cast<std::size_t>(d - 1)].size());
}

std::map<std::string, DenseTensor> TensorSet::densified() const {
  std::map<std::string, DenseTensor> out = dense;
  for (const auto& [name, t] : sparse) out[name] = t.to_dense();
  return out;
}

namespace {

const std::vector<std::int64_t>* dims_of(const TensorSet& tensors, const std::string& name) {
  if (auto it = tensors.sparse.find(name); it != tensors.sparse.end()) return &it->second.dims;
  if (auto it = tensors.dense.find(name); it != tensors.dense.end()) return &it->second.dims;
  return nullptr;
}

std::map<std::string, std::int64_t> extents_from(
    const ContractionExpr& expr,
    const std::function<const std::vector<std::int64_t>*(const std::string&)>& lookup) {
  std::map<std::string, std::int64_t> out;
  for (const auto& in : expr.inputs) {
    const auto* dims = lookup(in.tensor);
    if (!dims) throw ValidationError("no data for tensor " + in.tensor);
    if (dims->size() != in.order())
      throw ValidationError("tensor " + in.tensor + " has order " + std::to_string(dims->size()) +
                            ", expected " + std::to_string(in.order()));
    for (std::size_t m = 0; m < in.order(); ++m) {
      auto [it, inserted] = out.emplace(in.indices[m].bound(), (*dims)[m]);
      if (!inserted && it->second != (*dims)[m])
        throw ValidationError("dimension mismatch on index " + in.indices[m].name + ": " +
                              std::to_string(it->second) + " vs " + std::to_string((*dims)[m]));
    }
  }
  return out;
}

std::vector<std::int64_t> dims_for(const IndexList& indices,
                                   const std::map<std::string, std::int64_t>& extents) {
  std::vector<std::int64_t> dims;
  for (const auto& idx : indices) dims.push_back(extents.at(idx.bound()));
  return dims;
}

}  // namespace

std::map<std::string, std::int64_t> infer_extents(const ContractionExpr& expr,
                                                  const TensorSet& tensors) {
  return extents_from(expr, [&](const std::string& n) { return dims_of(tensors, n); });
}

DenseTensor reference_contract(const ContractionExpr& expr,
                               const std::map<std::string, DenseTensor>& tensors) {
  auto extents = extents_from(expr, [&](const std::string& n) -> const std::vector<std::int64_t>* {
    auto it = tensors.find(n);
    return it == tensors.end() ? nullptr : &it->second.dims;
  });
  DenseTensor out = DenseTensor::zeros(dims_for(expr.output.indices, extents));
  IndexList all = expr.all_indices();
  std::map<IndexVar, std::size_t> slot;
  for (std::size_t s = 0; s < all.size(); ++s) slot[all[s]] = s;
  Coord val(all.size(), 0);

  auto coord_of = [&](const TensorAccess& a) {
    Coord c;
    for (const auto& idx : a.indices) c.push_back(val[slot[idx]]);
    return c;
  };
  std::function<void(std::size_t)> loop = [&](std::size_t depth) {
    if (depth == all.size()) {
      double prod = 1.0;
      for (const auto& in : expr.inputs) prod *= tensors.at(in.tensor).at(coord_of(in));
      out.at(coord_of(expr.output)) += prod;
      return;
    }
    for (std::int64_t v = 0; v < extents.at(all[depth].bound()); ++v) {
      val[depth] = v;
      loop(depth + 1);
    }
  };
  loop(0);
  return out;
}

namespace {

struct CAccess {
  double* data = nullptr;
  const double* cdata = nullptr;
  std::vector<std::pair<int, std::int64_t>> terms;
  bool sparse = false;
};

struct CNode {
  enum class Kind { Loop, Where, Leaf };
  Kind kind = Kind::Leaf;
  int slot = -1;
  std::int64_t extent = 0;
  int sparse_level = -1;
  int child = -1;
  int temp = -1;
  int producer = -1;
  int consumer = -1;
  CAccess lhs;
  std::vector<CAccess> factors;
  int leaf_id = -1;
};

class Interpreter {
 public:
  Interpreter(const ContractionExpr& expr, const TensorSet& tensors, const Big& graph)
      : expr_(expr), tensors_(tensors) {
    extents_ = infer_extents(expr, tensors);
    output_ = DenseTensor::zeros(dims_for(expr.output.indices, extents_));

    sp_acc_ = find_sparse_access(graph);
    if (sp_acc_) {
      if (auto it = tensors.sparse.find(sp_acc_->tensor); it != tensors.sparse.end()) {
        sp_ = &it->second;
      } else {
        owned_sparse_ = SparseCsf::from_dense(tensors.dense.at(sp_acc_->tensor));
        sp_ = &owned_sparse_;
      }
      cur_.assign(sp_->order(), 0);
    }
    temp_bufs_.resize(temps_of(graph).size());
    mode_bound_.assign(sp_acc_ ? sp_acc_->order() : 0, 0);
    root_ = compile(graph);
    vals_.assign(slots_.size(), 0);
    stats_.leaf_trip_counts.assign(static_cast<std::size_t>(leaf_count_), 0);
  }

  std::pair<DenseTensor, ExecStats> run() {
    exec(root_);
    for (auto c : stats_.leaf_trip_counts) stats_.total += c;
    return {std::move(output_), std::move(stats_)};
  }

 private:
  int slot(const IndexVar& idx) {
    auto [it, inserted] = slots_.emplace(idx, static_cast<int>(slots_.size()));
    return it->second;
  }

  bool touches(const Big& g) const {
    if (!sp_acc_) return false;
    if (g.is_lig()) {
      return std::ranges::any_of(g.lig().body.factors,
                                 [&](const auto& f) { return f.tensor == sp_acc_->tensor; });
    }
    return touches(g.node().producer) || touches(g.node().consumer);
  }

  int compile(const Big& g) {
    bool touch = touches(g);
    if (g.is_lig()) {
      const Lig& lig = g.lig();
      return chain(lig.order, 0, touch, [&] { return leaf(lig); });
    }
    const BigNode& n = g.node();
    return chain(n.fused, 0, touch, [&] {
      int t = temp_index_++;
      temp_ids_[n.temp.name] = t;
      std::int64_t size = 1;
      for (const auto& idx : n.temp.indices) size *= extents_.at(idx.bound());
      temp_bufs_[static_cast<std::size_t>(t)].assign(static_cast<std::size_t>(size), 0.0);
      temp_dims_[n.temp.name] = dims_for(n.temp.indices, extents_);
      CNode w;
      w.kind = CNode::Kind::Where;
      w.temp = t;
      int id = push(std::move(w));
      int p = compile(n.producer);
      int c = compile(n.consumer);
      nodes_[static_cast<std::size_t>(id)].producer = p;
      nodes_[static_cast<std::size_t>(id)].consumer = c;
      return id;
    });
  }

  int chain(const IndexList& loops, std::size_t k, bool touch, const std::function<int()>& inner) {
    if (k == loops.size()) return inner();
    const IndexVar& x = loops[k];
    CNode n;
    n.kind = CNode::Kind::Loop;
    n.slot = slot(x);
    n.extent = extents_.at(x.bound());
    std::size_t mode = sp_acc_ ? sp_acc_->mode_of(x) : std::string::npos;
    if (touch && mode != std::string::npos &&
        std::all_of(mode_bound_.begin(), mode_bound_.begin() + static_cast<std::ptrdiff_t>(mode),
                    [](char b) { return b != 0; }))
      n.sparse_level = static_cast<int>(mode);
    int id = push(std::move(n));
    if (mode != std::string::npos) ++mode_bound_[mode];
    int child = chain(loops, k + 1, touch, inner);
    if (mode != std::string::npos) --mode_bound_[mode];
    nodes_[static_cast<std::size_t>(id)].child = child;
    return id;
  }

  CAccess access(const TensorAccess& a) {
    CAccess c;
    if (sp_acc_ && a.tensor == sp_acc_->tensor && !a.temporary) {
      c.sparse = true;
      return c;
    }
    const std::vector<std::int64_t>* dims = nullptr;
    if (auto it = temp_ids_.find(a.tensor); it != temp_ids_.end()) {
      c.data = temp_bufs_[static_cast<std::size_t>(it->second)].data();
      c.cdata = c.data;
      dims = &temp_dims_.at(a.tensor);
    } else if (a.tensor == expr_.output.tensor) {
      c.data = output_.data.data();
      c.cdata = c.data;
      dims = &output_.dims;
    } else {
      auto it = tensors_.dense.find(a.tensor);
      if (it == tensors_.dense.end()) {
        auto [dit, inserted] =
            owned_dense_.emplace(a.tensor, tensors_.sparse.at(a.tensor).to_dense());
        c.cdata = dit->second.data.data();
        dims = &dit->second.dims;
      } else {
        c.cdata = it->second.data.data();
        dims = &it->second.dims;
      }
    }
    std::int64_t stride = 1;
    for (std::size_t m = a.indices.size(); m-- > 0;) {
      c.terms.emplace_back(slot(a.indices[m]), stride);
      stride *= (*dims)[m];
    }
    return c;
  }

  int leaf(const Lig& lig) {
    CNode n;
    n.kind = CNode::Kind::Leaf;
    n.lhs = access(lig.body.lhs);
    for (const auto& f : lig.body.factors) {
      n.factors.push_back(access(f));
      if (n.factors.back().sparse &&
          std::ranges::count(mode_bound_, static_cast<char>(0)) != 0)
        throw ValidationError("leaf reads " + f.str() + " outside its full index chain");
    }
    n.leaf_id = leaf_count_++;
    return push(std::move(n));
  }

  int push(CNode n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  std::int64_t offset(const CAccess& a) const {
    std::int64_t off = 0;
    for (const auto& [s, stride] : a.terms) off += vals_[static_cast<std::size_t>(s)] * stride;
    return off;
  }

  void exec(int id) {
    const CNode& n = nodes_[static_cast<std::size_t>(id)];
    switch (n.kind) {
      case CNode::Kind::Loop: {
        auto& v = vals_[static_cast<std::size_t>(n.slot)];
        if (n.sparse_level < 0) {
          for (v = 0; v < n.extent; ++v) exec(n.child);
          return;
        }
        auto lv = static_cast<std::size_t>(n.sparse_level);
        std::int64_t parent = lv == 0 ? 0 : cur_[lv - 1];
        const auto& pos = sp_->pos[lv];
        const auto& crd = sp_->crd[lv];
        for (auto p = pos[static_cast<std::size_t>(parent)];
             p < pos[static_cast<std::size_t>(parent) + 1]; ++p) {
          cur_[lv] = p;
          v = crd[static_cast<std::size_t>(p)];
          exec(n.child);
        }
        return;
      }
      case CNode::Kind::Where:
        std::ranges::fill(temp_bufs_[static_cast<std::size_t>(n.temp)], 0.0);
        exec(n.producer);
        exec(n.consumer);
        return;
      case CNode::Kind::Leaf: {
        double prod = 1.0;
        for (const auto& f : n.factors)
          prod *= f.sparse ? sp_->vals[static_cast<std::size_t>(cur_.back())] : f.cdata[offset(f)];
        n.lhs.data[offset(n.lhs)] += prod;
        ++stats_.leaf_trip_counts[static_cast<std::size_t>(n.leaf_id)];
        return;
      }
    }
  }

  const ContractionExpr& expr_;
  const TensorSet& tensors_;
  std::map<std::string, std::int64_t> extents_;
  DenseTensor output_;
  const TensorAccess* sp_acc_ = nullptr;
  const SparseCsf* sp_ = nullptr;
  SparseCsf owned_sparse_;
  std::map<std::string, DenseTensor> owned_dense_;
  std::vector<std::int64_t> cur_;
  std::vector<char> mode_bound_;
  std::map<IndexVar, int> slots_;
  std::vector<std::int64_t> vals_;
  std::vector<std::vector<double>> temp_bufs_;
  std::map<std::string, int> temp_ids_;
  std::map<std::string, std::vector<std::int64_t>> temp_dims_;
  int temp_index_ = 0;
  std::vector<CNode> nodes_;
  int root_ = -1;
  int leaf_count_ = 0;
  ExecStats stats_;
};

}  // namespace

std::pair<DenseTensor, ExecStats> interpret(const Big& graph, const ContractionExpr& expr,
                                            const TensorSet& tensors) {
  auto violations = validate_big(graph);
  if (!violations.empty()) throw ValidationError("invalid schedule: " + violations.front());
  Interpreter in(expr, tensors, graph);
  return in.run();
}

Binding measured_binding(const ContractionExpr& expr, const TensorSet& tensors) {
  Binding b;
  for (const auto& [sym, ext] : infer_extents(expr, tensors)) b.bounds[sym] = static_cast<double>(ext);
  for (const auto& in : expr.inputs) {
    if (!in.is_sparse()) continue;
    SparseCsf csf;
    if (auto it = tensors.sparse.find(in.tensor); it != tensors.sparse.end())
      csf = it->second;
    else
      csf = SparseCsf::from_dense(tensors.dense.at(in.tensor));
    std::vector<std::string> dims;
    double full = 1.0;
    for (const auto& idx : in.indices) {
      dims.push_back(idx.bound());
      full *= b.bounds.at(idx.bound());
    }
    b.tensor_dims[in.tensor] = dims;
    for (int d = 1; d <= static_cast<int>(in.order()); ++d)
      b.nnz[Symbol::prefix_nnz(in.tensor, d).str()] = static_cast<double>(measured_nnz_prefix(csf, d));
    b.sparsity[in.tensor] = full > 0 ? static_cast<double>(csf.nnz()) / full : 0.0;
  }
  return b;
}

namespace {

double unit_double(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

TensorSet random_tensors(const ContractionExpr& expr,
                         const std::map<std::string, std::int64_t>& extents, double sparsity,
                         std::uint64_t seed) {
  if (!(sparsity > 0.0 && sparsity <= 1.0)) throw UsageError("sparsity must lie in (0, 1]");
  std::mt19937_64 rng(seed);
  TensorSet out;
  for (const auto& in : expr.inputs) {
    if (out.dense.contains(in.tensor) || out.sparse.contains(in.tensor)) continue;
    std::vector<std::int64_t> dims;
    for (const auto& idx : in.indices) {
      auto it = extents.find(idx.bound());
      if (it == extents.end()) throw UsageError("no extent given for " + idx.bound());
      dims.push_back(it->second);
    }
    DenseTensor d = DenseTensor::zeros(dims);
    for (auto& v : d.data) {
      bool keep = !in.is_sparse() || unit_double(rng) < sparsity;
      double x = 2.0 * unit_double(rng) - 1.0;
      if (keep) v = x == 0.0 ? 0.5 : x;
    }
    if (in.is_sparse())
      out.sparse[in.tensor] = SparseCsf::from_dense(d);
    else
      out.dense[in.tensor] = std::move(d);
  }
  return out;
}

bool allclose(const DenseTensor& a, const DenseTensor& b, double rel) {
  if (a.dims != b.dims) return false;
  double scale = 0.0;
  for (double v : b.data) scale = std::max(scale, std::fabs(v));
  for (std::size_t i = 0; i < a.data.size(); ++i)
    if (!(std::fabs(a.data[i] - b.data[i]) <= rel * scale)) return false;
  return true;
}

std::pair<std::vector<std::int64_t>, std::vector<std::pair<Coord, double>>> read_coordinate_text(
    std::istream& in) {
  std::vector<std::int64_t> dims;
  std::vector<std::pair<Coord, double>> entries;
  bool have_dims = false;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::string first;
    if (!(ss >> first)) continue;
    if (!have_dims) {
      if (first != "dims") throw ValidationError("line " + std::to_string(lineno) + ": expected 'dims'");
      std::int64_t d;
      while (ss >> d) {
        if (d <= 0) throw ValidationError("dims must be positive");
        dims.push_back(d);
      }
      have_dims = true;
      continue;
    }
    std::istringstream row(line);
    std::vector<double> nums;
    double x;
    while (row >> x) nums.push_back(x);
    if (nums.size() != dims.size() + 1)
      throw ValidationError("line " + std::to_string(lineno) + ": expected " +
                            std::to_string(dims.size()) + " coordinates and a value");
    Coord c;
    for (std::size_t m = 0; m < dims.size(); ++m) {
      double v = nums[m];
      if (v != std::floor(v) || v < 0 || v >= static_cast<double>(dims[m]))
        throw ValidationError("line " + std::to_string(lineno) + ": coordinate " +
                              std::to_string(m) + " out of range");
      c.push_back(static_cast<std::int64_t>(v));
    }
    entries.emplace_back(std::move(c), nums.back());
  }
  if (!have_dims) throw ValidationError("missing 'dims' header");
  return {dims, entries};
}

void write_coordinate_text(std::ostream& out, const std::vector<std::int64_t>& dims,
                           const std::vector<std::pair<Coord, double>>& entries) {
  out << "dims";
  for (auto d : dims) out << ' ' << d;
  out << '\n';
  out.precision(17);
  for (const auto& [c, v] : entries) {
    for (auto x : c) out << x << ' ';
    out << v << '\n';
  }
}

}  // namespace bigsched
