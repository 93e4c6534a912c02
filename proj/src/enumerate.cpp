#include "bigsched/enumerate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <unordered_set>

namespace bigsched {

std::vector<Lig> gen_ligs(const ContractionExpr& expr) {
  IndexList order = expr.all_indices();
  std::ranges::sort(order);
  std::vector<Lig> out;
  do {
    if (respects_sparse_order(order, expr.inputs)) out.push_back(make_lig(expr, order));
  } while (std::ranges::next_permutation(order).found);
  return out;
}

namespace {

// A linear section awaiting expansion: `lhs += factors` under the enclosing
// loops `bound` (outermost first).
struct Section {
  TensorAccess lhs;
  std::vector<TensorAccess> factors;
  IndexList bound;
};

std::optional<IndexVar> first_loop(const Big& g) {
  if (g.is_lig()) {
    if (g.lig().order.empty()) return std::nullopt;
    return g.lig().order.front();
  }
  if (g.node().fused.empty()) return std::nullopt;
  return g.node().fused.front();
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

class Enumerator {
 public:
  Enumerator(const ContractionExpr& expr, const GenConfig& cfg) : cfg_(cfg) {
    IndexList all = expr.all_indices();
    for (std::size_t r = 0; r < all.size(); ++r) rank_[all[r]] = static_cast<int>(r);
  }

  const std::vector<Big>& run(const Section& s) {
    std::string k = key(s);
    if (auto it = memo_.find(k); it != memo_.end()) return it->second;

    std::vector<Big> out;
    IndexSet bound_set(s.bound.begin(), s.bound.end());
    Body body{s.lhs, s.factors};
    IndexList order;
    for (const auto& idx : body.indices())
      if (!bound_set.contains(idx)) order.push_back(idx);

    do {
      if (respects_sparse_order(order, s.factors)) out.push_back(Big(Lig{order, body}));
    } while (std::ranges::next_permutation(order).found);

    const std::size_t n = s.factors.size();
    if (n >= 2) {
      const TensorAccess* sp = nullptr;
      for (const auto& f : s.factors)
        if (f.is_sparse()) sp = &f;
      bool has_temp = std::ranges::any_of(s.factors, [](const auto& f) { return f.temporary; });

      for (unsigned mask = 1; mask + 1 < (1u << n); ++mask) {
        std::vector<TensorAccess> prod, cons;
        std::size_t temp_pos = n;
        for (std::size_t f = 0; f < n; ++f) {
          if (mask & (1u << f)) {
            prod.push_back(s.factors[f]);
            if (temp_pos == n) temp_pos = cons.size();
          } else {
            cons.push_back(s.factors[f]);
          }
        }
        bool prod_has_temp = std::ranges::any_of(prod, [](const auto& f) { return f.temporary; });
        // Copying a lone temporary into another one never terminates.
        if (prod.size() == 1 && prod_has_temp) continue;
        if (!cfg_.enable_split_mode_b && has_temp && !prod_has_temp) continue;

        IndexList tidx;
        for (const auto& idx : temp_indices(prod, cons, s.lhs))
          if (!bound_set.contains(idx)) tidx.push_back(idx);
        std::ranges::sort(tidx, [&](const auto& a, const auto& b) { return rank_.at(a) < rank_.at(b); });
        // A lone factor that sums nothing away is a plain copy; it only adds
        // time and memory.
        if (prod.size() == 1) {
          std::size_t own = 0;
          for (const auto& idx : prod[0].indices)
            if (!bound_set.contains(idx)) ++own;
          if (own == tidx.size()) continue;
        }

        split(s, prod, cons, temp_pos, tidx, {}, out);

        std::size_t sparse_bound = 0;
        if (sp)
          for (const auto& idx : sp->indices)
            if (bound_set.contains(idx)) ++sparse_bound;
        IndexList fused;
        extend_fused(s, prod, cons, temp_pos, tidx, fused, sp, sparse_bound, out);
      }
    }

    if (cfg_.cap && out.size() > *cfg_.cap) throw CapExceeded(out.size());
    return memo_.emplace(std::move(k), std::move(out)).first->second;
  }

 private:
  // Grows the fused prefix one index at a time, keeping the sparse tensor's
  // modes in chain order.
  void extend_fused(const Section& s, const std::vector<TensorAccess>& prod,
                    const std::vector<TensorAccess>& cons, std::size_t temp_pos,
                    const IndexList& tidx, IndexList& fused, const TensorAccess* sp,
                    std::size_t next_mode, std::vector<Big>& out) {
    for (const auto& idx : tidx) {
      if (std::ranges::find(fused, idx) != fused.end()) continue;
      std::size_t next = next_mode;
      if (sp) {
        std::size_t mode = sp->mode_of(idx);
        if (mode != std::string::npos) {
          if (mode != next_mode) continue;
          next = next_mode + 1;
        }
      }
      fused.push_back(idx);
      split(s, prod, cons, temp_pos, tidx, fused, out);
      extend_fused(s, prod, cons, temp_pos, tidx, fused, sp, next, out);
      fused.pop_back();
    }
  }

  void split(const Section& s, const std::vector<TensorAccess>& prod,
             const std::vector<TensorAccess>& cons, std::size_t temp_pos, const IndexList& tidx,
             const IndexList& fused, std::vector<Big>& out) {
    TempTensor temp;
    for (const auto& idx : tidx)
      if (std::ranges::find(fused, idx) == fused.end()) temp.indices.push_back(idx);
    if (static_cast<int>(temp.arity()) > cfg_.max_memory_depth) return;
    temp.name = temp_name(prod, temp.indices);

    IndexList bound = s.bound;
    bound.insert(bound.end(), fused.begin(), fused.end());
    std::vector<TensorAccess> c_factors = cons;
    c_factors.insert(c_factors.begin() + static_cast<std::ptrdiff_t>(temp_pos), temp.access());

    const std::vector<Big>& ps = run(Section{temp.access(), prod, bound});
    const std::vector<Big>& cs = run(Section{s.lhs, c_factors, bound});
    for (const auto& p : ps) {
      auto pf = first_loop(p);
      for (const auto& c : cs) {
        // A fused prefix is maximal: the inner sections must not start with
        // the same loop.
        if (!fused.empty() && pf && pf == first_loop(c)) continue;
        out.push_back(Big(BigNode{fused, p, c, temp}));
      }
    }
  }

  std::string temp_name(const std::vector<TensorAccess>& prod, const IndexList& indices) {
    std::vector<std::string> parts;
    for (const auto& f : prod) parts.push_back(f.str());
    std::ranges::sort(parts);
    std::string text;
    for (const auto& p : parts) text += p + "*";
    for (const auto& idx : indices) text += idx.name + ",";
    char buf[20];
    std::snprintf(buf, sizeof buf, "~%016llx", static_cast<unsigned long long>(fnv1a(text)));
    return buf;
  }

  std::string key(const Section& s) const {
    std::vector<std::string> parts;
    for (const auto& f : s.factors) parts.push_back(f.str() + level_pattern(f.levels));
    std::ranges::sort(parts);
    IndexList bound = s.bound;
    std::ranges::sort(bound);
    std::string out = s.lhs.str() + "=";
    for (const auto& p : parts) out += p + "*";
    out += "|";
    for (const auto& idx : bound) out += idx.name + ",";
    return out;
  }

  const GenConfig& cfg_;
  std::map<IndexVar, int> rank_;
  std::map<std::string, std::vector<Big>> memo_;
};

}  // namespace

std::vector<Schedule> gen_schedules(const ContractionExpr& expr, const GenConfig& cfg) {
  if (cfg.max_memory_depth < 0) throw UsageError("max memory depth must be >= 0");
  validate_expr(expr);
  auto shared = std::make_shared<const ContractionExpr>(expr);
  std::set<std::string> reserved{expr.output.tensor};
  for (const auto& in : expr.inputs) reserved.insert(in.tensor);

  Enumerator en(expr, cfg);
  const std::vector<Big>& graphs = en.run(Section{expr.output, expr.inputs, {}});

  std::vector<Schedule> out;
  out.reserve(graphs.size());
  for (const auto& g : graphs) out.push_back(make_schedule(canonicalize_temps(g, reserved), shared));
  if (cfg.dedup) out = dedup(std::move(out));
  std::ranges::stable_sort(out, {}, &Schedule::id);
  return out;
}

std::vector<Schedule> dedup(std::vector<Schedule> schedules) {
  std::unordered_set<std::string> seen;
  std::vector<Schedule> out;
  out.reserve(schedules.size());
  for (auto& s : schedules)
    if (seen.insert(structural_key(s.graph)).second) out.push_back(std::move(s));
  return out;
}

double finiteness_bound_log10(std::size_t n_inputs, std::size_t n_indices) {
  double n = static_cast<double>(n_inputs), m = static_cast<double>(n_indices);
  double log_nfact = std::lgamma(n + 1) / std::log(10.0);
  double log_mfact = std::lgamma(m + 1) / std::log(10.0);
  return log_nfact + n * std::log10(2.0) + std::pow(2.0, n) * log_mfact + std::log10(m + 1);
}

}  // namespace bigsched
