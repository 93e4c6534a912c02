#pragma once

// Shared inputs: the four-input kernel and its hand-built schedule shapes.

#include <algorithm>
#include <memory>
#include <string>
#include <vector>

#include "bigsched/cost.hpp"
#include "bigsched/enumerate.hpp"
#include "bigsched/expr.hpp"
#include "bigsched/igraph.hpp"

namespace fx {

using namespace bigsched;

inline const char* kKernel = "A(l,m,n)=B(i,j,k)*C(i,l)*D(j,m)*E(k,n)";

inline ContractionExpr kernel() {
  Formats f;
  add_format_flag(f, "B:ccc");
  return parse_einsum(kKernel, f);
}

inline IndexList idx(const std::string& names) {
  IndexList out;
  for (char c : names) out.push_back(IndexVar{std::string(1, c)});
  return out;
}

inline Big unsplit() { return Big(make_lig(kernel(), idx("lmnijk"))); }
// [l,m] { [i,j,k] t1(k) ; [n,k] }
inline Big k_temp() { return loopfuse(unsplit(), {}, 3, true); }
// [l] { [i,j,k] t1(j,k) ; [m,n,j,k] }
inline Big jk_temp() { return loopfuse(unsplit(), {}, 2, true); }
// [l] { [i,j,k] t1(j,k) ; [m,k] { [j] t2 ; [n] } }
inline Big jk_scalar() {
  Big g = reorder(jk_temp(), {1}, idx("mknj"));
  return loopfuse(g, {1}, 2, true);
}
// [l] { [i,j,k] t1(j,k) ; [m] { [j,k] t2(k) ; [k,n] } }
inline Big jk_k() {
  Big g = reorder(jk_temp(), {1}, idx("mjkn"));
  return loopfuse(g, {1}, 2, true);
}

inline Schedule sched(const Big& g) {
  return make_schedule(g, std::make_shared<const ContractionExpr>(kernel()));
}

inline const std::vector<Schedule>& kernel_space() {
  static const std::vector<Schedule> all = gen_schedules(kernel());
  return all;
}

inline bool contains_id(const std::vector<Schedule>& all, const std::string& id) {
  return std::ranges::any_of(all, [&](const Schedule& s) { return s.id == id; });
}

}  // namespace fx
