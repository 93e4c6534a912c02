#include "bigsched/verify.hpp"

#include <cmath>

#include "bigsched/cost.hpp"

namespace bigsched {

CheckResult check_schedule(const Schedule& s, const TensorSet& tensors, const DenseTensor& reference,
                           double rel) {
  CheckResult r;
  r.id = s.id;
  auto [out, stats] = interpret(s.graph, *s.expr, tensors);
  r.values_ok = allclose(out, reference, rel);
  r.trips = stats.total;
  r.predicted = evaluate(time_complexity(s.graph), measured_binding(*s.expr, tensors));
  r.trips_ok = std::llround(r.predicted) == r.trips && std::fabs(r.predicted - std::round(r.predicted)) < 1e-6;
  auto [lin, lin_stats] = interpret(Big(linearize(s.graph)), *s.expr, tensors);
  r.linear_ok = allclose(lin, out, rel) && allclose(lin, reference, rel);
  return r;
}

}  // namespace bigsched
