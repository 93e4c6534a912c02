#include <doctest.h>

#include <cmath>

#include "bigsched/cost.hpp"
#include "fixtures.hpp"

using namespace bigsched;

namespace {

constexpr double kMiB = 1024.0 * 1024.0;

Binding case_binding(double j, double k) {
  Binding b;
  b.bounds = {{"I", 1800}, {"J", j}, {"K", k}, {"L", 64}, {"M", 16}, {"N", 32}};
  b.sparsity = {{"B", 0.08}};
  attach_dims(b, fx::kernel());
  return b;
}

}  // namespace

TEST_CASE("time polynomials of the unsplit and K-temp shapes") {
  CHECK(time_complexity(fx::unsplit()) == parse_poly("nnz(B,3)*L*M*N"));
  CHECK(time_complexity(fx::k_temp()) == parse_poly("nnz(B,3)*L*M + L*M*N*K"));
  CHECK(time_complexity(fx::jk_temp()) == parse_poly("L*nnz(B,3) + J*K*L*M*N"));
  CHECK(time_complexity(fx::jk_scalar()) == parse_poly("L*nnz(B,3) + J*K*L*M + K*L*M*N"));
  CHECK(time_complexity(fx::jk_k()) == time_complexity(fx::jk_scalar()));
}

TEST_CASE("memory polynomials and depths") {
  CHECK(memory_complexity(fx::unsplit()) == SymPoly::constant(0));
  CHECK(memory_complexity(fx::k_temp()) == parse_poly("K"));
  CHECK(memory_complexity(fx::jk_temp()) == parse_poly("J*K"));
  CHECK(memory_complexity(fx::jk_scalar()) == parse_poly("J*K + 1"));
  CHECK(memory_complexity(fx::jk_k()) == parse_poly("J*K + K"));

  CHECK(depths(fx::unsplit()) == std::pair{6, 0});
  CHECK(depths(fx::k_temp()) == std::pair{5, 1});
  CHECK(depths(fx::jk_scalar()) == std::pair{4, 2});
  CHECK(depths(fx::jk_k()) == std::pair{4, 2});
  CHECK(depths(fx::jk_temp()) == std::pair{5, 2});

  CostProfile p = profile(fx::jk_scalar());
  CHECK(p.loop_depth == 4);
  CHECK(p.mem_depth == 2);
  CHECK(p.temps.size() == 2);
}

TEST_CASE("concrete ratio of the unsplit to the K-temp shape") {
  Binding b = case_binding(800, 1000);
  // Uniform estimate at full depth is I*J*K*s.
  double nnz3 = 1800.0 * 800 * 1000 * 0.08;
  CHECK(b.prefix_nnz("B", 3) == doctest::Approx(nnz3));
  double ta = nnz3 * 64 * 16 * 32;
  double tb = nnz3 * 64 * 16 + 64.0 * 16 * 32 * 1000;
  CHECK(evaluate(time_complexity(fx::unsplit()), b) == doctest::Approx(ta).epsilon(1e-12));
  CHECK(evaluate(time_complexity(fx::k_temp()), b) == doctest::Approx(tb).epsilon(1e-12));
  double ratio = ta / tb;
  CHECK(std::abs(ratio - 31.7) <= 0.5);
}

TEST_CASE("prefix estimate at shallower depths") {
  Binding b = case_binding(800, 1000);
  double s = 0.08;
  double p1 = 1800 * (1 - std::pow(1 - s, 800.0 * 1000));
  double p2 = 1800.0 * 800 * (1 - std::pow(1 - s, 1000.0));
  CHECK(b.prefix_nnz("B", 1) == doctest::Approx(p1));
  CHECK(b.prefix_nnz("B", 2) == doctest::Approx(p2));
  b.nnz["nnz(B,2)"] = 7;
  CHECK(b.prefix_nnz("B", 2) == 7);
}

TEST_CASE("aux bytes") {
  Binding small = case_binding(800, 1000);
  Binding large = case_binding(1600, 2000);
  CHECK(std::abs(aux_bytes(fx::jk_temp(), small) / kMiB - 3.05) <= 0.01);
  CHECK(std::abs(aux_bytes(fx::jk_temp(), large) / kMiB - 12.21) <= 0.01);
  CHECK(aux_bytes(fx::jk_temp(), large) == 1600LL * 2000 * 4);
  CHECK(aux_bytes(fx::jk_scalar(), large) == 1600LL * 2000 * 4 + 4);
  CHECK(aux_bytes(fx::k_temp(), large) == 2000LL * 4);
  CHECK(aux_bytes(fx::unsplit(), large) == 0);

  // A scalar temporary costs one element.
  int scalars = 0;
  for (const auto& sc : fx::kernel_space()) {
    auto temps = temps_of(sc.graph);
    if (temps.size() != 1 || temps[0].arity() != 0) continue;
    CHECK(aux_bytes(sc.graph, large) == 4);
    ++scalars;
  }
  CHECK(scalars > 0);
  large.elem_bytes = 8;
  CHECK(aux_bytes(fx::k_temp(), large) == 2000LL * 8);
}
