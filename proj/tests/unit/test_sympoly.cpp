#include <doctest.h>

#include <cmath>
#include <random>

#include "bigsched/error.hpp"
#include "bigsched/sympoly.hpp"

using namespace bigsched;

TEST_CASE("canonical text") {
  SymPoly p = parse_poly("K*L*M*N + L*M*nnz(B,3)");
  CHECK(p.str() == "K*L*M*N + L*M*nnz(B,3)");
  CHECK(parse_poly("M*L*nnz(B,3) + N*M*L*K") == p);
  CHECK(parse_poly("2*I + I").str() == "3*I");
  CHECK(parse_poly("I - I").is_zero());
  CHECK(parse_poly("I - I").str() == "0");
  CHECK(parse_poly("(I + J)*(I - J)") == parse_poly("I*I - J*J"));
  CHECK(parse_poly("s(B)*I*J").str() == parse_poly("I*J*s(B)").str());
  CHECK(parse_poly("1 + J*K").constant_term() == 1);
}

TEST_CASE("text round trip") {
  for (const char* t : {"0", "1", "3*I*J*nnz(B,2) + K", "J*K + K", "L*M*N*nnz(B,3)", "2*s(B)*I"}) {
    SymPoly p = parse_poly(t);
    CHECK(parse_poly(p.str()) == p);
  }
}

TEST_CASE("parse errors name the problem") {
  CHECK_THROWS_AS(parse_poly("I +"), ValidationError);
  CHECK_THROWS_AS(parse_poly("nnz(B)"), ValidationError);
  CHECK_THROWS_AS(parse_relation("I J"), ValidationError);
}

TEST_CASE("relations") {
  Relation r = parse_relation("J = 2*I");
  CHECK(r.op == Relation::Op::Eq);
  CHECK(r.lhs == parse_poly("J"));
  CHECK(r.rhs == parse_poly("2*I"));
  CHECK(parse_relation("nnz(B,1) <= I").op == Relation::Op::Le);
  CHECK(parse_relation("K > 1").op == Relation::Op::Gt);
  CHECK(r.holds(4, 4));
  CHECK_FALSE(r.holds(4, 5));
}

TEST_CASE("evaluate") {
  Binding b;
  b.bounds = {{"I", 1800}, {"J", 800}, {"K", 1000}, {"L", 64}, {"M", 16}, {"N", 32}};
  b.sparsity = {{"B", 0.08}};
  b.tensor_dims = {{"B", {"I", "J", "K"}}};
  // 0.08 * 1800 * 800 * 1000 * 64 * 16 * 32
  CHECK(evaluate(parse_poly("L*M*N*nnz(B,3)"), b) == doctest::Approx(3.77487e12).epsilon(1e-5));
  CHECK(evaluate(SymPoly::constant(1), b) == 1);
  CHECK_THROWS_AS(evaluate(parse_poly("Q"), b), ValidationError);
  Binding no_s = b;
  no_s.sparsity.clear();
  CHECK_THROWS_AS(evaluate(parse_poly("nnz(B,2)"), no_s), ValidationError);
}

TEST_CASE("prefix count model") {
  Binding b;
  b.bounds = {{"I", 10}, {"J", 20}, {"K", 30}};
  b.sparsity = {{"B", 0.1}};
  b.tensor_dims = {{"B", {"I", "J", "K"}}};
  CHECK(b.prefix_nnz("B", 3) == doctest::Approx(0.1 * 6000));
  CHECK(b.prefix_nnz("B", 2) == doctest::Approx(200 * (1 - std::pow(0.9, 30))));
  CHECK(b.prefix_nnz("B", 1) == doctest::Approx(10 * (1 - std::pow(0.9, 600))));
  b.nnz["nnz(B,2)"] = 17;
  CHECK(b.prefix_nnz("B", 2) == 17);
  b.sparsity["B"] = 1.0;
  CHECK(b.prefix_nnz("B", 1) == doctest::Approx(10));
  // Tiny sparsities keep precision.
  b.sparsity["B"] = 1e-12;
  CHECK(b.prefix_nnz("B", 1) == doctest::Approx(10 * 600 * 1e-12).epsilon(1e-6));
}

TEST_CASE("evaluate is a ring homomorphism") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> coef(-3, 3), pick(0, 3);
  const char* syms[] = {"I", "J", "nnz(B,1)", "s(B)"};
  auto random_poly = [&] {
    SymPoly p;
    for (int t = 0; t < 3; ++t) {
      SymPoly term = SymPoly::constant(coef(rng));
      for (int f = 0; f < pick(rng); ++f) term *= parse_poly(syms[pick(rng)]);
      p += term;
    }
    return p;
  };
  std::uniform_real_distribution<double> val(1, 9);
  for (int round = 0; round < 200; ++round) {
    Binding b;
    b.bounds = {{"I", val(rng)}, {"J", val(rng)}};
    b.sparsity = {{"B", val(rng) / 10}};
    b.nnz = {{"nnz(B,1)", val(rng)}};
    SymPoly p = random_poly(), q = random_poly();
    double ep = evaluate(p, b), eq = evaluate(q, b);
    CHECK(evaluate(p + q, b) == doctest::Approx(ep + eq));
    CHECK(evaluate(p * q, b) == doctest::Approx(ep * eq));
  }
}
