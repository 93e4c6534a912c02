#include <doctest.h>

#include "bigsched/error.hpp"
#include "fixtures.hpp"

using namespace bigsched;
using fx::idx;

namespace {

IndexSet set_of(const std::string& names) {
  IndexList l = idx(names);
  return {l.begin(), l.end()};
}

}  // namespace

TEST_CASE("parse the four-input kernel") {
  ContractionExpr e = fx::kernel();
  CHECK(e.output.str() == "A(l,m,n)");
  REQUIRE(e.inputs.size() == 4);
  CHECK(IndexSet(e.contracted.begin(), e.contracted.end()) == set_of("ijk"));
  CHECK(e.inputs[0].is_sparse());
  CHECK_FALSE(e.inputs[1].is_sparse());
  CHECK(e.sparse_input() == &e.inputs[0]);
}

TEST_CASE("dense matmul contracts j") {
  ContractionExpr e = parse_einsum("X(i,k)=A(i,j)*B(j,k)");
  CHECK(e.contracted == idx("j"));
  CHECK(e.sparse_input() == nullptr);
}

TEST_CASE("copy contracts nothing") {
  ContractionExpr e = parse_einsum("Y(i)=Z(i)");
  CHECK(e.contracted.empty());
}

TEST_CASE("print and reparse round trip") {
  ContractionExpr e = fx::kernel();
  Formats f;
  add_format_flag(f, "B:ccc");
  CHECK(parse_einsum(e.str(), f) == e);
  ContractionExpr spmm = parse_einsum(" X( i , k ) = B(i,j) * C(j,k) ", {{"B", parse_level_pattern("dc")}});
  CHECK(parse_einsum(spmm.str(), {{"B", parse_level_pattern("dc")}}) == spmm);
}

TEST_CASE("parse errors") {
  CHECK_THROWS_AS(parse_einsum("A(i,j)=B(i,i)"), ValidationError);
  CHECK_THROWS_AS(parse_einsum("A(i,q)=B(i,j)"), ValidationError);
  CHECK_THROWS_AS(parse_einsum("A(i)=B(i)", {{"Z", parse_level_pattern("c")}}), ValidationError);
  CHECK_THROWS_AS(parse_einsum("A(i)=B(i)*", {}), ParseError);
  try {
    parse_einsum("A(i,j)=B(i,j)*%C(j)");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.position() == 14);
  }
  // Two sparse inputs are outside the supported space.
  CHECK_THROWS_AS(parse_einsum("A(i)=B(i,j)*C(j)", {{"B", parse_level_pattern("dc")},
                                                    {"C", parse_level_pattern("c")}}),
                  ValidationError);
  CHECK_THROWS_AS(parse_level_pattern("cx"), UsageError);
  Formats f;
  CHECK_THROWS_AS(add_format_flag(f, "B"), UsageError);
}

TEST_CASE("access constraints") {
  CHECK(access_constraints(fx::kernel()) ==
        std::set<Precedence>{{IndexVar{"i"}, IndexVar{"j"}}, {IndexVar{"j"}, IndexVar{"k"}}});
  ContractionExpr csr = parse_einsum("X(i,k)=B(i,j)*C(j,k)", {{"B", parse_level_pattern("dc")}});
  CHECK(access_constraints(csr) == std::set<Precedence>{{IndexVar{"i"}, IndexVar{"j"}}});
  CHECK(access_constraints(parse_einsum("X(i,k)=B(i,j)*C(j,k)")).empty());
  // Only the sparse access matters: renaming or reshaping dense inputs is inert.
  ContractionExpr other = parse_einsum("A(l,m,n)=B(i,j,k)*Q(l,i)*D(m,j)*E(n,k)",
                                       {{"B", parse_level_pattern("ccc")}});
  CHECK(access_constraints(other) == access_constraints(fx::kernel()));
}

TEST_CASE("a compressed inner level still constrains the whole chain") {
  ContractionExpr e = parse_einsum("A(i)=B(i,j,k)*C(j,k)", {{"B", parse_level_pattern("ddc")}});
  CHECK(access_constraints(e).size() == 2);
}

TEST_CASE("indices_of") {
  ContractionExpr e = fx::kernel();
  std::vector<TensorAccess> prod(e.inputs.begin(), e.inputs.begin() + 3);
  CHECK(indices_of(prod) == set_of("ijklm"));
  CHECK(indices_of(e.inputs[3]) == set_of("kn"));
  CHECK(indices_of(std::span<const TensorAccess>{}).empty());
}

TEST_CASE("contracted indices never meet the output") {
  for (const char* text : {"A(l,m,n)=B(i,j,k)*C(i,l)*D(j,m)*E(k,n)", "X(i,k)=A(i,j)*B(j,k)",
                           "y(i)=A(i,j)*x(j)", "s()=a(i)*b(i)"}) {
    ContractionExpr e = parse_einsum(text);
    for (const auto& c : e.contracted) CHECK_FALSE(e.output.has(c));
  }
}
