#include <doctest.h>

#include "common.hpp"

using namespace ein;
using testenv::ex;

namespace {

const IndexCtx& sigma() { return testenv::env().sigma; }
const TypeEnv& gamma() { return testenv::env().gamma; }

TypeErrorCode codeOf(const std::string& s, const IndexCtx& sg = sigma()) {
  auto err = typeError(gamma(), sg, ex(s));
  REQUIRE(err.has_value());
  return err->code;
}

}  // namespace

TEST_CASE("operator types take the result shape from the context") {
  EinType t = inferType(gamma(), sigma(), ex("T[i]"));
  CHECK_FALSE(t.field);
  CHECK(t.shape == sigma());
  CHECK(printType(t) == "TEN[i:3,j:3,k:3]");

  EinType f = inferType(gamma(), sigma(), ex("d(i, F[])"));
  CHECK(f.field);
  CHECK(f.dim == 3);
  CHECK(printType(inferType(gamma(), sigma(), ex("U[j] @ X[]"))) == "TEN[i:3,j:3,k:3]");
  CHECK(printType(inferType(gamma(), sigma(), ex("lift(3, T[i])"))) == "FLD_3[i:3,j:3,k:3]");
}

TEST_CASE("typing errors") {
  CHECK(codeOf("Q[i]") == TypeErrorCode::UnboundParam);
  CHECK(codeOf("T[l]") == TypeErrorCode::UnboundIndex);
  CHECK(codeOf("T[i,j]") == TypeErrorCode::ArityMismatch);
  CHECK(codeOf("T[4]") == TypeErrorCode::BoundMismatch);
  CHECK(codeOf("sum(i,1,3, T[i])") == TypeErrorCode::DuplicateIndex);
  CHECK(codeOf("F[] + T[i]") == TypeErrorCode::KindMismatch);
  CHECK(codeOf("lift(2, T[i]) + F[]") == TypeErrorCode::DimMismatch);
  CHECK(codeOf("sum(l,1,2, T[l])") == TypeErrorCode::BoundMismatch);
}

TEST_CASE("error paths point at the offending subterm") {
  auto err = typeError(gamma(), sigma(), ex("S[] + (T[i] * T[l])"));
  REQUIRE(err);
  CHECK(pathString(err->path) == "/1/1");
}

TEST_CASE("derivative bodies do not see the derivative index") {
  CHECK(wellTyped(gamma(), sigma(), ex("d(i, U[j])")));
  CHECK_FALSE(wellTyped(gamma(), sigma(), ex("d(i, U[i])")));
  IndexCtx c = childContext(sigma(), ex("d(i, U[j])"), 0);
  CHECK_FALSE(c.contains("i"));
  CHECK(c.contains("j"));
}

TEST_CASE("delta application binds its second index in the right factor") {
  IndexCtx sg{{"i", 3}};
  CHECK(wellTyped(gamma(), sg, ex("delta(i,j) * T[j]")));
  CHECK_FALSE(wellTyped(gamma(), sg, ex("delta(i,j) * S[]")));
  IndexCtx c = childContext(sg, ex("delta(i,j) * T[j]"), 1);
  CHECK(c.contains("j"));
}

TEST_CASE("summation extends the context") {
  IndexCtx c = childContext(sigma(), ex("sum(l,1,2, S[])"), 0);
  CHECK(c.bound("l") == 2);
  CHECK(c.size() == 4);
}

TEST_CASE("index support") {
  CHECK(isScalar(ex("S[] * T[1]")));
  CHECK_FALSE(isScalar(ex("T[i]")));
  CHECK(indexSupport(ex("sum(l,1,3, M[l,j])")) == std::set<std::string>{"j"});
  CHECK(indexSupport(ex("eps(i,j,k)")) == std::set<std::string>{"i", "j", "k"});
}

TEST_CASE("inversion recovers child types") {
  Expr e = ex("T[i] + M[i,j]");
  auto parts = invertType(gamma(), sigma(), e, inferType(gamma(), sigma(), e));
  REQUIRE(parts.size() == 2);
  for (auto& p : parts) {
    REQUIRE(p.type);
    CHECK(*p.type == inferType(gamma(), sigma(), e));
  }
  Expr pr = ex("U[j] @ X[]");
  auto pp = invertType(gamma(), sigma(), pr, inferType(gamma(), sigma(), pr));
  REQUIRE(pp.size() == 2);
  CHECK(pp[0].type->field);
  CHECK_FALSE(pp[1].type.has_value());
}
