#include <doctest.h>

#include "common.hpp"

using namespace ein;
using testenv::ex;

TEST_CASE("print is a fixpoint of parse") {
  const char* cases[] = {
      "delta(i,j) * T[j]",
      "eps(i,j,k) * d([j,k], F[])",
      "sum(l,1,3, S[] * T[l])",
      "sqrt(S[]) * sqrt(S[])",
      "sum(l,1,3, U[l]) @ X[]",
      "(d(i, F[]) * G[] - F[] * d(i, G[])) / (G[] * G[])",
      "-(T[1] + 0.5)",
      "frac(1,3) * S[]",
      "lift(3, M[i,2]) + conv(V,[],H,[i])",
  };
  for (const char* c : cases) {
    CAPTURE(c);
    Expr e = ex(c);
    CHECK(print(e) == c);
    CHECK(print(ex(print(e))) == print(e));
  }
}

TEST_CASE("fields and tensors are told apart by the environment") {
  CHECK(ex("F[]")->op == Op::Field);
  CHECK(ex("T[i]")->op == Op::Tensor);
  CHECK(parse("F[]")->op == Op::Tensor);
}

TEST_CASE("parse errors carry a position") {
  try {
    parse("T[i] +");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line == 1);
    CHECK(e.col >= 6);
  }
  CHECK_THROWS_AS(parse("sum(i, T[i])"), ParseError);
  CHECK_THROWS_AS(parse("T[i"), ParseError);
}

TEST_CASE("structured documents round-trip") {
  for (const char* c : {"delta(i,j) * T[j]", "d([j,k], F[] / G[])", "sum(l,1,2, eps(l,1) * T[l]) @ X[]",
                        "conv(V,[i],H,[j,k])", "pow(S[], 3)"}) {
    CAPTURE(c);
    Expr e = ex(c);
    Json d = toDocument(e);
    CHECK(print(fromDocument(d)) == print(e));
    CHECK(toDocument(fromDocument(Json::parse(d.dump()))) == d);
  }
  CHECK_THROWS_AS(fromDocument(Json::parse(R"({"node": "bogus", "children": [], "attrs": {}})")), FormatError);
}

TEST_CASE("environment and data files") {
  const Env& env = testenv::env();
  CHECK(env.sigma.size() == 3);
  CHECK(env.gamma.at("U").kind == ParamKind::Fld);
  CHECK(env.gamma.at("U").dim == 3);
  CHECK(env.gamma.at("M").shape == std::vector<int>{3, 3});
  Env again = parseEnv(printEnv(env));
  CHECK(again.gamma == env.gamma);
  CHECK(again.sigma == env.sigma);

  DataEnv d = parseData(R"({"tensors": {"T": {"shape": [3], "data": [1, "1/2", -2]}}})");
  REQUIRE(d.count("T"));
  CHECK(d["T"].data[1] == Rational(1, 2));
  CHECK(d["T"].data[2] == -2);
}
