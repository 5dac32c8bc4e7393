#include <doctest.h>

#include "common.hpp"
#include "ein/analysis.hpp"
#include "ein/harness.hpp"
#include "ein/rewrite.hpp"

using namespace ein;
using testenv::ex;

namespace {

const TypeEnv& gamma() { return testenv::env().gamma; }
const IndexCtx& sigma() { return testenv::env().sigma; }

// second implementation of the size table, for cross-checking
BigInt oracleSize(const Expr& e) {
  switch (e->op) {
    case Op::Const: case Op::Tensor: case Op::Field: case Op::Conv: case Op::Delta:
      return 1;
    case Op::Eps:
      return 4;
    case Op::Add: case Op::Sub: case Op::Mul:
      return 1 + oracleSize(e->kids[0]) + oracleSize(e->kids[1]);
    case Op::Div:
      return 2 + oracleSize(e->kids[0]) + oracleSize(e->kids[1]);
    case Op::Sum:
      return 2 + 2 * oracleSize(e->kids[0]);
    case Op::Probe:
      return 2 * oracleSize(e->kids[0]);
    case Op::Partial: {
      BigInt s = oracleSize(e->kids[0]);
      BigInt p;
      mpz_ui_pow_ui(p.get_mpz_t(), 5, s.get_ui());
      return p * s;
    }
    default:
      return 1 + oracleSize(e->kids[0]);
  }
}

bool violates(const std::string& s, const std::string& production, const IndexCtx& sg = sigma()) {
  NfVerdict v = isNormalForm(gamma(), sg, ex(s));
  for (auto& x : v.violations)
    if (x.production == production) return true;
  return false;
}

}  // namespace

TEST_CASE("size table rows") {
  CHECK(size(ex("eps(i,j,k)")) == 4);
  CHECK(size(ex("d(i, F[])")) == 5);
  CHECK(size(ex("(F[] / G[]) @ X[]")) == 8);
  CHECK(size(ex("F[] @ X[] / G[] @ X[]")) == 6);
  CHECK(size(ex("T[i]")) == 1);
  CHECK(size(ex("sum(l,1,3, T[l])")) == 4);
  CHECK(size(ex("-sqrt(S[])")) == 3);
  CHECK(size(ex("sin(S[])")) == 2);
  // 5^3 * 3
  CHECK(size(ex("d(i, F[] * G[])")) == 375);
}

TEST_CASE("size agrees with a second implementation on generated terms") {
  GenConfig cfg;
  cfg.seed = 99;
  for (int k = 0; k < 500; ++k) {
    GenCase c = genCase(cfg, k);
    CAPTURE(print(c.expr));
    CHECK(size(c.expr) == oracleSize(c.expr));
    CHECK(size(c.expr) >= 1);
  }
}

TEST_CASE("normal-form restrictions") {
  CHECK(isNormalForm(gamma(), sigma(), ex("T[i]")).inNormalForm);
  CHECK(violates("delta(i,j) * T[j]", "restriction 3", IndexCtx{{"i", 3}}));
  CHECK(violates("eps(i,j,k) * d([j,k], F[])", "restriction 2"));
  CHECK(violates("sum(l,1,3, S[] * T[l])", "restriction 5"));
  CHECK(violates("sqrt(S[]) * sqrt(S[])", "restriction 4"));
  IndexCtx jklm{{"j", 3}, {"k", 3}, {"l", 3}, {"m", 3}};
  CHECK(violates("sum(i,1,3, eps(i,j,k) * eps(i,l,m))", "restriction 1", jklm));
}

TEST_CASE("terminal examples") {
  CHECK(isTerminal(gamma(), sigma(), ex("T[i]")));
  CHECK_FALSE(isTerminal(gamma(), sigma(), ex("T[i] - 0")));
  CHECK_FALSE(isTerminal(gamma(), sigma(), ex("sqrt(S[]) * sqrt(S[])")));
}

TEST_CASE("normal form and terminal agree along traces") {
  for (const char* s : {"d(i, F[] / G[]) + lift(3, 0 * T[i])", "sum(l,1,3, U[l]) @ X[] * (S[] - 0)", "-(-(T[j] * 1))"}) {
    CAPTURE(s);
    RewriteTrace t = normalize(gamma(), sigma(), ex(s));
    CHECK(isNormalForm(gamma(), sigma(), t.initial).inNormalForm == isTerminal(gamma(), sigma(), t.initial));
    for (auto& st : t.steps)
      CHECK(isNormalForm(gamma(), sigma(), st.after).inNormalForm == isTerminal(gamma(), sigma(), st.after));
    CHECK(isNormalForm(gamma(), sigma(), t.final).inNormalForm);
  }
}

TEST_CASE("metric lemmas by direct arithmetic") {
  // lemx at s = 1: 25 > 21; lemz at s = 1: 50 > 41
  CHECK(25 > 16 + 5);
  CHECK(2 * 25 > 1 * (16 + 5) + 20);
  MetricReport r = checkMetricLemmas(6);
  CHECK(r.ok);
  CHECK(r.failures.empty());
  CHECK(r.checks > 0);
  bool c14 = false;
  for (auto& m : ruleMetrics()) {
    if (m.name != "C14") continue;
    auto [l, rr] = m.sizes({1, 1});
    if (l == 375) {
      c14 = true;
      CHECK(rr == 15);
    }
  }
  CHECK(c14);
}
