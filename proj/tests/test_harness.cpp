#include <doctest.h>

#include "common.hpp"
#include "ein/harness.hpp"
#include "ein/value.hpp"

using namespace ein;

TEST_CASE("generated expressions are well typed at their target") {
  GenConfig cfg;
  cfg.seed = 7;
  for (int k = 0; k < 300; ++k) {
    GenCase c = genCase(cfg, k);
    CAPTURE(print(c.expr));
    REQUIRE(wellTyped(standardGamma(), c.sigma, c.expr));
    CHECK(inferType(standardGamma(), c.sigma, c.expr) == c.type);
    for (auto& [v, n] : c.sigma.entries()) CHECK((n == 2 || n == 3));
  }
}

TEST_CASE("generation is a function of seed and case index") {
  GenConfig cfg;
  cfg.seed = 11;
  CHECK(print(genCase(cfg, 42).expr) == print(genCase(cfg, 42).expr));
  CHECK(caseSeed(11, 1) != caseSeed(11, 2));
  CHECK(caseSeed(11, 1) != caseSeed(12, 1));
  GenConfig nf = cfg;
  nf.fieldTerms = false;
  for (int k = 0; k < 200; ++k) CHECK_FALSE(hasFieldTerms(genCase(nf, k).expr));
}

TEST_CASE("configuration checks") {
  GenConfig bad;
  bad.maxDepth = 0;
  CHECK_THROWS_AS(validateConfig(bad), std::invalid_argument);
  GenConfig dims;
  dims.dims = {4};
  CHECK_THROWS_AS(validateConfig(dims), std::invalid_argument);
  CHECK_NOTHROW(validateConfig(GenConfig{}));
}

TEST_CASE("property names") {
  for (Property p : {Property::Type, Property::Value, Property::Descent, Property::NfEquiv, Property::Symbolic})
    CHECK(propertyFromName(propertyName(p)) == p);
  CHECK_THROWS_AS(propertyFromName("nope"), std::invalid_argument);
}

TEST_CASE("small suites pass serially and in parallel") {
  GenConfig cfg;
  cfg.seed = 3;
  for (Property p : {Property::Type, Property::Descent, Property::NfEquiv, Property::Value, Property::Symbolic}) {
    CAPTURE(propertyName(p));
    PropertyReport a = runSuite(p, cfg, 300, false);
    PropertyReport b = runSuite(p, cfg, 300, true);
    CHECK(a.failures.empty());
    CHECK(a.cases == 300);
    CHECK(a.steps == b.steps);
    CHECK(a.checked == b.checked);
    CHECK(b.failures.empty());
  }
}

TEST_CASE("single-case property check") {
  IndexCtx sg{{"i", 3}};
  Expr e = parse("delta(i,k) * A3[k] + 0", &standardGamma());
  DataEnv psi = genData(standardGamma(), 1);
  CaseOutcome o = checkProperty(Property::Value, sg, e, psi);
  CHECK_FALSE(o.failure);
  CHECK(o.steps == 2);
  CHECK(o.checked == 2);
}

TEST_CASE("exhaustive enumeration at small size") {
  for (auto& sig : enumerationSignatures()) {
    CAPTURE(sig.name);
    EnumReport r = enumerateNfEquiv(sig, 5);
    CHECK(r.disagreements == 0);
    CHECK(r.wellTyped > 0);
    CHECK(r.normalForms <= r.wellTyped);
    EnumReport p = enumerateNfEquiv(sig, 5, true);
    CHECK(p.candidates == r.candidates);
    CHECK(p.normalForms == r.normalForms);
  }
}

TEST_CASE("non-confluence witness") {
  DataEnv psi = genData(standardGamma(), 2);
  bool any = false;
  for (auto& [sg, e] : tripleEpsCorpus()) {
    ConfluenceWitness w = findNonConfluence(sg, e, psi);
    CHECK(w.valuesAgree);
    if (w.found) {
      any = true;
      CHECK(print(w.first.final) != print(w.second.final));
    }
  }
  CHECK(any);
}

TEST_CASE("regressions: index capture and product reclassification") {
  DataEnv psi = genData(standardGamma(), 1);
  struct Case {
    IndexCtx sigma;
    const char* text;
  };
  Case cases[] = {
      // lift(delta)@x exposed as the left factor of a pointwise product
      {IndexCtx{{"k", 2}}, "sum(l,1,2, eps(2,k) * (lift(3, delta(l,k)) @ X3[] * lift(3, delta(k,l)) @ X3[]))"},
      // collapsing a delta application under a sum reusing its first index
      {IndexCtx{{"i", 2}, {"k", 2}},
       "delta(k,l) * (delta(l,k) * (0 * A2[k]) * (eps(3,2,1) * eps(l,i)) / (sum(k,1,3, eps(1,2)) / -S[]))"},
      // derivative pushed past a sum that reuses the derivative index
      {IndexCtx{{"k", 3}}, "d(k, G3[3] / sum(k,1,2, F3[]))"},
      // product rule over a delta application contracting the derivative index
      {IndexCtx{{"k", 3}, {"l", 2}}, "d(k, delta(l,k) * (F3[] * lift(3, A2[k])))"},
  };
  for (auto& c : cases) {
    CAPTURE(c.text);
    Expr e = parse(c.text, &standardGamma());
    REQUIRE(wellTyped(standardGamma(), c.sigma, e));
    for (Property p : {Property::Type, Property::Descent, Property::NfEquiv, Property::Value}) {
      CaseOutcome o = checkProperty(p, c.sigma, e, psi);
      CHECK_MESSAGE(!o.failure, propertyName(p), ": ", o.failure.value_or(""));
    }
  }
}
