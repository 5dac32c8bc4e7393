#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ein/document.hpp"
#include "ein/expr.hpp"
#include "ein/rewrite.hpp"

namespace ein {

BigInt size(const Expr& e);

struct NfIssue {
  std::string production;  // e.g. "restriction 3" or "D ::= -G"
  Path path;
  std::string detail;
};

struct NfVerdict {
  bool inNormalForm = true;
  std::vector<NfIssue> violations;
  // Literal grammar misses that no catalog rule can reduce; reported, not violations.
  std::vector<NfIssue> gaps;
};

NfVerdict isNormalForm(const TypeEnv& gamma, const IndexCtx& sigma, const Expr& e);
bool isTerminal(const TypeEnv& gamma, const IndexCtx& sigma, const Expr& e);

Json verdictToDocument(const NfVerdict& v);

// LHS and RHS sizes of one rule shape as functions of the sizes of its metavariables.
struct RuleMetric {
  std::string name;  // rule id plus variant
  int arity;         // number of size variables
  int minSize;       // smallest admissible metavariable size
  std::function<std::pair<BigInt, BigInt>(const std::vector<BigInt>&)> sizes;
};

const std::vector<RuleMetric>& ruleMetrics();

struct MetricReport {
  bool ok = true;
  long checks = 0;
  std::vector<std::string> failures;
};

MetricReport checkMetricLemmas(int maxS);

}  // namespace ein
