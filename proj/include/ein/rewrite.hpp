#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ein/document.hpp"
#include "ein/expr.hpp"

namespace ein {

enum class Rule {
  A1, A3, A4, A5, A6, A7, A8, A9,
  B1, B2, B3, B4, B5,
  C2, C3, C5, C6, C7, C8, C9, C10, C11, C14, C15, C16, C18, C19, C20, C21, C22,
  D1, D2, D3, D4, D5, D6, D8,
  E1, E2, E4, E5, E6
};

struct RuleId {
  char group;
  int number;
  const char* alias;  // nullptr when there is no R-number
  std::string name() const { return group + std::to_string(number); }
};

struct RuleInfo {
  Rule rule;
  RuleId id;
  const char* pattern;
  const char* replacement;
  const char* side;
};

// Priority order used by the rewriter.
const std::vector<RuleInfo>& ruleCatalog();
const RuleInfo& ruleInfo(Rule r);

class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct Strategy {
  bool outermost = false;  // pre-order instead of post-order
  bool rightmost = false;  // right-to-left children, last eps pair
};

struct RewriteStep {
  Rule rule;
  Path path;
  Expr before, after;            // whole expressions
  Expr redexBefore, redexAfter;  // the subterm at path
  IndexCtx localSigma;           // context at the redex
  BigInt sizeBefore, sizeAfter;
  std::optional<std::string> contracted;  // index summed away by A1
};

struct RewriteTrace {
  Expr initial;
  std::vector<RewriteStep> steps;
  Expr final;
};

struct Redex {
  Rule rule;
  Path path;
  IndexCtx localSigma;
  Expr replacement;
  std::optional<std::string> contracted;
};

std::optional<Redex> findRedex(const TypeEnv& gamma, const IndexCtx& sigma, const Expr& e, Strategy s = {});

// Throws InvariantViolation if size does not drop or the type changes.
std::optional<RewriteStep> rewriteOnce(const TypeEnv& gamma, const IndexCtx& sigma, const Expr& e, Strategy s = {});

RewriteTrace normalize(const TypeEnv& gamma, const IndexCtx& sigma, const Expr& e, Strategy s = {});

Json stepToDocument(const RewriteStep& step);
Json traceToDocument(const RewriteTrace& trace);

}  // namespace ein
