#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "ein/document.hpp"
#include "ein/expr.hpp"
#include "ein/rewrite.hpp"

namespace ein {

struct GenConfig {
  std::uint64_t seed = 1;
  int maxDepth = 6;
  std::vector<int> dims{2, 3};
  bool fieldTerms = true;
  double atomProb = 0.15;  // chance of stopping early at each level
  // production name -> relative weight; missing names weigh 1
  std::map<std::string, double> weights;
};

class GenerationExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// S, A2, A3, M2, M3, X2, X3 tensors; F2, G2, F3, G3 fields; V2, V3 images; H kernel.
const TypeEnv& standardGamma();

void validateConfig(const GenConfig& cfg);

Expr genWellTyped(const GenConfig& cfg, const TypeEnv& gamma, const IndexCtx& sigma, const EinType& target,
                  std::mt19937_64& rng);

struct GenCase {
  IndexCtx sigma;
  EinType type;
  Expr expr;
};

std::uint64_t caseSeed(std::uint64_t seed, std::uint64_t index);
GenCase genCase(const GenConfig& cfg, std::uint64_t index);
DataEnv genData(const TypeEnv& gamma, std::uint64_t seed);

enum class Property { Type, Value, Descent, NfEquiv, Symbolic };

const char* propertyName(Property p);
Property propertyFromName(const std::string& name);

struct Failure {
  std::uint64_t caseIndex = 0;
  Expr original;
  IndexCtx sigma;
  Expr shrunk;
  IndexCtx shrunkSigma;
  std::string diagnosis;
  Json trace;
};

struct PropertyReport {
  std::string property;
  long cases = 0;
  long steps = 0;
  long checked = 0;  // value: steps compared
  long skipped = 0;  // value: field steps
  std::vector<Failure> failures;
  double elapsed = 0;
};

struct CaseOutcome {
  long steps = 0;
  long checked = 0;
  long skipped = 0;
  std::optional<std::string> failure;
};

// One property on one expression.
CaseOutcome checkProperty(Property p, const IndexCtx& sigma, const Expr& e, const DataEnv& psi);

// Greedy subterm replacement while the property keeps failing.
std::pair<Expr, IndexCtx> shrink(Property p, const IndexCtx& sigma, const Expr& e, const DataEnv& psi);

PropertyReport runSuite(Property p, const GenConfig& cfg, long cases, bool parallel = false);

Json reportToDocument(const PropertyReport& r);
std::string reportSummary(const PropertyReport& r);

// ---- exhaustive terminal <=> normal form ----

struct Signature {
  std::string name;
  IndexCtx sigma;
  std::vector<Expr> leaves;
  std::vector<std::function<Expr(const Expr&)>> unaries;
  std::vector<std::function<Expr(const Expr&, const Expr&)>> binaries;
};

std::vector<Signature> enumerationSignatures();

struct EnumReport {
  std::string signature;
  long candidates = 0;
  long wellTyped = 0;
  long normalForms = 0;
  long disagreements = 0;
  std::vector<std::string> examples;
};

// all trees of at most maxNodes AST nodes
EnumReport enumerateNfEquiv(const Signature& sig, int maxNodes, bool parallel = false);

// ---- non-confluence ----

struct ConfluenceWitness {
  bool found = false;
  IndexCtx sigma;
  Expr original;
  RewriteTrace first, second;
  bool valuesAgree = false;
  std::string detail;
};

std::vector<std::pair<IndexCtx, Expr>> tripleEpsCorpus();
ConfluenceWitness findNonConfluence(const IndexCtx& sigma, const Expr& e, const DataEnv& psi);

}  // namespace ein
