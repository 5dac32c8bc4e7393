#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ein/document.hpp"
#include "ein/expr.hpp"
#include "ein/rewrite.hpp"

namespace ein {

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Field terms have no value.
class Unsupported : public EvalError {
 public:
  using EvalError::EvalError;
};

// ---- symbolic values ----
//
// A reduced value is a sum of monomials c * a1 * ... * an. Atoms are basis-indexed
// tensors, Kronecker and permutation values, and opaque operators that do not reduce
// (sqrt, exp, kappa, trig, reciprocal, residual index sums).

struct Value;

enum class AtomKind { Kron, Eps, Tensor, Sqrt, Exp, Kappa, Sin, Cos, Tan, Asin, Acos, Atan, Inv, Sum };

struct Atom {
  AtomKind kind;
  std::string name;  // tensor id, or the sum binder
  MultiIndex idx;    // basis factors b_mu / kron / eps indices
  int n = 0;         // sum bound
  std::vector<Value> args;
  std::string key;   // canonical print, used for ordering
};

struct Term {
  Rational coeff;
  std::vector<Atom> atoms;  // sorted by key
};

struct Value {
  std::vector<Term> terms;  // sorted by key, nonzero coefficients
};

Value realValue(const Rational& r);
Value kronValue(const IndexTerm& i, const IndexTerm& j);
Value epsValue(const MultiIndex& alpha);
Value tensorValue(const std::string& name, const MultiIndex& basis);

Value addValues(const Value& a, const Value& b);
Value negValue(const Value& a);
Value mulValues(const Value& a, const Value& b);
// Sum over binder i = 1..n; contracts kron pairs (delta chains and delta traces).
Value sumValue(const std::string& i, int n, const Value& body);
Value substituteValue(const Value& v, const std::string& from, const IndexTerm& to);

bool isReal(const Value& v);
std::optional<Rational> realOf(const Value& v);
bool operator==(const Value& a, const Value& b);
std::string printValue(const Value& v);

// Reduction to canonical form; idempotent on reduced values.
Value reduceValue(const Value& v);

Value evalSymbolic(const DataEnv* psi, const Expr& e);

using Assignment = std::map<std::string, int>;

double flatten(const Value& v, const DataEnv& psi, const Assignment& rho);
// nullopt when a transcendental atom is present
std::optional<Rational> flattenExact(const Value& v, const DataEnv& psi, const Assignment& rho);
// exact below transcendental atoms, long double above
long double flattenWide(const Value& v, const DataEnv& psi, const Assignment& rho);

// ---- numeric oracle ----

struct EvalOptions {
  bool kappaIdentity = true;
};

double evalNumeric(const DataEnv& psi, const Assignment& rho, const Expr& e, EvalOptions opt = {});
long double evalNumericWide(const DataEnv& psi, const Assignment& rho, const Expr& e, EvalOptions opt = {});
// nullopt when e uses sqrt, exp or trig
std::optional<Rational> evalExact(const DataEnv& psi, const Assignment& rho, const Expr& e, EvalOptions opt = {});
bool isAlgebraic(const Expr& e);
bool hasFieldTerms(const Expr& e);

// every assignment of the given context, in row-major order
std::vector<Assignment> assignments(const IndexCtx& sigma);
// dense result over sigma, row-major
std::vector<double> evalArray(const DataEnv& psi, const IndexCtx& sigma, const Expr& e);

bool closeEnough(double a, double b);

struct ValueCheck {
  bool skipped = false;
  bool ok = true;
  bool exact = false;
  long assignments = 0;
  long undefined = 0;  // lhs not defined (division by zero, domain)
  std::string detail;
};

ValueCheck checkValuePreservation(const TypeEnv& gamma, const IndexCtx& sigma, const RewriteStep& step,
                                  const DataEnv& psi, bool parallel = false);

// compare two expressions of the same type, each optionally summed over extra indices
ValueCheck compareValues(const IndexCtx& sigma, const Expr& lhs, const std::vector<std::pair<std::string, int>>& lhsSums,
                         const Expr& rhs, const std::vector<std::pair<std::string, int>>& rhsSums, const DataEnv& psi,
                         bool parallel = false);

}  // namespace ein
