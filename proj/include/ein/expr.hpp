#pragma once

#include <gmpxx.h>

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace ein {

using Rational = mpq_class;
using BigInt = mpz_class;

// An index is either a variable name or a 1-based constant component.
struct IndexTerm {
  std::string var;
  int value = 0;

  static IndexTerm v(std::string name) { return {std::move(name), 0}; }
  static IndexTerm c(int k) { return {"", k}; }
  bool isVar() const { return !var.empty(); }
  bool operator==(const IndexTerm&) const = default;
};

using MultiIndex = std::vector<IndexTerm>;

MultiIndex vars(std::initializer_list<const char*> names);

// Ordered index context; the order is the result shape.
class IndexCtx {
 public:
  IndexCtx() = default;
  IndexCtx(std::initializer_list<std::pair<std::string, int>> init);

  const std::vector<std::pair<std::string, int>>& entries() const { return entries_; }
  bool contains(const std::string& name) const;
  std::optional<int> bound(const std::string& name) const;
  bool empty() const { return entries_.empty(); }
  size_t size() const { return entries_.size(); }

  IndexCtx with(const std::string& name, int n) const;
  IndexCtx without(const std::string& name) const;
  void push(const std::string& name, int n) { entries_.emplace_back(name, n); }

  bool operator==(const IndexCtx&) const = default;

 private:
  std::vector<std::pair<std::string, int>> entries_;
};

enum class ParamKind { Ten, Fld, Img, Krn };

struct SurfaceType {
  ParamKind kind = ParamKind::Ten;
  int dim = 0;  // probe dimension for FLD/IMG
  std::vector<int> shape;
  bool operator==(const SurfaceType&) const = default;
};

// Γ; map order gives deterministic printing.
using TypeEnv = std::map<std::string, SurfaceType>;

struct EinType {
  bool field = false;
  int dim = 0;
  IndexCtx shape;
  bool operator==(const EinType&) const = default;
};

enum class Op {
  Const, Tensor, Field, Conv, Delta, Eps, Sum, Partial, Probe, Lift,
  Neg, Sqrt, Exp, Kappa, Pow, Sin, Cos, Tan, Asin, Acos, Atan,
  Add, Sub, Mul, Div
};

bool isUnary(Op op);
bool isBinary(Op op);
bool isTrig(Op op);
const char* opName(Op op);
std::optional<Op> opFromName(const std::string& name);

struct Node;
using Expr = std::shared_ptr<const Node>;

struct Node {
  Op op = Op::Const;
  Rational value;        // Const
  std::string name;      // Tensor/Field id, Conv image, Sum binder
  std::string kernel;    // Conv
  MultiIndex alpha;      // Tensor/Field/Conv/Eps, Delta (2 items), Partial nu
  MultiIndex beta;       // Conv
  int n = 0;             // Sum bound, Lift dim, Pow exponent
  std::vector<Expr> kids;
};

// builders
Expr cst(const Rational& c);
Expr cst(long c);
Expr ten(const std::string& name, MultiIndex alpha = {});
Expr fld(const std::string& name, MultiIndex alpha = {});
Expr conv(const std::string& image, MultiIndex alpha, const std::string& kernel, MultiIndex beta);
Expr delta(IndexTerm i, IndexTerm j);
Expr eps(MultiIndex alpha);
Expr sum(const std::string& binder, int n, Expr body);
Expr partial(MultiIndex nu, Expr body);
Expr probe(Expr field, Expr point);
Expr lift(int d, Expr body);
Expr unary(Op op, Expr body);
Expr pow(Expr body, int n);
Expr binary(Op op, Expr lhs, Expr rhs);
Expr neg(Expr e);
Expr add(Expr a, Expr b);
Expr sub(Expr a, Expr b);
Expr mul(Expr a, Expr b);
Expr div(Expr a, Expr b);

// copy of a node with new children
Expr withKids(const Expr& e, std::vector<Expr> kids);

bool equal(const Expr& a, const Expr& b);
size_t nodeCount(const Expr& e);

using Path = std::vector<int>;
Expr subtermAt(const Expr& e, const Path& p);
Expr replaceAt(const Expr& e, const Path& p, const Expr& repl);
std::string pathString(const Path& p);

bool isZero(const Expr& e);  // 0 or lift(d, 0)

std::set<std::string> freeIndexVars(const Expr& e);
bool occursFree(const std::string& v, const Expr& e);
// every index variable name mentioned, bound or free
std::set<std::string> allIndexVars(const Expr& e);
std::string freshName(const std::string& base, const std::set<std::string>& avoid);

// Left factor of a product that triggers the delta/eps application typing.
bool isDeltaHead(const Expr& e);
bool isEpsHead(const Expr& e);
// mul(delta(i,j), e) with j a variable free in e
bool isDeltaApplication(const Expr& e);

// Capture-avoiding; binders renamed to dodge `to` also avoid `avoid`.
Expr substituteIndex(const Expr& e, const std::string& from, const IndexTerm& to,
                     const std::set<std::string>& avoid = {});

}  // namespace ein
