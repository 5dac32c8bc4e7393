#include "ein/expr.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace ein {

MultiIndex vars(std::initializer_list<const char*> names) {
  MultiIndex out;
  for (const char* n : names) out.push_back(IndexTerm::v(n));
  return out;
}

IndexCtx::IndexCtx(std::initializer_list<std::pair<std::string, int>> init) {
  for (auto& [k, v] : init) entries_.emplace_back(k, v);
}

bool IndexCtx::contains(const std::string& name) const { return bound(name).has_value(); }

std::optional<int> IndexCtx::bound(const std::string& name) const {
  for (auto& [k, v] : entries_)
    if (k == name) return v;
  return std::nullopt;
}

IndexCtx IndexCtx::with(const std::string& name, int n) const {
  IndexCtx out = without(name);
  out.entries_.emplace_back(name, n);
  return out;
}

IndexCtx IndexCtx::without(const std::string& name) const {
  IndexCtx out;
  for (auto& e : entries_)
    if (e.first != name) out.entries_.push_back(e);
  return out;
}

namespace {

struct OpInfo {
  Op op;
  const char* name;
};

const OpInfo kOps[] = {
    {Op::Const, "const"},   {Op::Tensor, "tensor"}, {Op::Field, "field"}, {Op::Conv, "conv"},
    {Op::Delta, "delta"},   {Op::Eps, "eps"},       {Op::Sum, "sum"},     {Op::Partial, "d"},
    {Op::Probe, "probe"},   {Op::Lift, "lift"},     {Op::Neg, "neg"},     {Op::Sqrt, "sqrt"},
    {Op::Exp, "exp"},       {Op::Kappa, "kappa"},   {Op::Pow, "pow"},     {Op::Sin, "sin"},
    {Op::Cos, "cos"},       {Op::Tan, "tan"},       {Op::Asin, "asin"},   {Op::Acos, "acos"},
    {Op::Atan, "atan"},     {Op::Add, "add"},       {Op::Sub, "sub"},     {Op::Mul, "mul"},
    {Op::Div, "div"},
};

}  // namespace

bool isUnary(Op op) { return op >= Op::Neg && op <= Op::Atan; }
bool isBinary(Op op) { return op >= Op::Add; }
bool isTrig(Op op) { return op >= Op::Sin && op <= Op::Atan; }

const char* opName(Op op) {
  for (auto& o : kOps)
    if (o.op == op) return o.name;
  return "?";
}

std::optional<Op> opFromName(const std::string& name) {
  for (auto& o : kOps)
    if (name == o.name) return o.op;
  return std::nullopt;
}

static Expr make(Node n) { return std::make_shared<const Node>(std::move(n)); }

Expr cst(const Rational& c) {
  Node n;
  n.op = Op::Const;
  n.value = c;
  n.value.canonicalize();
  return make(std::move(n));
}

Expr cst(long c) { return cst(Rational(c)); }

Expr ten(const std::string& name, MultiIndex alpha) {
  Node n;
  n.op = Op::Tensor;
  n.name = name;
  n.alpha = std::move(alpha);
  return make(std::move(n));
}

Expr fld(const std::string& name, MultiIndex alpha) {
  Node n;
  n.op = Op::Field;
  n.name = name;
  n.alpha = std::move(alpha);
  return make(std::move(n));
}

Expr conv(const std::string& image, MultiIndex alpha, const std::string& kernel, MultiIndex beta) {
  Node n;
  n.op = Op::Conv;
  n.name = image;
  n.kernel = kernel;
  n.alpha = std::move(alpha);
  n.beta = std::move(beta);
  return make(std::move(n));
}

Expr delta(IndexTerm i, IndexTerm j) {
  Node n;
  n.op = Op::Delta;
  n.alpha = {std::move(i), std::move(j)};
  return make(std::move(n));
}

Expr eps(MultiIndex alpha) {
  if (alpha.size() != 2 && alpha.size() != 3) throw std::invalid_argument("eps arity must be 2 or 3");
  Node n;
  n.op = Op::Eps;
  n.alpha = std::move(alpha);
  return make(std::move(n));
}

Expr sum(const std::string& binder, int bound, Expr body) {
  if (bound < 1) throw std::invalid_argument("sum bound must be >= 1");
  Node n;
  n.op = Op::Sum;
  n.name = binder;
  n.n = bound;
  n.kids = {std::move(body)};
  return make(std::move(n));
}

Expr partial(MultiIndex nu, Expr body) {
  if (nu.empty()) throw std::invalid_argument("empty derivative index");
  Node n;
  n.op = Op::Partial;
  n.alpha = std::move(nu);
  n.kids = {std::move(body)};
  return make(std::move(n));
}

Expr probe(Expr field, Expr point) {
  Node n;
  n.op = Op::Probe;
  n.kids = {std::move(field), std::move(point)};
  return make(std::move(n));
}

Expr lift(int d, Expr body) {
  if (d < 1) throw std::invalid_argument("lift dimension must be >= 1");
  Node n;
  n.op = Op::Lift;
  n.n = d;
  n.kids = {std::move(body)};
  return make(std::move(n));
}

Expr unary(Op op, Expr body) {
  if (!isUnary(op) || op == Op::Pow) throw std::invalid_argument("not a plain unary operator");
  Node n;
  n.op = op;
  n.kids = {std::move(body)};
  return make(std::move(n));
}

Expr pow(Expr body, int k) {
  Node n;
  n.op = Op::Pow;
  n.n = k;
  n.kids = {std::move(body)};
  return make(std::move(n));
}

Expr binary(Op op, Expr lhs, Expr rhs) {
  if (!isBinary(op)) throw std::invalid_argument("not a binary operator");
  Node n;
  n.op = op;
  n.kids = {std::move(lhs), std::move(rhs)};
  return make(std::move(n));
}

Expr neg(Expr e) { return unary(Op::Neg, std::move(e)); }
Expr add(Expr a, Expr b) { return binary(Op::Add, std::move(a), std::move(b)); }
Expr sub(Expr a, Expr b) { return binary(Op::Sub, std::move(a), std::move(b)); }
Expr mul(Expr a, Expr b) { return binary(Op::Mul, std::move(a), std::move(b)); }
Expr div(Expr a, Expr b) { return binary(Op::Div, std::move(a), std::move(b)); }

Expr withKids(const Expr& e, std::vector<Expr> kids) {
  Node n = *e;
  n.kids = std::move(kids);
  return make(std::move(n));
}

bool equal(const Expr& a, const Expr& b) {
  if (a == b) return true;
  if (a->op != b->op || a->n != b->n || a->name != b->name || a->kernel != b->kernel ||
      a->alpha != b->alpha || a->beta != b->beta || a->kids.size() != b->kids.size())
    return false;
  if (a->op == Op::Const && a->value != b->value) return false;
  for (size_t k = 0; k < a->kids.size(); ++k)
    if (!equal(a->kids[k], b->kids[k])) return false;
  return true;
}

size_t nodeCount(const Expr& e) {
  size_t c = 1;
  for (auto& k : e->kids) c += nodeCount(k);
  return c;
}

Expr subtermAt(const Expr& e, const Path& p) {
  Expr cur = e;
  for (int k : p) cur = cur->kids.at(k);
  return cur;
}

static Expr replaceFrom(const Expr& e, const Path& p, size_t at, const Expr& repl) {
  if (at == p.size()) return repl;
  auto kids = e->kids;
  kids.at(p[at]) = replaceFrom(kids[p[at]], p, at + 1, repl);
  return withKids(e, std::move(kids));
}

Expr replaceAt(const Expr& e, const Path& p, const Expr& repl) { return replaceFrom(e, p, 0, repl); }

std::string pathString(const Path& p) {
  std::string s = "/";
  for (size_t k = 0; k < p.size(); ++k) {
    if (k) s += "/";
    s += std::to_string(p[k]);
  }
  return s;
}

bool isZero(const Expr& e) {
  if (e->op == Op::Const) return e->value == 0;
  return e->op == Op::Lift && e->kids[0]->op == Op::Const && e->kids[0]->value == 0;
}

static void collectFree(const Expr& e, std::set<std::string>& out) {
  auto addAll = [&](const MultiIndex& m) {
    for (auto& t : m)
      if (t.isVar()) out.insert(t.var);
  };
  addAll(e->alpha);
  addAll(e->beta);
  if (e->op == Op::Sum) {
    std::set<std::string> inner;
    collectFree(e->kids[0], inner);
    inner.erase(e->name);
    out.insert(inner.begin(), inner.end());
    return;
  }
  for (auto& k : e->kids) collectFree(k, out);
}

std::set<std::string> freeIndexVars(const Expr& e) {
  std::set<std::string> out;
  collectFree(e, out);
  return out;
}

bool occursFree(const std::string& v, const Expr& e) {
  for (auto& t : e->alpha)
    if (t.var == v) return true;
  for (auto& t : e->beta)
    if (t.var == v) return true;
  if (e->op == Op::Sum && e->name == v) return false;
  for (auto& k : e->kids)
    if (occursFree(v, k)) return true;
  return false;
}

static void collectAll(const Expr& e, std::set<std::string>& out) {
  for (auto& t : e->alpha)
    if (t.isVar()) out.insert(t.var);
  for (auto& t : e->beta)
    if (t.isVar()) out.insert(t.var);
  if (e->op == Op::Sum) out.insert(e->name);
  for (auto& k : e->kids) collectAll(k, out);
}

std::set<std::string> allIndexVars(const Expr& e) {
  std::set<std::string> out;
  collectAll(e, out);
  return out;
}

std::string freshName(const std::string& base, const std::set<std::string>& avoid) {
  std::string stem = base;
  while (!stem.empty() && std::isdigit(static_cast<unsigned char>(stem.back()))) stem.pop_back();
  if (stem.empty()) stem = "v";
  for (int k = 1;; ++k) {
    std::string cand = stem + std::to_string(k);
    if (!avoid.count(cand)) return cand;
  }
}

bool isDeltaHead(const Expr& e) {
  return e->op == Op::Delta || (e->op == Op::Probe && e->kids[0]->op == Op::Delta);
}

bool isEpsHead(const Expr& e) {
  return e->op == Op::Eps || (e->op == Op::Probe && e->kids[0]->op == Op::Eps);
}

bool isDeltaApplication(const Expr& e) {
  if (e->op != Op::Mul || !isDeltaHead(e->kids[0])) return false;
  const Expr& d = e->kids[0]->op == Op::Delta ? e->kids[0] : e->kids[0]->kids[0];
  const IndexTerm& j = d->alpha[1];
  return j.isVar() && occursFree(j.var, e->kids[1]);
}

static MultiIndex substMulti(const MultiIndex& m, const std::string& from, const IndexTerm& to) {
  MultiIndex out = m;
  for (auto& t : out)
    if (t.var == from) t = to;
  return out;
}

Expr substituteIndex(const Expr& e, const std::string& from, const IndexTerm& to,
                     const std::set<std::string>& avoid) {
  if (!occursFree(from, e)) return e;
  if (e->op == Op::Sum) {
    Expr body = e->kids[0];
    std::string binder = e->name;
    if (to.isVar() && binder == to.var) {
      auto taken = allIndexVars(body);
      taken.insert(avoid.begin(), avoid.end());
      taken.insert(from);
      taken.insert(to.var);
      std::string fresh = freshName(binder, taken);
      body = substituteIndex(body, binder, IndexTerm::v(fresh));
      binder = fresh;
    }
    return sum(binder, e->n, substituteIndex(body, from, to, avoid));
  }
  Node n = *e;
  n.alpha = substMulti(e->alpha, from, to);
  n.beta = substMulti(e->beta, from, to);
  for (auto& k : n.kids) k = substituteIndex(k, from, to, avoid);
  return std::make_shared<const Node>(std::move(n));
}

}  // namespace ein
