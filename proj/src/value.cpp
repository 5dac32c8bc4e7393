#include "ein/value.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>
#include <type_traits>

#include "ein/syntax.hpp"

namespace ein {

namespace {

constexpr size_t kMaxTerms = 4000;

const char* atomName(AtomKind k) {
  switch (k) {
    case AtomKind::Sqrt: return "sqrt";
    case AtomKind::Exp: return "exp";
    case AtomKind::Kappa: return "kappa";
    case AtomKind::Sin: return "sin";
    case AtomKind::Cos: return "cos";
    case AtomKind::Tan: return "tan";
    case AtomKind::Asin: return "asin";
    case AtomKind::Acos: return "acos";
    case AtomKind::Atan: return "atan";
    case AtomKind::Inv: return "inv";
    case AtomKind::Sum: return "sum";
    default: return "?";
  }
}

std::string joinIdx(const MultiIndex& m, const char* sep) {
  std::string s;
  for (size_t k = 0; k < m.size(); ++k) {
    if (k) s += sep;
    s += printIndex(m[k]);
  }
  return s;
}

std::string atomKey(const Atom& a) {
  switch (a.kind) {
    case AtomKind::Kron: return "K(" + joinIdx(a.idx, ",") + ")";
    case AtomKind::Eps: return "E(" + joinIdx(a.idx, ",") + ")";
    case AtomKind::Tensor: {
      std::string s = a.name + "[";
      for (size_t k = 0; k < a.idx.size(); ++k) s += (k ? ".b_" : "b_") + printIndex(a.idx[k]);
      return s + "]";
    }
    case AtomKind::Sum:
      return "sum(" + a.name + ",1," + std::to_string(a.n) + ", " + printValue(a.args[0]) + ")";
    default:
      return std::string(atomName(a.kind)) + "(" + printValue(a.args[0]) + ")";
  }
}

Atom finish(Atom a) {
  a.key = atomKey(a);
  return a;
}

std::string termKey(const Term& t) {
  std::string s;
  for (auto& a : t.atoms) {
    s += a.key;
    s += '*';
  }
  return s;
}

Value single(Term t) {
  Value v;
  if (t.coeff != 0) v.terms.push_back(std::move(t));
  return v;
}

Value scaleValue(const Value& v, const Rational& c) {
  if (c == 0) return {};
  Value out = v;
  for (auto& t : out.terms) t.coeff *= c;
  return out;
}

int permutationSign(std::vector<int> p) {
  int sign = 1;
  for (size_t a = 0; a < p.size(); ++a)
    for (size_t b = a + 1; b < p.size(); ++b) {
      if (p[a] == p[b]) return 0;
      if (p[a] > p[b]) sign = -sign;
    }
  return sign;
}

bool isPerfectSquare(const Rational& r, Rational& root) {
  if (r < 0) return false;
  mpz_class n = r.get_num(), d = r.get_den();
  if (!mpz_perfect_square_p(n.get_mpz_t()) || !mpz_perfect_square_p(d.get_mpz_t())) return false;
  mpz_class rn, rd;
  mpz_sqrt(rn.get_mpz_t(), n.get_mpz_t());
  mpz_sqrt(rd.get_mpz_t(), d.get_mpz_t());
  root = Rational(rn, rd);
  root.canonicalize();
  return true;
}

// A single atom in canonical form, possibly collapsing to a constant.
Value atomValue(Atom a) {
  switch (a.kind) {
    case AtomKind::Kron: {
      const IndexTerm &x = a.idx[0], &y = a.idx[1];
      if (x == y) return realValue(1);
      if (!x.isVar() && !y.isVar()) return realValue(0);
      if (printIndex(y) < printIndex(x)) std::swap(a.idx[0], a.idx[1]);
      return single({1, {finish(a)}});
    }
    case AtomKind::Eps: {
      for (size_t p = 0; p < a.idx.size(); ++p)
        for (size_t q = p + 1; q < a.idx.size(); ++q)
          if (a.idx[p] == a.idx[q]) return {};
      bool allConst = std::none_of(a.idx.begin(), a.idx.end(), [](const IndexTerm& t) { return t.isVar(); });
      if (allConst) {
        std::vector<int> p;
        for (auto& t : a.idx) p.push_back(t.value);
        return realValue(permutationSign(p));
      }
      // sort by key, tracking the parity
      int sign = 1;
      for (size_t p = 0; p < a.idx.size(); ++p)
        for (size_t q = 0; q + 1 < a.idx.size() - p; ++q)
          if (printIndex(a.idx[q + 1]) < printIndex(a.idx[q])) {
            std::swap(a.idx[q], a.idx[q + 1]);
            sign = -sign;
          }
      return single({sign, {finish(a)}});
    }
    case AtomKind::Sqrt: {
      if (auto r = realOf(a.args[0])) {
        Rational root;
        if (isPerfectSquare(*r, root)) return realValue(root);
      }
      return single({1, {finish(a)}});
    }
    case AtomKind::Inv: {
      if (auto r = realOf(a.args[0])) {
        if (*r == 0) throw EvalError("division by zero");
        return realValue(1 / *r);
      }
      return single({1, {finish(a)}});
    }
    case AtomKind::Sum:
      return sumValue(a.name, a.n, a.args[0]);
    default:
      return single({1, {finish(a)}});
  }
}

Value mulValueAtom(const Value& v, const Atom& a);

Value detExpansion(const MultiIndex& x, const MultiIndex& y) {
  std::vector<int> perm(x.size());
  for (size_t k = 0; k < perm.size(); ++k) perm[k] = static_cast<int>(k);
  Value out;
  do {
    Value t = realValue(permutationSign(perm));
    for (size_t r = 0; r < x.size(); ++r) t = mulValues(t, kronValue(x[r], y[perm[r]]));
    out = addValues(out, t);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

// t * a, where a is canonical on its own
Value mulTermAtom(const Term& t, const Atom& a) {
  auto same = [&](auto pred) { return std::find_if(t.atoms.begin(), t.atoms.end(), pred); };
  if (a.kind == AtomKind::Eps) {
    auto it = same([&](const Atom& b) { return b.kind == AtomKind::Eps && b.idx.size() == a.idx.size(); });
    if (it != t.atoms.end()) {
      Term rest = t;
      rest.atoms.erase(rest.atoms.begin() + (it - t.atoms.begin()));
      return mulValues(single(rest), detExpansion(it->idx, a.idx));
    }
  }
  if (a.kind == AtomKind::Sqrt) {
    auto it = same([&](const Atom& b) { return b.key == a.key; });
    if (it != t.atoms.end()) {
      Term rest = t;
      rest.atoms.erase(rest.atoms.begin() + (it - t.atoms.begin()));
      return mulValues(single(rest), a.args[0]);
    }
  }
  if (a.kind == AtomKind::Kron) {
    auto it = same([&](const Atom& b) { return b.key == a.key; });
    if (it != t.atoms.end()) return single(t);
  }
  Term out = t;
  auto pos = std::upper_bound(out.atoms.begin(), out.atoms.end(), a,
                              [](const Atom& x, const Atom& y) { return x.key < y.key; });
  out.atoms.insert(pos, a);
  return single(out);
}

Value mulValueAtom(const Value& v, const Atom& a) {
  Value out;
  for (auto& t : v.terms) out = addValues(out, mulTermAtom(t, a));
  return out;
}

bool mentions(const Value& v, const std::string& i);

bool mentions(const Atom& a, const std::string& i) {
  for (auto& t : a.idx)
    if (t.var == i) return true;
  if (a.kind == AtomKind::Sum && a.name == i) return false;
  for (auto& x : a.args)
    if (mentions(x, i)) return true;
  return false;
}

bool mentions(const Value& v, const std::string& i) {
  for (auto& t : v.terms)
    for (auto& a : t.atoms)
      if (mentions(a, i)) return true;
  return false;
}

int level(const Value& v) {
  int l = 0;
  for (auto& t : v.terms)
    for (auto& a : t.atoms) {
      if (a.kind == AtomKind::Sum) l = std::max(l, std::stoi(a.name.substr(1)));
      for (auto& x : a.args) l = std::max(l, level(x));
    }
  return l;
}

Value atomSubst(const Atom& a, const std::string& from, const IndexTerm& to) {
  Atom b = a;
  for (auto& t : b.idx)
    if (t.var == from) t = to;
  if (!(a.kind == AtomKind::Sum && a.name == from))
    for (auto& x : b.args) x = substituteValue(x, from, to);
  if (b.kind == AtomKind::Sum) return single({1, {finish(b)}});
  return atomValue(b);
}

Value rebuildTerm(const Term& t, const std::function<Value(const Atom&)>& f) {
  Value cur = realValue(t.coeff);
  for (auto& a : t.atoms) {
    Value av = f(a);
    Value next;
    for (auto& at : av.terms) {
      Value part = scaleValue(cur, at.coeff);
      for (auto& x : at.atoms) part = mulValueAtom(part, x);
      next = addValues(next, part);
    }
    cur = next;
  }
  return cur;
}

}  // namespace

Value realValue(const Rational& r) { return single({r, {}}); }

Value kronValue(const IndexTerm& i, const IndexTerm& j) { return atomValue({AtomKind::Kron, "", {i, j}, 0, {}, ""}); }

Value epsValue(const MultiIndex& alpha) { return atomValue({AtomKind::Eps, "", alpha, 0, {}, ""}); }

Value tensorValue(const std::string& name, const MultiIndex& basis) {
  return atomValue({AtomKind::Tensor, name, basis, 0, {}, ""});
}

Value addValues(const Value& a, const Value& b) {
  std::map<std::string, Term> acc;
  for (const Value* v : {&a, &b})
    for (auto& t : v->terms) {
      auto [it, fresh] = acc.try_emplace(termKey(t), t);
      if (!fresh) it->second.coeff += t.coeff;
    }
  Value out;
  for (auto& [k, t] : acc)
    if (t.coeff != 0) out.terms.push_back(t);
  if (out.terms.size() > kMaxTerms) throw EvalError("value too large");
  return out;
}

Value negValue(const Value& a) { return scaleValue(a, -1); }

Value mulValues(const Value& a, const Value& b) {
  if (a.terms.size() * b.terms.size() > 8 * kMaxTerms) throw EvalError("value too large");
  std::map<std::string, Term> acc;
  for (auto& ta : a.terms)
    for (auto& tb : b.terms) {
      Value cur = single({ta.coeff * tb.coeff, ta.atoms});
      for (auto& x : tb.atoms) cur = mulValueAtom(cur, x);
      for (auto& t : cur.terms) {
        auto [it, fresh] = acc.try_emplace(termKey(t), t);
        if (!fresh) it->second.coeff += t.coeff;
      }
    }
  Value out;
  for (auto& [k, t] : acc)
    if (t.coeff != 0) out.terms.push_back(t);
  if (out.terms.size() > kMaxTerms) throw EvalError("value too large");
  return out;
}

Value substituteValue(const Value& v, const std::string& from, const IndexTerm& to) {
  Value out;
  for (auto& t : v.terms)
    out = addValues(out, rebuildTerm(t, [&](const Atom& a) { return atomSubst(a, from, to); }));
  return out;
}

Value sumValue(const std::string& i, int n, const Value& body) {
  Value out;
  for (auto& t : body.terms) {
    bool dep = false;
    for (auto& a : t.atoms) dep = dep || mentions(a, i);
    if (!dep) {
      out = addValues(out, scaleValue(single(t), n));
      continue;
    }
    auto kr = std::find_if(t.atoms.begin(), t.atoms.end(), [&](const Atom& a) {
      return a.kind == AtomKind::Kron && (a.idx[0].var == i || a.idx[1].var == i);
    });
    if (kr != t.atoms.end()) {
      IndexTerm other = kr->idx[0].var == i ? kr->idx[1] : kr->idx[0];
      if (!other.isVar() && (other.value < 1 || other.value > n)) continue;
      Term rest = t;
      rest.atoms.erase(rest.atoms.begin() + (kr - t.atoms.begin()));
      out = addValues(out, substituteValue(single(rest), i, other));
      continue;
    }
    Term outside{t.coeff, {}}, inside{1, {}};
    for (auto& a : t.atoms) (mentions(a, i) ? inside : outside).atoms.push_back(a);
    Value in = single(inside);
    std::string binder = "%" + std::to_string(level(in) + 1);
    Atom s{AtomKind::Sum, binder, {}, n, {substituteValue(in, i, IndexTerm::v(binder))}, ""};
    out = addValues(out, mulValueAtom(single(outside), finish(s)));
  }
  return out;
}

bool isReal(const Value& v) { return realOf(v).has_value(); }

std::optional<Rational> realOf(const Value& v) {
  if (v.terms.empty()) return Rational(0);
  if (v.terms.size() == 1 && v.terms[0].atoms.empty()) return v.terms[0].coeff;
  return std::nullopt;
}

bool operator==(const Value& a, const Value& b) { return printValue(a) == printValue(b); }

std::string printValue(const Value& v) {
  if (v.terms.empty()) return "0";
  std::string s;
  for (size_t k = 0; k < v.terms.size(); ++k) {
    const Term& t = v.terms[k];
    Rational c = t.coeff;
    if (k) s += c < 0 ? " - " : " + ";
    else if (c < 0) s += "-";
    if (k || c < 0) c = abs(c);
    bool one = c == 1 && !t.atoms.empty();
    if (!one) s += c.get_str();
    for (size_t a = 0; a < t.atoms.size(); ++a) {
      if (a || !one) s += "*";
      s += t.atoms[a].key;
    }
  }
  return s;
}

Value reduceValue(const Value& v) {
  Value out;
  for (auto& t : v.terms) {
    out = addValues(out, rebuildTerm(t, [](const Atom& a) {
                      Atom b = a;
                      for (auto& x : b.args) x = reduceValue(x);
                      return atomValue(b);
                    }));
  }
  return out;
}

namespace {

Value opaque(AtomKind k, Value arg) { return atomValue({k, "", {}, 0, {std::move(arg)}, ""}); }

AtomKind atomOf(Op op) {
  switch (op) {
    case Op::Sqrt: return AtomKind::Sqrt;
    case Op::Exp: return AtomKind::Exp;
    case Op::Kappa: return AtomKind::Kappa;
    case Op::Sin: return AtomKind::Sin;
    case Op::Cos: return AtomKind::Cos;
    case Op::Tan: return AtomKind::Tan;
    case Op::Asin: return AtomKind::Asin;
    case Op::Acos: return AtomKind::Acos;
    default: return AtomKind::Atan;
  }
}

Value powValue(const Value& v, int n) {
  Value r = realValue(1);
  for (int k = 0; k < std::abs(n); ++k) r = mulValues(r, v);
  return n < 0 ? opaque(AtomKind::Inv, r) : r;
}

Value evalSym(const DataEnv* psi, const Expr& e) {
  switch (e->op) {
    case Op::Const:
      return realValue(e->value);
    case Op::Tensor:
      if (psi && !psi->count(e->name)) throw EvalError("unbound tensor '" + e->name + "'");
      return tensorValue(e->name, e->alpha);
    case Op::Field:
    case Op::Conv:
    case Op::Partial:
      throw Unsupported(std::string("no value for field term ") + opName(e->op));
    case Op::Delta:
      return kronValue(e->alpha[0], e->alpha[1]);
    case Op::Eps:
      return epsValue(e->alpha);
    case Op::Sum:
      return sumValue(e->name, e->n, evalSym(psi, e->kids[0]));
    case Op::Lift:
    case Op::Probe:
      return evalSym(psi, e->kids[0]);
    case Op::Neg:
      return negValue(evalSym(psi, e->kids[0]));
    case Op::Pow:
      return powValue(evalSym(psi, e->kids[0]), e->n);
    case Op::Add:
      return addValues(evalSym(psi, e->kids[0]), evalSym(psi, e->kids[1]));
    case Op::Sub:
      return addValues(evalSym(psi, e->kids[0]), negValue(evalSym(psi, e->kids[1])));
    case Op::Mul: {
      if (isDeltaApplication(e)) {
        const Expr& d = e->kids[0]->op == Op::Delta ? e->kids[0] : e->kids[0]->kids[0];
        return substituteValue(evalSym(psi, e->kids[1]), d->alpha[1].var, d->alpha[0]);
      }
      return mulValues(evalSym(psi, e->kids[0]), evalSym(psi, e->kids[1]));
    }
    case Op::Div: {
      Value den = evalSym(psi, e->kids[1]);
      if (auto r = realOf(den)) {
        if (*r == 0) throw EvalError("division by zero");
        return mulValues(evalSym(psi, e->kids[0]), realValue(1 / *r));
      }
      return mulValues(evalSym(psi, e->kids[0]), opaque(AtomKind::Inv, den));
    }
    default:
      return opaque(atomOf(e->op), evalSym(psi, e->kids[0]));
  }
}

int resolve(const IndexTerm& t, const Assignment& rho) {
  if (!t.isVar()) return t.value;
  auto it = rho.find(t.var);
  if (it == rho.end()) throw EvalError("unbound index '" + t.var + "'");
  return it->second;
}

const Rational& component(const DataEnv& psi, const std::string& name, const MultiIndex& alpha,
                          const Assignment& rho) {
  auto it = psi.find(name);
  if (it == psi.end()) throw EvalError("no data for tensor '" + name + "'");
  const TensorData& d = it->second;
  if (d.shape.size() != alpha.size()) throw EvalError("rank mismatch for tensor '" + name + "'");
  size_t off = 0;
  for (size_t k = 0; k < alpha.size(); ++k) {
    int v = resolve(alpha[k], rho);
    if (v < 1 || v > d.shape[k]) throw EvalError("index out of bounds for tensor '" + name + "'");
    off = off * d.shape[k] + (v - 1);
  }
  return d.data.at(off);
}

int epsAt(const MultiIndex& alpha, const Assignment& rho) {
  std::vector<int> p;
  for (auto& t : alpha) p.push_back(resolve(t, rho));
  return permutationSign(p);
}

double flattenAtom(const Atom& a, const DataEnv& psi, Assignment& rho);

double flattenRef(const Value& v, const DataEnv& psi, Assignment& rho) {
  double s = 0;
  for (auto& t : v.terms) {
    double p = t.coeff.get_d();
    for (auto& a : t.atoms) p *= flattenAtom(a, psi, rho);
    s += p;
  }
  return s;
}

double flattenAtom(const Atom& a, const DataEnv& psi, Assignment& rho) {
  switch (a.kind) {
    case AtomKind::Kron:
      return resolve(a.idx[0], rho) == resolve(a.idx[1], rho) ? 1 : 0;
    case AtomKind::Eps:
      return epsAt(a.idx, rho);
    case AtomKind::Tensor:
      return component(psi, a.name, a.idx, rho).get_d();
    case AtomKind::Sum: {
      auto saved = rho.find(a.name) != rho.end() ? std::optional<int>(rho[a.name]) : std::nullopt;
      double s = 0;
      for (int k = 1; k <= a.n; ++k) {
        rho[a.name] = k;
        s += flattenRef(a.args[0], psi, rho);
      }
      if (saved) rho[a.name] = *saved;
      else rho.erase(a.name);
      return s;
    }
    default:
      break;
  }
  double x = flattenRef(a.args[0], psi, rho);
  switch (a.kind) {
    case AtomKind::Sqrt: return std::sqrt(x);
    case AtomKind::Exp: return std::exp(x);
    case AtomKind::Kappa: return x;
    case AtomKind::Sin: return std::sin(x);
    case AtomKind::Cos: return std::cos(x);
    case AtomKind::Tan: return std::tan(x);
    case AtomKind::Asin: return std::asin(x);
    case AtomKind::Acos: return std::acos(x);
    case AtomKind::Atan: return std::atan(x);
    default:
      if (x == 0) throw EvalError("division by zero");
      return 1 / x;
  }
}

std::optional<Rational> flattenExactRef(const Value& v, const DataEnv& psi, Assignment& rho);

std::optional<Rational> flattenExactAtom(const Atom& a, const DataEnv& psi, Assignment& rho) {
  switch (a.kind) {
    case AtomKind::Kron:
      return Rational(resolve(a.idx[0], rho) == resolve(a.idx[1], rho) ? 1 : 0);
    case AtomKind::Eps:
      return Rational(epsAt(a.idx, rho));
    case AtomKind::Tensor:
      return component(psi, a.name, a.idx, rho);
    case AtomKind::Sum: {
      auto saved = rho.find(a.name) != rho.end() ? std::optional<int>(rho[a.name]) : std::nullopt;
      std::optional<Rational> s = Rational(0);
      for (int k = 1; k <= a.n && s; ++k) {
        rho[a.name] = k;
        auto x = flattenExactRef(a.args[0], psi, rho);
        if (x) *s += *x;
        else s.reset();
      }
      if (saved) rho[a.name] = *saved;
      else rho.erase(a.name);
      return s;
    }
    case AtomKind::Kappa:
      return flattenExactRef(a.args[0], psi, rho);
    case AtomKind::Inv: {
      auto x = flattenExactRef(a.args[0], psi, rho);
      if (!x) return std::nullopt;
      if (*x == 0) throw EvalError("division by zero");
      return Rational(1) / *x;
    }
    default:
      return std::nullopt;
  }
}

std::optional<Rational> flattenExactRef(const Value& v, const DataEnv& psi, Assignment& rho) {
  Rational s = 0;
  for (auto& t : v.terms) {
    Rational p = t.coeff;
    for (auto& a : t.atoms) {
      auto x = flattenExactAtom(a, psi, rho);
      if (!x) return std::nullopt;
      p *= *x;
    }
    s += p;
  }
  return s;
}

// exact wherever no transcendental atom intervenes
long double flattenMixed(const Value& v, const DataEnv& psi, Assignment& rho);

long double flattenMixedAtom(const Atom& a, const DataEnv& psi, Assignment& rho) {
  switch (a.kind) {
    case AtomKind::Sqrt: case AtomKind::Exp: case AtomKind::Sin: case AtomKind::Cos:
    case AtomKind::Tan: case AtomKind::Asin: case AtomKind::Acos: case AtomKind::Atan:
      break;
    case AtomKind::Sum: {
      auto saved = rho.find(a.name) != rho.end() ? std::optional<int>(rho[a.name]) : std::nullopt;
      long double s = 0;
      for (int k = 1; k <= a.n; ++k) {
        rho[a.name] = k;
        s += flattenMixed(a.args[0], psi, rho);
      }
      if (saved) rho[a.name] = *saved;
      else rho.erase(a.name);
      return s;
    }
    case AtomKind::Kappa:
      return flattenMixed(a.args[0], psi, rho);
    case AtomKind::Inv: {
      long double x = flattenMixed(a.args[0], psi, rho);
      if (x == 0) throw EvalError("division by zero");
      return 1 / x;
    }
    default:
      return flattenExactAtom(a, psi, rho)->get_d();
  }
  long double x = flattenMixed(a.args[0], psi, rho);
  switch (a.kind) {
    case AtomKind::Sqrt: return std::sqrt(x);
    case AtomKind::Exp: return std::exp(x);
    case AtomKind::Sin: return std::sin(x);
    case AtomKind::Cos: return std::cos(x);
    case AtomKind::Tan: return std::tan(x);
    case AtomKind::Asin: return std::asin(x);
    case AtomKind::Acos: return std::acos(x);
    default: return std::atan(x);
  }
}

long double flattenMixed(const Value& v, const DataEnv& psi, Assignment& rho) {
  if (auto q = flattenExactRef(v, psi, rho)) return q->get_d();
  // exact coefficient per product of inexact atoms
  std::map<std::string, std::pair<Rational, std::vector<const Atom*>>> groups;
  for (auto& t : v.terms) {
    Rational c = t.coeff;
    std::vector<const Atom*> rest;
    std::string key;
    for (auto& a : t.atoms) {
      if (auto x = flattenExactAtom(a, psi, rho)) {
        c *= *x;
      } else {
        rest.push_back(&a);
        key += a.key + ";";
      }
    }
    auto [it, fresh] = groups.try_emplace(key, c, rest);
    if (!fresh) it->second.first += c;
  }
  long double s = 0;
  for (auto& [k, g] : groups) {
    if (g.first == 0) continue;
    long double p = g.first.get_d();
    for (const Atom* a : g.second) p *= flattenMixedAtom(*a, psi, rho);
    s += p;
  }
  return s;
}

template <class N>
struct Numeric {
  const DataEnv& psi;
  EvalOptions opt;

  N eval(const Expr& e, Assignment& rho) {
    switch (e->op) {
      case Op::Const:
        return from(e->value);
      case Op::Tensor:
        return from(component(psi, e->name, e->alpha, rho));
      case Op::Field:
      case Op::Conv:
      case Op::Partial:
        throw Unsupported(std::string("no value for field term ") + opName(e->op));
      case Op::Delta:
        return N(resolve(e->alpha[0], rho) == resolve(e->alpha[1], rho) ? 1 : 0);
      case Op::Eps:
        return N(epsAt(e->alpha, rho));
      case Op::Sum: {
        auto saved = rho.count(e->name) ? std::optional<int>(rho[e->name]) : std::nullopt;
        N s(0);
        for (int k = 1; k <= e->n; ++k) {
          rho[e->name] = k;
          s += eval(e->kids[0], rho);
        }
        if (saved) rho[e->name] = *saved;
        else rho.erase(e->name);
        return s;
      }
      case Op::Lift:
      case Op::Probe:
        return eval(e->kids[0], rho);
      case Op::Neg:
        return -eval(e->kids[0], rho);
      case Op::Kappa:
        if (!opt.kappaIdentity) throw Unsupported("kappa has no numeric meaning");
        return eval(e->kids[0], rho);
      case Op::Pow: {
        N x = eval(e->kids[0], rho), r(1);
        for (int k = 0; k < std::abs(e->n); ++k) r *= x;
        if (e->n < 0) {
          if (r == 0) throw EvalError("division by zero");
          r = N(1) / r;
        }
        return r;
      }
      case Op::Add:
        return eval(e->kids[0], rho) + eval(e->kids[1], rho);
      case Op::Sub:
        return eval(e->kids[0], rho) - eval(e->kids[1], rho);
      case Op::Mul: {
        if (isDeltaApplication(e)) {
          const Expr& d = e->kids[0]->op == Op::Delta ? e->kids[0] : e->kids[0]->kids[0];
          const std::string& j = d->alpha[1].var;
          int iv = resolve(d->alpha[0], rho);
          auto saved = rho.count(j) ? std::optional<int>(rho[j]) : std::nullopt;
          rho[j] = iv;
          N r = eval(e->kids[1], rho);
          if (saved) rho[j] = *saved;
          else rho.erase(j);
          return r;
        }
        return eval(e->kids[0], rho) * eval(e->kids[1], rho);
      }
      case Op::Div: {
        N a = eval(e->kids[0], rho), b = eval(e->kids[1], rho);
        if (b == 0) throw EvalError("division by zero");
        return a / b;
      }
      default:
        return transcendental(e->op, eval(e->kids[0], rho));
    }
  }

  static N from(const Rational& q) {
    if constexpr (std::is_floating_point_v<N>) return static_cast<N>(q.get_d());
    else return q;
  }

  static N transcendental(Op op, N x) {
    if constexpr (std::is_floating_point_v<N>) {
      switch (op) {
        case Op::Sqrt: return std::sqrt(x);
        case Op::Exp: return std::exp(x);
        case Op::Sin: return std::sin(x);
        case Op::Cos: return std::cos(x);
        case Op::Tan: return std::tan(x);
        case Op::Asin: return std::asin(x);
        case Op::Acos: return std::acos(x);
        default: return std::atan(x);
      }
    } else {
      throw EvalError(std::string("no exact value for ") + opName(op));
    }
  }
};

}  // namespace

Value evalSymbolic(const DataEnv* psi, const Expr& e) { return evalSym(psi, e); }

double flatten(const Value& v, const DataEnv& psi, const Assignment& rho) {
  Assignment r = rho;
  return flattenRef(v, psi, r);
}

double evalNumeric(const DataEnv& psi, const Assignment& rho, const Expr& e, EvalOptions opt) {
  Assignment r = rho;
  return Numeric<double>{psi, opt}.eval(e, r);
}

long double evalNumericWide(const DataEnv& psi, const Assignment& rho, const Expr& e, EvalOptions opt) {
  Assignment r = rho;
  return Numeric<long double>{psi, opt}.eval(e, r);
}

std::optional<Rational> flattenExact(const Value& v, const DataEnv& psi, const Assignment& rho) {
  Assignment r = rho;
  return flattenExactRef(v, psi, r);
}

long double flattenWide(const Value& v, const DataEnv& psi, const Assignment& rho) {
  Assignment r = rho;
  return flattenMixed(v, psi, r);
}

std::optional<Rational> evalExact(const DataEnv& psi, const Assignment& rho, const Expr& e, EvalOptions opt) {
  if (!isAlgebraic(e)) return std::nullopt;
  Assignment r = rho;
  return Numeric<Rational>{psi, opt}.eval(e, r);
}

bool isAlgebraic(const Expr& e) {
  if (e->op == Op::Sqrt || e->op == Op::Exp || isTrig(e->op)) return false;
  for (auto& k : e->kids)
    if (!isAlgebraic(k)) return false;
  return true;
}

bool hasFieldTerms(const Expr& e) {
  if (e->op == Op::Field || e->op == Op::Conv || e->op == Op::Partial) return true;
  for (auto& k : e->kids)
    if (hasFieldTerms(k)) return true;
  return false;
}

std::vector<Assignment> assignments(const IndexCtx& sigma) {
  std::vector<Assignment> out{{}};
  for (auto& [name, n] : sigma.entries()) {
    std::vector<Assignment> next;
    for (auto& a : out)
      for (int v = 1; v <= n; ++v) {
        Assignment b = a;
        b[name] = v;
        next.push_back(std::move(b));
      }
    out = std::move(next);
  }
  return out;
}

std::vector<double> evalArray(const DataEnv& psi, const IndexCtx& sigma, const Expr& e) {
  std::vector<double> out;
  for (auto& rho : assignments(sigma)) out.push_back(evalNumeric(psi, rho, e));
  return out;
}

bool closeEnough(double a, double b) {
  return std::fabs(a - b) <= 1e-9 * std::max({1.0, std::fabs(a), std::fabs(b)});
}

namespace {

using Sums = std::vector<std::pair<std::string, int>>;

template <class N>
N summed(const DataEnv& psi, Assignment rho, const Expr& e, const Sums& sums, size_t k = 0) {
  if (k == sums.size()) {
    if constexpr (std::is_same_v<N, double>) return evalNumeric(psi, rho, e);
    else return *evalExact(psi, rho, e);
  }
  N s(0);
  for (int v = 1; v <= sums[k].second; ++v) {
    rho[sums[k].first] = v;
    s += summed<N>(psi, rho, e, sums, k + 1);
  }
  return s;
}

std::string showRho(const Assignment& rho) {
  std::string s;
  for (auto& [k, v] : rho) s += (s.empty() ? "" : ",") + k + "=" + std::to_string(v);
  return "{" + s + "}";
}

enum Outcome { kPass, kUndefined, kFail };

struct PointResult {
  Outcome outcome = kPass;
  std::string detail;
};

PointResult comparePoint(const DataEnv& psi, const Assignment& rho, const Expr& lhs, const Sums& ls, const Expr& rhs,
                         const Sums& rs, bool exact) {
  if (exact) {
    Rational a, b;
    try {
      a = summed<Rational>(psi, rho, lhs, ls);
    } catch (const EvalError&) {
      return {kUndefined, ""};
    }
    try {
      b = summed<Rational>(psi, rho, rhs, rs);
    } catch (const EvalError& err) {
      return {kFail, "at " + showRho(rho) + ": rhs undefined (" + err.what() + ")"};
    }
    if (a != b) return {kFail, "at " + showRho(rho) + ": " + a.get_str() + " != " + b.get_str()};
    return {};
  }
  double a, b;
  try {
    a = summed<double>(psi, rho, lhs, ls);
  } catch (const EvalError&) {
    return {kUndefined, ""};
  }
  if (!std::isfinite(a)) return {kUndefined, ""};
  try {
    b = summed<double>(psi, rho, rhs, rs);
  } catch (const EvalError& err) {
    return {kFail, "at " + showRho(rho) + ": rhs undefined (" + err.what() + ")"};
  }
  if (!closeEnough(a, b)) {
    std::ostringstream os;
    os.precision(17);
    os << "at " << showRho(rho) << ": " << a << " != " << b;
    return {kFail, os.str()};
  }
  return {};
}

}  // namespace

ValueCheck compareValues(const IndexCtx& sigma, const Expr& lhs, const Sums& lhsSums, const Expr& rhs,
                         const Sums& rhsSums, const DataEnv& psi, bool parallel) {
  ValueCheck r;
  if (hasFieldTerms(lhs) || hasFieldTerms(rhs)) {
    r.skipped = true;
    r.detail = "field terms have no value";
    return r;
  }
  r.exact = isAlgebraic(lhs) && isAlgebraic(rhs);
  auto rhos = assignments(sigma);
  std::vector<PointResult> res(rhos.size());
  long n = static_cast<long>(rhos.size());
  if (parallel) {
#pragma omp parallel for schedule(dynamic)
    for (long k = 0; k < n; ++k) {
      try {
        res[k] = comparePoint(psi, rhos[k], lhs, lhsSums, rhs, rhsSums, r.exact);
      } catch (const std::exception& err) {
        res[k] = {kFail, err.what()};
      }
    }
  } else {
    for (long k = 0; k < n; ++k) {
      try {
        res[k] = comparePoint(psi, rhos[k], lhs, lhsSums, rhs, rhsSums, r.exact);
      } catch (const std::exception& err) {
        res[k] = {kFail, err.what()};
      }
    }
  }
  r.assignments = n;
  for (auto& p : res) {
    if (p.outcome == kUndefined) ++r.undefined;
    if (p.outcome == kFail && r.ok) {
      r.ok = false;
      r.detail = p.detail;
    }
  }
  return r;
}

ValueCheck checkValuePreservation(const TypeEnv&, const IndexCtx& sigma, const RewriteStep& step, const DataEnv& psi,
                                  bool parallel) {
  if (step.contracted) {
    const std::string& s = *step.contracted;
    int n = step.localSigma.bound(s).value_or(3);
    return compareValues(step.localSigma.without(s), step.redexBefore, {{s, n}}, step.redexAfter, {}, psi, parallel);
  }
  if (!hasFieldTerms(step.before) && !hasFieldTerms(step.after))
    return compareValues(sigma, step.before, {}, step.after, {}, psi, parallel);
  return compareValues(step.localSigma, step.redexBefore, {}, step.redexAfter, {}, psi, parallel);
}

}  // namespace ein
