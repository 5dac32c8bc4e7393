#include "ein/rewrite.hpp"

#include <algorithm>

#include "ein/analysis.hpp"
#include "ein/syntax.hpp"
#include "ein/typecheck.hpp"

namespace ein {

namespace {

const std::vector<RuleInfo> kCatalog = {
    {Rule::A1, {'A', 1, "R35"}, "eps(i,j,k) * eps(i,l,m)", "delta(j,l)*delta(k,m) - delta(j,m)*delta(k,l)",
     "3-d eps factors of one product sharing exactly one index, which no other factor mentions"},
    {Rule::A3, {'A', 3, "R34"}, "eps(i,j,k) * conv(V,[a],H,[..j..k..])", "lift(d, 0)",
     "two eps indices among the kernel derivative indices"},
    {Rule::A4, {'A', 4, "R33"}, "eps(i,j,k) * d([..j..k..], e)", "lift(d, 0)", "two eps indices among the derivative indices"},
    {Rule::A5, {'A', 5, "R36"}, "delta(i,j) * T[..j..]", "T[..i..]", "j free on the right"},
    {Rule::A6, {'A', 6, "R37"}, "delta(i,j) * F[..j..]", "F[..i..]", "j free on the right"},
    {Rule::A7, {'A', 7, "R40"}, "delta(i,j) * d(nu, e)", "d(nu, e)[j:=i]", "j free on the right"},
    {Rule::A8, {'A', 8, "R38"}, "delta(i,j) * conv(V,[..],H,[..j..])", "conv(..)[j:=i]", "j free on the right"},
    {Rule::A9, {'A', 9, "R39"}, "delta(i,j) * (conv(..j..) @ x)", "conv(..)[j:=i] @ x", "j free on the right"},
    {Rule::B1, {'B', 1, "R1"}, "(e1 * e2) @ x | (e1 / e2) @ x", "(e1 @ x) * (e2 @ x) | (e1 @ x) / (e2 @ x)", ""},
    {Rule::B2, {'B', 2, "R2"}, "(e1 + e2) @ x | (e1 - e2) @ x", "(e1 @ x) + (e2 @ x) | (e1 @ x) - (e2 @ x)", ""},
    {Rule::B3, {'B', 3, "R3"}, "op(e) @ x", "op(e @ x)", "any unary operator"},
    {Rule::B4, {'B', 4, "R4"}, "sum(i,1,n, e) @ x", "sum(i,1,n, e @ x)", ""},
    {Rule::B5, {'B', 5, "R5"}, "delta(i,j) @ x | eps(..) @ x | lift(d, e) @ x", "delta(i,j) | eps(..) | e", ""},
    {Rule::C2, {'C', 2, "R20"}, "d(nu, c | delta | eps | lift(d, e))", "lift(d, 0)", ""},
    {Rule::C3, {'C', 3, "R19"}, "d(nu, sum(v,1,n, e))", "sum(v,1,n, d(nu, e))", "binder renamed if it clashes"},
    {Rule::C5, {'C', 5, "R21"}, "d(nu, conv(V,[a],H,[b]))", "conv(V,[a],H,[b,nu])", ""},
    {Rule::C6, {'C', 6, "R8"}, "d(i, sqrt(e))", "(lift(d, 0.5) * d(i, e)) / sqrt(e)", "single index"},
    {Rule::C7, {'C', 7, "R9"}, "d(i, cos(e))", "-sin(e) * d(i, e)", "single index"},
    {Rule::C8, {'C', 8, "R10"}, "d(i, sin(e))", "cos(e) * d(i, e)", "single index"},
    {Rule::C9, {'C', 9, "R12"}, "d(i, acos(e))", "-(lift(d, 1) * d(i, e)) / sqrt(lift(d, 1) - e * e)", "single index"},
    {Rule::C10, {'C', 10, "R13"}, "d(i, asin(e))", "lift(d, 1) / sqrt(lift(d, 1) - e * e) * d(i, e)", "single index"},
    {Rule::C11, {'C', 11, "R7"}, "d(i, e1 / e2)", "(d(i, e1) * e2 - e1 * d(i, e2)) / (e2 * e2)", "single index"},
    {Rule::C14, {'C', 14, "R6"}, "d(i, e1 * e2)", "e1 * d(i, e2) + e2 * d(i, e1)",
     "single index; a delta or eps head e1 is constant and gives e1 * d(nu, e2)"},
    {Rule::C15, {'C', 15, "R18"}, "d(nu, -e)", "-d(nu, e)", ""},
    {Rule::C16, {'C', 16, "R17"}, "d(nu, e1 + e2) | d(nu, e1 - e2)", "d(nu, e1) + d(nu, e2) | d(nu, e1) - d(nu, e2)", ""},
    {Rule::C18, {'C', 18, "R11"}, "d(i, tan(e))", "d(i, e) / (cos(e) * cos(e))", "single index"},
    {Rule::C19, {'C', 19, "R14"}, "d(i, atan(e))", "lift(d, 1) / (lift(d, 1) + e * e) * d(i, e)", "single index"},
    {Rule::C20, {'C', 20, "R15"}, "d(i, exp(e))", "exp(e) * d(i, e)", "single index"},
    {Rule::C21, {'C', 21, "R16"}, "d(i, pow(e, n))", "lift(d, n) * pow(e, n-1) * d(i, e)", "single index"},
    {Rule::C22, {'C', 22, "R42"}, "d(a, d(b, e))", "d([b,a], e)", ""},
    {Rule::D1, {'D', 1, nullptr}, "-0", "0", "0 is 0 or lift(d, 0)"},
    {Rule::D2, {'D', 2, "R30"}, "e + 0 | 0 + e", "e", ""},
    {Rule::D3, {'D', 3, "R25"}, "e - 0", "e", ""},
    {Rule::D4, {'D', 4, "R24"}, "0 - e", "-e", ""},
    {Rule::D5, {'D', 5, "R26"}, "0 / e", "0", ""},
    {Rule::D6, {'D', 6, "R31"}, "0 * e | e * 0", "0", ""},
    {Rule::D8, {'D', 8, nullptr}, "--e", "e", ""},
    {Rule::E4, {'E', 4, "R27"}, "(e1 / e2) / (e3 / e4)", "(e1 * e4) / (e2 * e3)", "tried before E1 and E2"},
    {Rule::E1, {'E', 1, "R29"}, "(e1 / e2) / e3", "e1 / (e2 * e3)", ""},
    {Rule::E2, {'E', 2, "R28"}, "e1 / (e2 / e3)", "(e1 * e3) / e2", ""},
    {Rule::E5, {'E', 5, "R41"}, "sum(i,1,n, s * e) | sum(i,1,n, s)", "s * sum(i,1,n, e) | n * s",
     "s scalar; a bare scalar field body needs size >= 2 and gives lift(d, n) * s"},
    {Rule::E6, {'E', 6, "R32"}, "sqrt(e) * sqrt(e)", "e", ""},
};

struct Match {
  Expr out;
  std::optional<std::string> contracted;
};

struct Site {
  const TypeEnv& gamma;
  const IndexCtx& sigma;
  const std::set<std::string>& avoid;
  bool rightmost;
};

Expr zeroField(int d) { return lift(d, cst(0)); }

std::set<std::string> varSet(const MultiIndex& m) {
  std::set<std::string> s;
  for (auto& t : m)
    if (t.isVar()) s.insert(t.var);
  return s;
}

bool distinctVarEps3(const Expr& e) {
  if (e->op != Op::Eps || e->alpha.size() != 3) return false;
  for (auto& t : e->alpha)
    if (!t.isVar()) return false;
  return varSet(e->alpha).size() == 3;
}

int sharedCount(const MultiIndex& a, const MultiIndex& b) {
  auto sa = varSet(a), sb = varSet(b);
  int n = 0;
  for (auto& v : sa) n += static_cast<int>(sb.count(v));
  return n;
}

struct Factor {
  Expr e;
  Path path;
};

void flattenChain(const Expr& e, Path& p, std::vector<Factor>& out) {
  if (e->op == Op::Mul && !isDeltaApplication(e)) {
    for (int k = 0; k < 2; ++k) {
      p.push_back(k);
      flattenChain(e->kids[k], p, out);
      p.pop_back();
    }
  } else {
    out.push_back({e, p});
  }
}

MultiIndex rotateTo(const MultiIndex& a, const std::string& s) {
  size_t at = 0;
  while (a[at].var != s) ++at;
  return {a[at], a[(at + 1) % 3], a[(at + 2) % 3]};
}

std::optional<Match> ruleA1(const Expr& e, const Site& site) {
  if (e->op != Op::Mul || isDeltaApplication(e)) return std::nullopt;
  std::vector<Factor> fs;
  Path p;
  flattenChain(e, p, fs);
  if (fs.size() > 2) {
    // reassociating factors is only safe when everything is a tensor
    try {
      if (inferType(site.gamma, site.sigma, e).field) return std::nullopt;
    } catch (const TypeError&) {
      return std::nullopt;
    }
  }
  std::vector<std::pair<size_t, size_t>> pairs;
  for (size_t a = 0; a < fs.size(); ++a)
    for (size_t b = a + 1; b < fs.size(); ++b) pairs.emplace_back(a, b);
  if (site.rightmost) std::reverse(pairs.begin(), pairs.end());
  for (auto [a, b] : pairs) {
    const Expr& ea = fs[a].e;
    const Expr& eb = fs[b].e;
    if (!distinctVarEps3(ea) || !distinctVarEps3(eb) || sharedCount(ea->alpha, eb->alpha) != 1) continue;
    std::string s;
    for (auto& t : ea->alpha)
      if (varSet(eb->alpha).count(t.var)) s = t.var;
    bool usedElsewhere = false;
    for (size_t k = 0; k < fs.size(); ++k)
      if (k != a && k != b && occursFree(s, fs[k].e)) usedElsewhere = true;
    if (usedElsewhere) continue;
    MultiIndex ra = rotateTo(ea->alpha, s), rb = rotateTo(eb->alpha, s);
    Expr dd = sub(mul(delta(ra[1], rb[1]), delta(ra[2], rb[2])), mul(delta(ra[1], rb[2]), delta(ra[2], rb[1])));
    Expr out = replaceAt(e, fs[a].path, dd);
    Path parent(fs[b].path.begin(), fs[b].path.end() - 1);
    Path sib = parent;
    sib.push_back(1 - fs[b].path.back());
    out = replaceAt(out, parent, subtermAt(out, sib));
    return Match{out, s};
  }
  return std::nullopt;
}

int epsIndicesAmong(const Expr& epsNode, const MultiIndex& m) {
  auto in = varSet(m);
  int n = 0;
  for (auto& v : varSet(epsNode->alpha)) n += static_cast<int>(in.count(v));
  return n;
}

std::optional<int> boundOf(const Site& site, const IndexTerm& t) {
  if (!t.isVar()) return std::nullopt;
  return site.sigma.bound(t.var);
}

std::optional<Match> ruleA(Rule r, const Expr& e, const Site& site) {
  if (e->op != Op::Mul) return std::nullopt;
  const Expr& a = e->kids[0];
  const Expr& b = e->kids[1];
  if (r == Rule::A3 || r == Rule::A4) {
    if (a->op != Op::Eps || a->alpha.size() != 3) return std::nullopt;
    if (r == Rule::A3 && b->op == Op::Conv && epsIndicesAmong(a, b->beta) >= 2) {
      auto it = site.gamma.find(b->name);
      if (it == site.gamma.end()) return std::nullopt;
      return Match{zeroField(it->second.dim), {}};
    }
    if (r == Rule::A4 && b->op == Op::Partial && epsIndicesAmong(a, b->alpha) >= 2) {
      auto d = boundOf(site, b->alpha[0]);
      if (!d) return std::nullopt;
      return Match{zeroField(*d), {}};
    }
    return std::nullopt;
  }
  if (a->op != Op::Delta || !isDeltaApplication(e)) return std::nullopt;
  Op want;
  switch (r) {
    case Rule::A5:
      want = Op::Tensor;
      break;
    case Rule::A6:
      want = Op::Field;
      break;
    case Rule::A7:
      want = Op::Partial;
      break;
    case Rule::A8:
      want = Op::Conv;
      break;
    case Rule::A9:
      if (b->op != Op::Probe || b->kids[0]->op != Op::Conv) return std::nullopt;
      want = Op::Probe;
      break;
    default:
      return std::nullopt;
  }
  if (b->op != want) return std::nullopt;
  return Match{substituteIndex(b, a->alpha[1].var, a->alpha[0], site.avoid), {}};
}

std::optional<Match> ruleB(Rule r, const Expr& e) {
  if (e->op != Op::Probe) return std::nullopt;
  const Expr& f = e->kids[0];
  const Expr& x = e->kids[1];
  switch (r) {
    case Rule::B1:
      if (f->op == Op::Mul || f->op == Op::Div) return Match{binary(f->op, probe(f->kids[0], x), probe(f->kids[1], x)), {}};
      break;
    case Rule::B2:
      if (f->op == Op::Add || f->op == Op::Sub) return Match{binary(f->op, probe(f->kids[0], x), probe(f->kids[1], x)), {}};
      break;
    case Rule::B3:
      if (isUnary(f->op)) return Match{withKids(f, {probe(f->kids[0], x)}), {}};
      break;
    case Rule::B4:
      if (f->op == Op::Sum) return Match{sum(f->name, f->n, probe(f->kids[0], x)), {}};
      break;
    case Rule::B5:
      if (f->op == Op::Delta || f->op == Op::Eps) return Match{f, {}};
      if (f->op == Op::Lift) return Match{f->kids[0], {}};
      break;
    default:
      break;
  }
  return std::nullopt;
}

// rename sum binders and contracted delta indices that reuse a derivative index
Expr freshenBinders(const Expr& e, const std::set<std::string>& clash, std::set<std::string>& taken) {
  if (e->op == Op::Sum && clash.count(e->name)) {
    std::string fresh = freshName(e->name, taken);
    taken.insert(fresh);
    Expr body = substituteIndex(e->kids[0], e->name, IndexTerm::v(fresh), taken);
    return sum(fresh, e->n, freshenBinders(body, clash, taken));
  }
  if (isDeltaApplication(e)) {
    const Expr& p = e->kids[0];
    const Expr& dl = p->op == Op::Delta ? p : p->kids[0];
    const std::string& j = dl->alpha[1].var;
    if (clash.count(j)) {
      std::string fresh = freshName(j, taken);
      taken.insert(fresh);
      Expr nd = delta(dl->alpha[0], IndexTerm::v(fresh));
      Expr head = p->op == Op::Delta ? nd : probe(nd, p->kids[1]);
      Expr q = substituteIndex(e->kids[1], j, IndexTerm::v(fresh), taken);
      return mul(head, freshenBinders(q, clash, taken));
    }
  }
  std::vector<Expr> kids;
  bool changed = false;
  for (auto& k : e->kids) {
    kids.push_back(freshenBinders(k, clash, taken));
    changed |= kids.back() != k;
  }
  return changed ? withKids(e, kids) : e;
}

std::optional<Match> ruleC(Rule r, const Expr& e, const Site& site) {
  if (e->op != Op::Partial) return std::nullopt;
  const MultiIndex& nu = e->alpha;
  Expr b = e->kids[0];
  {
    auto clash = varSet(nu);
    std::set<std::string> all = allIndexVars(b);
    bool hit = false;
    for (auto& v : clash) hit |= all.count(v) > 0;
    if (hit) {
      std::set<std::string> taken = site.avoid;
      taken.insert(all.begin(), all.end());
      taken.insert(clash.begin(), clash.end());
      for (auto& [k, n] : site.sigma.entries()) taken.insert(k);
      b = freshenBinders(b, clash, taken);
    }
  }
  auto d = boundOf(site, nu[0]);
  if (!d) return std::nullopt;
  auto dx = [&](const Expr& x) { return partial(nu, x); };
  auto one = [&] { return lift(*d, cst(1)); };
  bool single = nu.size() == 1;
  switch (r) {
    case Rule::C2:
      if (b->op == Op::Const || b->op == Op::Delta || b->op == Op::Eps || b->op == Op::Lift) return Match{zeroField(*d), {}};
      break;
    case Rule::C3:
      if (b->op == Op::Sum) {
        std::string v = b->name;
        Expr body = b->kids[0];
        auto nuVars = varSet(nu);
        if (nuVars.count(v) || site.sigma.contains(v)) {
          std::set<std::string> taken = site.avoid;
          taken.insert(nuVars.begin(), nuVars.end());
          for (auto& [k, n] : site.sigma.entries()) taken.insert(k);
          std::string fresh = freshName(v, taken);
          body = substituteIndex(body, v, IndexTerm::v(fresh), taken);
          v = fresh;
        }
        return Match{sum(v, b->n, dx(body)), {}};
      }
      break;
    case Rule::C5:
      if (b->op == Op::Conv) {
        MultiIndex beta = b->beta;
        beta.insert(beta.end(), nu.begin(), nu.end());
        return Match{conv(b->name, b->alpha, b->kernel, beta), {}};
      }
      break;
    case Rule::C6:
      if (single && b->op == Op::Sqrt) {
        const Expr& x = b->kids[0];
        return Match{div(mul(lift(*d, cst(Rational(1, 2))), dx(x)), b), {}};
      }
      break;
    case Rule::C7:
      if (single && b->op == Op::Cos) return Match{mul(neg(unary(Op::Sin, b->kids[0])), dx(b->kids[0])), {}};
      break;
    case Rule::C8:
      if (single && b->op == Op::Sin) return Match{mul(unary(Op::Cos, b->kids[0]), dx(b->kids[0])), {}};
      break;
    case Rule::C9:
      if (single && b->op == Op::Acos) {
        const Expr& x = b->kids[0];
        return Match{div(neg(mul(one(), dx(x))), unary(Op::Sqrt, sub(one(), mul(x, x)))), {}};
      }
      break;
    case Rule::C10:
      if (single && b->op == Op::Asin) {
        const Expr& x = b->kids[0];
        return Match{mul(div(one(), unary(Op::Sqrt, sub(one(), mul(x, x)))), dx(x)), {}};
      }
      break;
    case Rule::C11:
      if (single && b->op == Op::Div) {
        const Expr& p = b->kids[0];
        const Expr& q = b->kids[1];
        return Match{div(sub(mul(dx(p), q), mul(p, dx(q))), mul(q, q)), {}};
      }
      break;
    case Rule::C14:
      if (b->op == Op::Mul) {
        const Expr& p = b->kids[0];
        const Expr& q = b->kids[1];
        if (isDeltaApplication(b)) {
          // the contracted index must not be captured by nu
          const Expr& dl = p->op == Op::Delta ? p : p->kids[0];
          const std::string& j = dl->alpha[1].var;
          auto nuVars = varSet(nu);
          if (nuVars.count(j)) {
            std::set<std::string> taken = site.avoid;
            taken.insert(nuVars.begin(), nuVars.end());
            for (auto& [k, n] : site.sigma.entries()) taken.insert(k);
            std::string fresh = freshName(j, taken);
            Expr nd = delta(dl->alpha[0], IndexTerm::v(fresh));
            Expr head = p->op == Op::Delta ? nd : probe(nd, p->kids[1]);
            return Match{mul(head, dx(substituteIndex(q, j, IndexTerm::v(fresh), taken))), {}};
          }
        }
        if (isDeltaHead(p) || isEpsHead(p)) return Match{mul(p, dx(q)), {}};
        if (single) return Match{add(mul(p, dx(q)), mul(q, dx(p))), {}};
      }
      break;
    case Rule::C15:
      if (b->op == Op::Neg) return Match{neg(dx(b->kids[0])), {}};
      break;
    case Rule::C16:
      if (b->op == Op::Add || b->op == Op::Sub) return Match{binary(b->op, dx(b->kids[0]), dx(b->kids[1])), {}};
      break;
    case Rule::C18:
      if (single && b->op == Op::Tan) {
        const Expr& x = b->kids[0];
        return Match{div(dx(x), mul(unary(Op::Cos, x), unary(Op::Cos, x))), {}};
      }
      break;
    case Rule::C19:
      if (single && b->op == Op::Atan) {
        const Expr& x = b->kids[0];
        return Match{mul(div(one(), add(one(), mul(x, x))), dx(x)), {}};
      }
      break;
    case Rule::C20:
      if (single && b->op == Op::Exp) return Match{mul(b, dx(b->kids[0])), {}};
      break;
    case Rule::C21:
      if (single && b->op == Op::Pow) {
        const Expr& x = b->kids[0];
        return Match{mul(mul(lift(*d, cst(b->n)), pow(x, b->n - 1)), dx(x)), {}};
      }
      break;
    case Rule::C22:
      if (b->op == Op::Partial) {
        MultiIndex merged = b->alpha;
        merged.insert(merged.end(), nu.begin(), nu.end());
        return Match{partial(merged, b->kids[0]), {}};
      }
      break;
    default:
      break;
  }
  return std::nullopt;
}

std::optional<Match> ruleD(Rule r, const Expr& e) {
  const auto& k = e->kids;
  switch (r) {
    case Rule::D1:
      if (e->op == Op::Neg && isZero(k[0])) return Match{k[0], {}};
      break;
    case Rule::D2:
      if (e->op == Op::Add && isZero(k[1])) return Match{k[0], {}};
      if (e->op == Op::Add && isZero(k[0])) return Match{k[1], {}};
      break;
    case Rule::D3:
      if (e->op == Op::Sub && isZero(k[1])) return Match{k[0], {}};
      break;
    case Rule::D4:
      if (e->op == Op::Sub && isZero(k[0])) return Match{neg(k[1]), {}};
      break;
    case Rule::D5:
      if (e->op == Op::Div && isZero(k[0])) return Match{k[0], {}};
      break;
    case Rule::D6:
      if (e->op == Op::Mul && isZero(k[0])) return Match{k[0], {}};
      if (e->op == Op::Mul && isZero(k[1])) return Match{k[1], {}};
      break;
    case Rule::D8:
      if (e->op == Op::Neg && k[0]->op == Op::Neg) return Match{k[0]->kids[0], {}};
      break;
    default:
      break;
  }
  return std::nullopt;
}

std::optional<Match> ruleE(Rule r, const Expr& e, const Site& site) {
  const auto& k = e->kids;
  switch (r) {
    case Rule::E4:
      if (e->op == Op::Div && k[0]->op == Op::Div && k[1]->op == Op::Div)
        return Match{div(mul(k[0]->kids[0], k[1]->kids[1]), mul(k[0]->kids[1], k[1]->kids[0])), {}};
      break;
    case Rule::E1:
      if (e->op == Op::Div && k[0]->op == Op::Div) return Match{div(k[0]->kids[0], mul(k[0]->kids[1], k[1])), {}};
      break;
    case Rule::E2:
      if (e->op == Op::Div && k[1]->op == Op::Div) return Match{div(mul(k[0], k[1]->kids[1]), k[1]->kids[0]), {}};
      break;
    case Rule::E5: {
      if (e->op != Op::Sum) break;
      const Expr& body = k[0];
      if (body->op == Op::Mul && isScalar(body->kids[0]))
        return Match{mul(body->kids[0], sum(e->name, e->n, body->kids[1])), {}};
      if (!isScalar(body)) break;
      EinType t;
      try {
        t = inferType(site.gamma, site.sigma.with(e->name, e->n), body);
      } catch (const TypeError&) {
        break;
      }
      if (!t.field) return Match{mul(cst(e->n), body), {}};
      bool unit = body->op == Op::Const || body->op == Op::Tensor || body->op == Op::Field || body->op == Op::Conv ||
                  body->op == Op::Delta;
      if (!unit) return Match{mul(lift(t.dim, cst(e->n)), body), {}};
      break;
    }
    case Rule::E6:
      if (e->op == Op::Mul && k[0]->op == Op::Sqrt && k[1]->op == Op::Sqrt && equal(k[0]->kids[0], k[1]->kids[0]))
        return Match{k[0]->kids[0], {}};
      break;
    default:
      break;
  }
  return std::nullopt;
}

std::optional<Match> tryRule(const RuleInfo& info, const Expr& e, const Site& site) {
  switch (info.id.group) {
    case 'A':
      return info.rule == Rule::A1 ? ruleA1(e, site) : ruleA(info.rule, e, site);
    case 'B':
      return ruleB(info.rule, e);
    case 'C':
      return ruleC(info.rule, e, site);
    case 'D':
      return ruleD(info.rule, e);
    default:
      return ruleE(info.rule, e, site);
  }
}

class Searcher {
 public:
  Searcher(const TypeEnv& gamma, const Expr& root, const IndexCtx& sigma, Strategy s) : gamma_(gamma), strat_(s) {
    avoid_ = allIndexVars(root);
    for (auto& [k, n] : sigma.entries()) avoid_.insert(k);
  }

  std::optional<Redex> visit(const Expr& e, const IndexCtx& sigma, Path& path) {
    if (strat_.outermost)
      if (auto r = here(e, sigma, path)) return r;
    int n = static_cast<int>(e->kids.size());
    for (int t = 0; t < n; ++t) {
      int k = strat_.rightmost ? n - 1 - t : t;
      path.push_back(k);
      auto r = visit(e->kids[k], childContext(sigma, e, k), path);
      path.pop_back();
      if (r) return r;
    }
    if (!strat_.outermost) return here(e, sigma, path);
    return std::nullopt;
  }

 private:
  const TypeEnv& gamma_;
  Strategy strat_;
  std::set<std::string> avoid_;

  std::optional<Redex> here(const Expr& e, const IndexCtx& sigma, const Path& path) {
    // local contexts only hold root indices, binders and delta indices, all already in avoid_
    Site site{gamma_, sigma, avoid_, strat_.rightmost};
    for (auto& info : kCatalog) {
      if (auto m = tryRule(info, e, site)) return Redex{info.rule, path, sigma, m->out, m->contracted};
    }
    return std::nullopt;
  }
};

}  // namespace

const std::vector<RuleInfo>& ruleCatalog() { return kCatalog; }

const RuleInfo& ruleInfo(Rule r) {
  for (auto& info : kCatalog)
    if (info.rule == r) return info;
  throw std::out_of_range("unknown rule");
}

std::optional<Redex> findRedex(const TypeEnv& gamma, const IndexCtx& sigma, const Expr& e, Strategy s) {
  Path path;
  return Searcher(gamma, e, sigma, s).visit(e, sigma, path);
}

static IndexCtx contextAt(const IndexCtx& sigma, const Expr& root, const Path& p) {
  IndexCtx ctx = sigma;
  Expr cur = root;
  for (int k : p) {
    ctx = childContext(ctx, cur, k);
    cur = cur->kids[static_cast<size_t>(k)];
  }
  return ctx;
}

// A pointwise product whose left factor became a bare delta would read as a delta
// application. delta_ab * y equals delta_ab * y[b:=a] pointwise, which is not one.
static std::optional<Expr> keepPointwise(const TypeEnv& gamma, const IndexCtx& ctx, const Expr& m) {
  const Expr& head = m->kids[0];
  const Expr& dl = head->op == Op::Delta ? head : head->kids[0];
  std::set<std::string> taken = allIndexVars(m);
  for (auto& [k, n] : ctx.entries()) taken.insert(k);
  Expr sub = mul(head, substituteIndex(m->kids[1], dl->alpha[1].var, dl->alpha[0], taken));
  if (!isDeltaApplication(sub) && wellTyped(gamma, ctx, sub)) return sub;
  Expr swapped = mul(m->kids[1], head);
  if (!isDeltaApplication(swapped) && wellTyped(gamma, ctx, swapped)) return swapped;
  return std::nullopt;
}

// Fix up ancestors of a rewritten position: a delta application whose body lost the
// index j reduces to its body; a pointwise product must stay pointwise.
static Expr repairDeltas(const TypeEnv& gamma, const IndexCtx& sigma, const Expr& before, Expr after,
                         const Path& path, Path& top) {
  top = path;
  for (size_t d = path.size(); d-- > 0;) {
    Path q(path.begin(), path.begin() + static_cast<long>(d));
    Expr was = subtermAt(before, q);
    Expr now = subtermAt(after, q);
    if (path[d] == 1 && isDeltaApplication(was) && !isDeltaApplication(now)) {
      // the body saw the delta's first index unbound
      Expr body = now->kids[1];
      const Expr& dl = now->kids[0]->op == Op::Delta ? now->kids[0] : now->kids[0]->kids[0];
      if (dl->alpha[0].isVar()) {
        std::set<std::string> taken = allIndexVars(now);
        IndexCtx outer = contextAt(sigma, after, q);
        for (auto& [k, n] : outer.entries()) taken.insert(k);
        body = freshenBinders(body, {dl->alpha[0].var}, taken);
      }
      after = replaceAt(after, q, body);
      top = q;
    } else if (was->op == Op::Mul && !isDeltaApplication(was) && isDeltaApplication(now)) {
      if (auto fixed = keepPointwise(gamma, contextAt(sigma, after, q), now)) {
        after = replaceAt(after, q, *fixed);
        top = q;
      }
    }
  }
  return after;
}

std::optional<RewriteStep> rewriteOnce(const TypeEnv& gamma, const IndexCtx& sigma, const Expr& e, Strategy s) {
  auto r = findRedex(gamma, sigma, e, s);
  if (!r) return std::nullopt;
  RewriteStep step;
  step.rule = r->rule;
  step.before = e;
  step.after = repairDeltas(gamma, sigma, e, replaceAt(e, r->path, r->replacement), r->path, step.path);
  if (step.path == r->path) {
    step.redexBefore = subtermAt(e, r->path);
    step.redexAfter = r->replacement;
    step.localSigma = r->localSigma;
  } else {
    step.redexBefore = subtermAt(e, step.path);
    step.redexAfter = subtermAt(step.after, step.path);
    step.localSigma = contextAt(sigma, e, step.path);
  }
  step.contracted = r->contracted;
  step.sizeBefore = size(step.before);
  step.sizeAfter = size(step.after);
  const std::string where = ruleInfo(r->rule).id.name() + " at " + pathString(r->path) + " on " + print(e);
  if (!(step.sizeAfter < step.sizeBefore)) throw InvariantViolation("size did not decrease: " + where);
  EinType tb = inferType(gamma, sigma, step.before);
  EinType ta;
  try {
    ta = inferType(gamma, sigma, step.after);
  } catch (const TypeError& err) {
    throw InvariantViolation("rewrite produced an ill-typed term (" + std::string(err.what()) + "): " + where + " -> " +
                             print(step.after));
  }
  if (!(ta == tb))
    throw InvariantViolation("type changed from " + printType(tb) + " to " + printType(ta) + ": " + where);
  return step;
}

RewriteTrace normalize(const TypeEnv& gamma, const IndexCtx& sigma, const Expr& e, Strategy s) {
  RewriteTrace t;
  t.initial = e;
  Expr cur = e;
  while (auto step = rewriteOnce(gamma, sigma, cur, s)) {
    cur = step->after;
    t.steps.push_back(std::move(*step));
  }
  t.final = cur;
  return t;
}

Json stepToDocument(const RewriteStep& step) {
  const RuleInfo& info = ruleInfo(step.rule);
  Json d;
  d["rule"] = info.id.name();
  d["alias"] = info.id.alias ? Json(info.id.alias) : Json(nullptr);
  d["path"] = step.path;
  d["before"] = toDocument(step.before);
  d["after"] = toDocument(step.after);
  d["sizeBefore"] = step.sizeBefore.get_str();
  d["sizeAfter"] = step.sizeAfter.get_str();
  return d;
}

Json traceToDocument(const RewriteTrace& trace) {
  Json d;
  d["initial"] = toDocument(trace.initial);
  Json steps = Json::array();
  for (auto& s : trace.steps) steps.push_back(stepToDocument(s));
  d["steps"] = steps;
  d["final"] = toDocument(trace.final);
  return d;
}

}  // namespace ein
