#include "ein/analysis.hpp"

#include <stdexcept>

#include "ein/typecheck.hpp"

namespace ein {

namespace {

BigInt pow5(const BigInt& s) {
  if (s > 10000000) throw std::overflow_error("size exponent too large: " + s.get_str());
  BigInt r;
  mpz_ui_pow_ui(r.get_mpz_t(), 5, s.get_ui());
  return r;
}

BigInt dsize(const BigInt& s) { return s * pow5(s); }

}  // namespace

BigInt size(const Expr& e) {
  switch (e->op) {
    case Op::Const:
    case Op::Tensor:
    case Op::Field:
    case Op::Conv:
    case Op::Delta:
      return 1;
    case Op::Eps:
      return 4;
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
      return 1 + size(e->kids[0]) + size(e->kids[1]);
    case Op::Div:
      return 2 + size(e->kids[0]) + size(e->kids[1]);
    case Op::Sum:
      return 2 + 2 * size(e->kids[0]);
    case Op::Partial:
      return dsize(size(e->kids[0]));
    case Op::Probe:
      return 2 * size(e->kids[0]);
    default:  // lift and the unary operators
      return 1 + size(e->kids[0]);
  }
}

namespace {

enum : unsigned { kN = 1, kA = 2, kD = 4, kG = 8, kB = 16, kF = 32 };
constexpr unsigned kAllB = kN | kA | kD | kG | kB;
constexpr unsigned kAll = kAllB | kF;

std::set<std::string> vset(const MultiIndex& m) {
  std::set<std::string> s;
  for (auto& t : m)
    if (t.isVar()) s.insert(t.var);
  return s;
}

bool eps3Distinct(const Expr& e) {
  if (e->op != Op::Eps || e->alpha.size() != 3) return false;
  for (auto& t : e->alpha)
    if (!t.isVar()) return false;
  return vset(e->alpha).size() == 3;
}

int common(const std::set<std::string>& a, const std::set<std::string>& b) {
  int n = 0;
  for (auto& v : a) n += static_cast<int>(b.count(v));
  return n;
}

bool nonlinearBody(const Expr& b) {
  switch (b->op) {
    case Op::Sqrt:
    case Op::Exp:
    case Op::Pow:
    case Op::Div:
    case Op::Mul:
      return true;
    default:
      return isTrig(b->op);
  }
}

class NfChecker {
 public:
  NfChecker(const TypeEnv& gamma, NfVerdict& out) : gamma_(gamma), out_(out) {}

  unsigned visit(const Expr& e, const IndexCtx& sigma, Path& path) {
    std::vector<unsigned> km;
    for (size_t k = 0; k < e->kids.size(); ++k) {
      path.push_back(static_cast<int>(k));
      km.push_back(visit(e->kids[k], childContext(sigma, e, static_cast<int>(k)), path));
      path.pop_back();
    }
    switch (e->op) {
      case Op::Const:
        return e->value == 0 ? kN : kAllB;
      case Op::Tensor:
      case Op::Delta:
      case Op::Eps:
        return kAllB;
      case Op::Field:
      case Op::Conv:
        return kAll;
      case Op::Lift:
        return isZero(e) ? kN : kAllB;
      case Op::Neg:
        if (km[0] & kG) return kN | kA | kD;
        return fail("D ::= -G", path, isZero(e->kids[0]) ? "negated zero" : "double negation");
      case Op::Div: {
        if (!(km[0] & kD)) return fail("G ::= D/D", path, isZero(e->kids[0]) ? "zero numerator" : "numerator is a quotient");
        if (!(km[1] & kD)) {
          if (isZero(e->kids[1])) {
            gap("G ::= D/D", path, "division by zero");
            return kN | kA | kG;
          }
          return fail("G ::= D/D", path, "denominator is a quotient");
        }
        return kN | kA | kG;
      }
      case Op::Add:
      case Op::Sub:
        if (!(km[0] & kA) || !(km[1] & kA)) return fail("B ::= A+A | A-A", path, "zero operand");
        return kAllB;
      case Op::Mul:
        if (!(km[0] & kA) || !(km[1] & kA)) return fail("B ::= A*A", path, "zero factor");
        return product(e, sigma, path);
      case Op::Sum:
        return summation(e, path);
      case Op::Probe:
        if (!(km[0] & kF)) return fail("B ::= F@T", path, "probe of a non-field form");
        return kAllB;
      case Op::Partial:
        return derivative(e, path);
      default:  // sqrt, exp, pow, kappa, trig
        return kAllB;
    }
  }

 private:
  const TypeEnv& gamma_;
  NfVerdict& out_;

  unsigned fail(const std::string& prod, const Path& path, const std::string& detail) {
    out_.violations.push_back({prod, path, detail});
    return kAll;  // reported here; do not cascade to the parent
  }

  void gap(const std::string& prod, const Path& path, const std::string& detail) {
    out_.gaps.push_back({prod, path, detail});
  }

  void chain(const Expr& e, std::vector<Expr>& fs) {
    if (e->op == Op::Mul && !isDeltaApplication(e)) {
      chain(e->kids[0], fs);
      chain(e->kids[1], fs);
    } else {
      fs.push_back(e);
    }
  }

  bool contractibleEpsPair(const Expr& e, const IndexCtx& sigma) {
    std::vector<Expr> fs;
    chain(e, fs);
    if (fs.size() > 2) {
      try {
        if (inferType(gamma_, sigma, e).field) return false;
      } catch (const TypeError&) {
        return false;
      }
    }
    for (size_t a = 0; a < fs.size(); ++a) {
      for (size_t b = a + 1; b < fs.size(); ++b) {
        if (!eps3Distinct(fs[a]) || !eps3Distinct(fs[b])) continue;
        auto sa = vset(fs[a]->alpha), sb = vset(fs[b]->alpha);
        if (common(sa, sb) != 1) continue;
        std::string shared;
        for (auto& v : sa)
          if (sb.count(v)) shared = v;
        bool elsewhere = false;
        for (size_t k = 0; k < fs.size(); ++k)
          if (k != a && k != b && occursFree(shared, fs[k])) elsewhere = true;
        if (!elsewhere) return true;
      }
    }
    return false;
  }

  static bool hasDerivComponentWithTwo(const Expr& e, const std::set<std::string>& epsVars) {
    if (e->op == Op::Conv && common(vset(e->beta), epsVars) >= 2) return true;
    if (e->op == Op::Partial && common(vset(e->alpha), epsVars) >= 2) return true;
    for (auto& k : e->kids)
      if (hasDerivComponentWithTwo(k, epsVars)) return true;
    return false;
  }

  unsigned product(const Expr& e, const IndexCtx& sigma, const Path& path) {
    const Expr& a = e->kids[0];
    const Expr& b = e->kids[1];
    if (contractibleEpsPair(e, sigma)) return fail("restriction 1", path, "eps factors share exactly one index");
    if (a->op == Op::Eps && b->op == Op::Eps && common(vset(a->alpha), vset(b->alpha)) > 0)
      gap("restriction 1", path, "eps factors share indices but no contraction applies");
    if (a->op == Op::Eps && a->alpha.size() == 3) {
      auto ev = vset(a->alpha);
      if ((b->op == Op::Conv && common(vset(b->beta), ev) >= 2) || (b->op == Op::Partial && common(vset(b->alpha), ev) >= 2))
        return fail("restriction 2", path, "two eps indices differentiate the same factor");
      if (hasDerivComponentWithTwo(b, ev)) gap("restriction 2", path, "two eps indices in a nested derivative");
    }
    if (a->op == Op::Delta && isDeltaApplication(e)) {
      bool atom = b->op == Op::Tensor || b->op == Op::Field || b->op == Op::Conv || b->op == Op::Partial ||
                  (b->op == Op::Probe && b->kids[0]->op == Op::Conv);
      if (atom) return fail("restriction 3", path, "delta index '" + a->alpha[1].var + "' occurs in the other factor");
      gap("restriction 3", path, "delta index '" + a->alpha[1].var + "' occurs in a compound factor");
    }
    if (a->op == Op::Sqrt && b->op == Op::Sqrt && equal(a->kids[0], b->kids[0]))
      return fail("restriction 4", path, "product of equal square roots");
    return kAllB;
  }

  unsigned summation(const Expr& e, const Path& path) {
    const Expr& body = e->kids[0];
    if (body->op == Op::Mul && isScalar(body->kids[0])) return fail("restriction 5", path, "scalar factor inside the sum");
    if (isScalar(body)) {
      if (body->op == Op::Field || body->op == Op::Conv) {
        gap("restriction 5", path, "sum of a scalar field atom");
        return kAllB;
      }
      return fail("restriction 5", path, "scalar summand");
    }
    return kAllB;
  }

  unsigned derivative(const Expr& e, const Path& path) {
    const Expr& b = e->kids[0];
    if (b->op == Op::Field) return kAll;
    if (b->op == Op::Kappa) {
      gap("F ::= d(F)", path, "derivative of kappa");
      return kAll;
    }
    if (e->alpha.size() > 1 && nonlinearBody(b) && !(b->op == Op::Mul && (isDeltaHead(b->kids[0]) || isEpsHead(b->kids[0])))) {
      gap("F ::= d(F)", path, "multi-index derivative of a nonlinear term");
      return kAll;
    }
    return fail("F ::= d(F)", path, std::string("derivative of ") + opName(b->op));
  }
};

}  // namespace

NfVerdict isNormalForm(const TypeEnv& gamma, const IndexCtx& sigma, const Expr& e) {
  NfVerdict v;
  Path path;
  unsigned top = NfChecker(gamma, v).visit(e, sigma, path);
  if (!(top & kN)) v.violations.push_back({"N", {}, "not a normal form"});
  v.inNormalForm = v.violations.empty();
  return v;
}

bool isTerminal(const TypeEnv& gamma, const IndexCtx& sigma, const Expr& e) {
  return !findRedex(gamma, sigma, e).has_value();
}

Json verdictToDocument(const NfVerdict& v) {
  auto issues = [](const std::vector<NfIssue>& xs) {
    Json a = Json::array();
    for (auto& x : xs) {
      Json j;
      j["production"] = x.production;
      j["path"] = x.path;
      j["detail"] = x.detail;
      a.push_back(j);
    }
    return a;
  };
  Json d;
  d["inNormalForm"] = v.inNormalForm;
  d["violations"] = issues(v.violations);
  d["gaps"] = issues(v.gaps);
  return d;
}

namespace {

using Sizes = std::vector<BigInt>;
using P = std::pair<BigInt, BigInt>;

RuleMetric fixed(std::string name, long lhs, long rhs) {
  return {std::move(name), 0, 1, [lhs, rhs](const Sizes&) { return P(lhs, rhs); }};
}

std::vector<RuleMetric> buildMetrics() {
  auto D = dsize;
  std::vector<RuleMetric> m;
  m.push_back(fixed("A1", 9, 7));
  m.push_back(fixed("A3", 6, 2));
  m.push_back({"A4", 1, 1, [D](const Sizes& s) { return P(5 + D(s[0]), 2); }});
  m.push_back(fixed("A5", 3, 1));
  m.push_back(fixed("A6", 3, 1));
  m.push_back({"A7", 1, 1, [D](const Sizes& s) { return P(2 + D(s[0]), D(s[0])); }});
  m.push_back(fixed("A8", 3, 1));
  m.push_back(fixed("A9", 4, 2));
  m.push_back({"B1 product", 2, 1, [](const Sizes& s) { return P(2 * (1 + s[0] + s[1]), 1 + 2 * s[0] + 2 * s[1]); }});
  m.push_back({"B1 quotient", 2, 1, [](const Sizes& s) { return P(2 * (2 + s[0] + s[1]), 2 + 2 * s[0] + 2 * s[1]); }});
  m.push_back({"B2", 2, 1, [](const Sizes& s) { return P(2 * (1 + s[0] + s[1]), 1 + 2 * s[0] + 2 * s[1]); }});
  m.push_back({"B3", 1, 1, [](const Sizes& s) { return P(2 * (1 + s[0]), 1 + 2 * s[0]); }});
  m.push_back({"B4", 1, 1, [](const Sizes& s) { return P(2 * (2 + 2 * s[0]), 2 + 4 * s[0]); }});
  m.push_back(fixed("B5 delta", 2, 1));
  m.push_back(fixed("B5 eps", 8, 4));
  m.push_back({"B5 lift", 1, 1, [](const Sizes& s) { return P(2 * (1 + s[0]), s[0]); }});
  m.push_back({"C2 const/delta", 0, 1, [D](const Sizes&) { return P(D(1), 2); }});
  m.push_back({"C2 eps", 0, 1, [D](const Sizes&) { return P(D(4), 2); }});
  m.push_back({"C2 lift", 1, 1, [D](const Sizes& s) { return P(D(1 + s[0]), 2); }});
  m.push_back({"C3", 1, 1, [D](const Sizes& s) { return P(D(2 + 2 * s[0]), 2 + 2 * D(s[0])); }});
  m.push_back(fixed("C5", 5, 1));
  m.push_back({"C6", 1, 1, [D](const Sizes& s) { return P(D(1 + s[0]), 6 + s[0] + D(s[0])); }});
  m.push_back({"C7", 1, 1, [D](const Sizes& s) { return P(D(1 + s[0]), 3 + s[0] + D(s[0])); }});
  m.push_back({"C8", 1, 1, [D](const Sizes& s) { return P(D(1 + s[0]), 2 + s[0] + D(s[0])); }});
  m.push_back({"C9", 1, 1, [D](const Sizes& s) { return P(D(1 + s[0]), 11 + 2 * s[0] + D(s[0])); }});
  m.push_back({"C10", 1, 1, [D](const Sizes& s) { return P(D(1 + s[0]), 10 + 2 * s[0] + D(s[0])); }});
  m.push_back({"C11", 2, 1, [D](const Sizes& s) {
                 return P(D(2 + s[0] + s[1]), 6 + s[0] + D(s[0]) + 3 * s[1] + D(s[1]));
               }});
  m.push_back({"C14", 2, 1, [D](const Sizes& s) {
                 return P(D(1 + s[0] + s[1]), 3 + s[0] + s[1] + D(s[0]) + D(s[1]));
               }});
  m.push_back({"C14 constant head", 2, 1, [D](const Sizes& s) { return P(D(1 + s[0] + s[1]), 1 + s[0] + D(s[1])); }});
  m.push_back({"C15", 1, 1, [D](const Sizes& s) { return P(D(1 + s[0]), 1 + D(s[0])); }});
  m.push_back({"C16", 2, 1, [D](const Sizes& s) { return P(D(1 + s[0] + s[1]), 1 + D(s[0]) + D(s[1])); }});
  m.push_back({"C18", 1, 1, [D](const Sizes& s) { return P(D(1 + s[0]), 5 + 2 * s[0] + D(s[0])); }});
  m.push_back({"C19", 1, 1, [D](const Sizes& s) { return P(D(1 + s[0]), 9 + 2 * s[0] + D(s[0])); }});
  m.push_back({"C20", 1, 1, [D](const Sizes& s) { return P(D(1 + s[0]), 2 + s[0] + D(s[0])); }});
  m.push_back({"C21", 1, 1, [D](const Sizes& s) { return P(D(1 + s[0]), 5 + s[0] + D(s[0])); }});
  m.push_back({"C22", 1, 1, [D](const Sizes& s) { return P(D(D(s[0])), D(s[0])); }});
  m.push_back(fixed("D1 tensor", 2, 1));
  m.push_back(fixed("D1 field", 3, 2));
  m.push_back({"D2 tensor", 1, 1, [](const Sizes& s) { return P(2 + s[0], s[0]); }});
  m.push_back({"D2 field", 1, 1, [](const Sizes& s) { return P(3 + s[0], s[0]); }});
  m.push_back({"D3 tensor", 1, 1, [](const Sizes& s) { return P(2 + s[0], s[0]); }});
  m.push_back({"D3 field", 1, 1, [](const Sizes& s) { return P(3 + s[0], s[0]); }});
  m.push_back({"D4 tensor", 1, 1, [](const Sizes& s) { return P(2 + s[0], 1 + s[0]); }});
  m.push_back({"D4 field", 1, 1, [](const Sizes& s) { return P(3 + s[0], 1 + s[0]); }});
  m.push_back({"D5 tensor", 1, 1, [](const Sizes& s) { return P(3 + s[0], 1); }});
  m.push_back({"D5 field", 1, 1, [](const Sizes& s) { return P(4 + s[0], 2); }});
  m.push_back({"D6 tensor", 1, 1, [](const Sizes& s) { return P(2 + s[0], 1); }});
  m.push_back({"D6 field", 1, 1, [](const Sizes& s) { return P(3 + s[0], 2); }});
  m.push_back({"D8", 1, 1, [](const Sizes& s) { return P(2 + s[0], s[0]); }});
  m.push_back({"E1", 3, 1, [](const Sizes& s) { return P(4 + s[0] + s[1] + s[2], 3 + s[0] + s[1] + s[2]); }});
  m.push_back({"E2", 3, 1, [](const Sizes& s) { return P(4 + s[0] + s[1] + s[2], 3 + s[0] + s[1] + s[2]); }});
  m.push_back({"E4", 4, 1, [](const Sizes& s) {
                 BigInt t = s[0] + s[1] + s[2] + s[3];
                 return P(6 + t, 4 + t);
               }});
  m.push_back({"E5 product", 2, 1, [](const Sizes& s) { return P(2 + 2 * (1 + s[0] + s[1]), 3 + s[0] + 2 * s[1]); }});
  m.push_back({"E5 bare tensor", 1, 1, [](const Sizes& s) { return P(2 + 2 * s[0], 2 + s[0]); }});
  m.push_back({"E5 bare field", 1, 2, [](const Sizes& s) { return P(2 + 2 * s[0], 3 + s[0]); }});
  m.push_back({"E6", 1, 1, [](const Sizes& s) { return P(3 + 2 * s[0], s[0]); }});
  return m;
}

}  // namespace

const std::vector<RuleMetric>& ruleMetrics() {
  static const std::vector<RuleMetric> m = buildMetrics();
  return m;
}

MetricReport checkMetricLemmas(int maxS) {
  MetricReport r;
  auto check = [&](bool ok, const std::string& what) {
    ++r.checks;
    if (!ok) {
      r.ok = false;
      r.failures.push_back(what);
    }
  };
  for (int s = 1; s <= maxS; ++s) {
    BigInt S = s;
    check(pow5(1 + S) > 16 + pow5(S), "lemx s=" + std::to_string(s));
    check((1 + S) * pow5(1 + S) > S * (16 + pow5(S)) + 20, "lemz s=" + std::to_string(s));
    for (int t = 1; t <= maxS; ++t) {
      BigInt T = t;
      check(pow5(S + T) > pow5(S) && pow5(S) > 4, "lemy s1=" + std::to_string(s) + " s2=" + std::to_string(t));
    }
  }
  for (auto& rm : ruleMetrics()) {
    std::vector<int> idx(rm.arity, rm.minSize);
    for (;;) {
      Sizes s(idx.begin(), idx.end());
      auto [lhs, rhs] = rm.sizes(s);
      std::string at = rm.name;
      for (int v : idx) at += " " + std::to_string(v);
      check(lhs > rhs, at);
      int k = 0;
      while (k < rm.arity && ++idx[k] > maxS) idx[k++] = rm.minSize;
      if (k == rm.arity) break;
    }
  }
  return r;
}

}  // namespace ein
