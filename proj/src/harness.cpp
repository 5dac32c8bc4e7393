#include "ein/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "ein/analysis.hpp"
#include "ein/syntax.hpp"
#include "ein/typecheck.hpp"
#include "ein/value.hpp"

namespace ein {

const TypeEnv& standardGamma() {
  static const TypeEnv g = [] {
    TypeEnv t;
    t["S"] = {ParamKind::Ten, 0, {}};
    t["A2"] = {ParamKind::Ten, 0, {2}};
    t["A3"] = {ParamKind::Ten, 0, {3}};
    t["M2"] = {ParamKind::Ten, 0, {2, 2}};
    t["M3"] = {ParamKind::Ten, 0, {3, 3}};
    t["X2"] = {ParamKind::Ten, 0, {2}};
    t["X3"] = {ParamKind::Ten, 0, {3}};
    t["F2"] = {ParamKind::Fld, 2, {}};
    t["G2"] = {ParamKind::Fld, 2, {2}};
    t["F3"] = {ParamKind::Fld, 3, {}};
    t["G3"] = {ParamKind::Fld, 3, {3}};
    t["V2"] = {ParamKind::Img, 2, {}};
    t["V3"] = {ParamKind::Img, 3, {}};
    t["H"] = {ParamKind::Krn, 0, {}};
    return t;
  }();
  return g;
}

void validateConfig(const GenConfig& cfg) {
  if (cfg.maxDepth < 1) throw std::invalid_argument("maxDepth must be at least 1");
  if (cfg.dims.empty()) throw std::invalid_argument("no dimensions");
  for (int d : cfg.dims)
    if (d != 2 && d != 3) throw std::invalid_argument("dimensions must be 2 or 3");
  for (auto& [k, w] : cfg.weights)
    if (w < 0) throw std::invalid_argument("negative weight for '" + k + "'");
}

namespace {

struct Scope {
  IndexCtx ctx;
  std::vector<std::string> usable;

  std::vector<std::string> withBound(int b) const {
    std::vector<std::string> out;
    for (auto& v : usable)
      if (ctx.bound(v) == b) out.push_back(v);
    return out;
  }
};

const std::vector<Op> kUnaryOps = {Op::Sqrt, Op::Exp, Op::Kappa, Op::Sin, Op::Cos,
                                   Op::Tan, Op::Asin, Op::Acos, Op::Atan};

const char* kNames[] = {"k", "l", "m", "n", "p", "q", "r", "s", "t", "u", "v", "w"};

class Gen {
 public:
  Gen(const GenConfig& cfg, const TypeEnv& gamma, std::mt19937_64& rng) : cfg_(cfg), gamma_(gamma), rng_(rng) {}

  Expr any(bool field, int d, const Scope& s, int depth, bool allowPartial) {
    return field ? fieldExpr(d, s, depth, allowPartial) : tensorExpr(s, depth, allowPartial);
  }

 private:
  const GenConfig& cfg_;
  const TypeEnv& gamma_;
  std::mt19937_64& rng_;

  double weight(const std::string& name, double base) const {
    auto it = cfg_.weights.find(name);
    return it == cfg_.weights.end() ? base : it->second;
  }

  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin(double p) { return std::uniform_real_distribution<double>(0, 1)(rng_) < p; }

  template <class T>
  const T& choose(const std::vector<T>& xs) {
    return xs[static_cast<size_t>(uniform(0, static_cast<int>(xs.size()) - 1))];
  }

  std::string pickWeighted(const std::vector<std::pair<std::string, double>>& opts) {
    double total = 0;
    for (auto& o : opts) total += o.second;
    if (total <= 0) throw GenerationExhausted("no production has positive weight");
    double r = std::uniform_real_distribution<double>(0, total)(rng_);
    for (auto& o : opts) {
      if (r < o.second) return o.first;
      r -= o.second;
    }
    return opts.back().first;
  }

  std::string fresh(const IndexCtx& ctx) {
    for (const char* n : kNames)
      if (!ctx.contains(n)) return n;
    std::set<std::string> avoid;
    for (auto& [v, b] : ctx.entries()) avoid.insert(v);
    return freshName("k", avoid);
  }

  std::vector<std::string> params(ParamKind k, int dim = -1) const {
    std::vector<std::string> out;
    for (auto& [name, t] : gamma_)
      if (t.kind == k && (dim < 0 || t.dim == dim) && (k != ParamKind::Ten || name[0] != 'X')) out.push_back(name);
    return out;
  }

  IndexTerm slot(const Scope& s, int bound) {
    auto vs = s.withBound(bound);
    if (!vs.empty() && coin(0.8)) return IndexTerm::v(choose(vs));
    return IndexTerm::c(uniform(1, bound));
  }

  MultiIndex slots(const Scope& s, const std::vector<int>& shape) {
    MultiIndex m;
    for (int b : shape) m.push_back(slot(s, b));
    return m;
  }

  Expr constant() {
    static const std::vector<Rational> cs = {Rational(1), Rational(2), Rational(-1), Rational(1, 2), Rational(3, 2),
                                             Rational(3)};
    if (coin(0.06)) return cst(0);
    return cst(choose(cs));
  }

  Expr epsAtom(const Scope& s) {
    int n = uniform(2, 3);
    auto vs = s.withBound(n);
    std::shuffle(vs.begin(), vs.end(), rng_);
    MultiIndex m;
    for (int k = 0; k < n; ++k) {
      if (!vs.empty() && coin(0.85)) {
        m.push_back(IndexTerm::v(vs.back()));
        vs.pop_back();
      } else {
        m.push_back(IndexTerm::c(uniform(1, n)));
      }
    }
    return eps(m);
  }

  Expr deltaAtom(const Scope& s) {
    int b = choose(cfg_.dims);
    IndexTerm i = slot(s, b), j = slot(s, b);
    if (!i.isVar() && j.isVar()) std::swap(i, j);
    return delta(i, j);
  }

  Expr tensorAtom(const Scope& s) {
    std::string choice = pickWeighted({{"const", weight("const", 1)},
                                       {"tensor", weight("tensor", 3)},
                                       {"delta", weight("delta", 1)},
                                       {"eps", weight("eps", 1)}});
    if (choice == "const") return constant();
    if (choice == "delta") return deltaAtom(s);
    if (choice == "eps") return epsAtom(s);
    std::vector<std::string> ts;
    for (auto& name : params(ParamKind::Ten)) {
      const auto& shape = gamma_.at(name).shape;
      if (std::all_of(shape.begin(), shape.end(), [&](int b) {
            return std::find(cfg_.dims.begin(), cfg_.dims.end(), b) != cfg_.dims.end();
          }))
        ts.push_back(name);
    }
    const std::string& name = choose(ts);
    return ten(name, slots(s, gamma_.at(name).shape));
  }

  Expr fieldAtom(int d, const Scope& s) {
    std::vector<std::pair<std::string, double>> opts = {{"liftconst", weight("liftconst", 1)}};
    if (cfg_.fieldTerms) {
      opts.push_back({"field", weight("field", 3)});
      opts.push_back({"conv", weight("conv", 1)});
    }
    std::string choice = pickWeighted(opts);
    if (choice == "liftconst") return lift(d, coin(0.5) ? constant() : tensorAtom(s));
    if (choice == "field") {
      std::string name = choose(params(ParamKind::Fld, d));
      return fld(name, slots(s, gamma_.at(name).shape));
    }
    std::string img = choose(params(ParamKind::Img, d));
    MultiIndex beta;
    int nb = uniform(0, 2);
    for (int k = 0; k < nb; ++k) beta.push_back(slot(s, d));
    return conv(img, slots(s, gamma_.at(img).shape), "H", beta);
  }

  std::vector<std::pair<std::string, double>> compound(bool field, const Scope& s, bool allowPartial) {
    std::vector<std::pair<std::string, double>> o = {
        {"neg", weight("neg", 0.5)}, {"add", weight("add", 1)},     {"sub", weight("sub", 0.5)},
        {"mul", weight("mul", 1.5)}, {"div", weight("div", 0.5)},   {"sum", weight("sum", 1)},
        {"unary", weight("unary", 0.5)}, {"pow", weight("pow", 0.3)}, {"epsmul", weight("epsmul", 0.5)},
    };
    if (!s.usable.empty()) o.push_back({"deltaapp", weight("deltaapp", 1)});
    if (!field) o.push_back({"probe", weight("probe", 0.7)});
    if (field) o.push_back({"lift", weight("lift", 1)});
    if (field && cfg_.fieldTerms && allowPartial) o.push_back({"partial", weight("partial", 1)});
    return o;
  }

  Expr scalar(bool field, int d, const Scope& s, int depth, bool allowPartial) {
    Scope sc{s.ctx, {}};
    return any(field, d, sc, depth, allowPartial);
  }

  Expr nonzeroScalar(bool field, int d, const Scope& s, int depth, bool allowPartial) {
    for (int t = 0; t < 4; ++t) {
      Expr e = scalar(field, d, s, depth, allowPartial);
      if (!isZero(e)) return e;
    }
    return field ? lift(d, cst(1)) : cst(1);
  }

  Expr tensorExpr(const Scope& s, int depth, bool allowPartial) {
    if (depth <= 1 || coin(cfg_.atomProb)) return tensorAtom(s);
    return build(false, 0, s, depth, allowPartial);
  }

  Expr fieldExpr(int d, const Scope& s, int depth, bool allowPartial) {
    if (depth <= 1 || coin(cfg_.atomProb)) return fieldAtom(d, s);
    return build(true, d, s, depth, allowPartial);
  }

  Expr build(bool field, int d, const Scope& s, int depth, bool allowPartial) {
    std::string p = pickWeighted(compound(field, s, allowPartial));
    int dd = depth - 1;
    auto sub = [&](const Scope& sc) { return any(field, d, sc, dd, allowPartial); };
    if (p == "neg") return neg(sub(s));
    if (p == "add") return add(sub(s), sub(s));
    if (p == "sub") return ein::sub(sub(s), sub(s));
    if (p == "mul") {
      Expr a = sub(s), b = sub(s);
      Expr m = mul(a, b);
      if (!isDeltaApplication(m) || wellTyped(gamma_, s.ctx, m)) return m;
      m = mul(b, a);
      if (!isDeltaApplication(m) || wellTyped(gamma_, s.ctx, m)) return m;
      return add(a, b);
    }
    if (p == "div") return div(sub(s), nonzeroScalar(field, d, s, dd, allowPartial));
    if (p == "unary") return unary(choose(kUnaryOps), scalar(field, d, s, dd, allowPartial));
    if (p == "pow") return pow(scalar(field, d, s, dd, allowPartial), uniform(2, 4));
    if (p == "epsmul") return mul(epsAtom(s), sub(s));
    if (p == "sum") {
      std::string b = fresh(s.ctx);
      int n = choose(cfg_.dims);
      Scope in{s.ctx.with(b, n), s.usable};
      in.usable.push_back(b);
      return sum(b, n, sub(in));
    }
    if (p == "deltaapp") {
      const std::string& i = choose(s.usable);
      int n = *s.ctx.bound(i);
      std::string j = fresh(s.ctx);
      Scope in{s.ctx.without(i).with(j, n), {}};
      for (auto& v : s.usable)
        if (v != i) in.usable.push_back(v);
      in.usable.push_back(j);
      Expr body = sub(in);
      if (!occursFree(j, body)) {
        Expr a = ten(n == 2 ? "A2" : "A3", {IndexTerm::v(j)});
        body = mul(body, field ? lift(d, a) : a);
      }
      return mul(delta(IndexTerm::v(i), IndexTerm::v(j)), body);
    }
    if (p == "probe") {
      int fd = choose(cfg_.dims);
      return probe(fieldExpr(fd, s, dd, allowPartial), ten(fd == 2 ? "X2" : "X3"));
    }
    if (p == "lift") return lift(d, tensorExpr(s, dd, allowPartial));
    // partial
    auto vs = s.withBound(d);
    if (vs.empty()) return fieldAtom(d, s);
    std::shuffle(vs.begin(), vs.end(), rng_);
    MultiIndex nu{IndexTerm::v(vs[0])};
    if (vs.size() > 1 && coin(0.3)) nu.push_back(IndexTerm::v(vs[1]));
    Scope in{s.ctx, {}};
    for (auto& t : nu) in.ctx = in.ctx.without(t.var);
    for (auto& v : s.usable)
      if (in.ctx.contains(v)) in.usable.push_back(v);
    auto rest = in.withBound(d);
    if (dd >= 2 && !rest.empty() && coin(0.1)) {
      Scope inner{in.ctx.without(rest[0]), {}};
      for (auto& v : in.usable)
        if (v != rest[0]) inner.usable.push_back(v);
      std::string name = choose(params(ParamKind::Fld, d));
      return partial(nu, partial({IndexTerm::v(rest[0])}, fld(name, slots(inner, gamma_.at(name).shape))));
    }
    return partial(nu, fieldExpr(d, in, std::min(dd, 3), false));
  }
};

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

Expr genWellTyped(const GenConfig& cfg, const TypeEnv& gamma, const IndexCtx& sigma, const EinType& target,
                  std::mt19937_64& rng) {
  validateConfig(cfg);
  checkEnvOk(gamma, sigma);
  Scope s{sigma, {}};
  for (auto& [v, b] : sigma.entries()) s.usable.push_back(v);
  Gen g(cfg, gamma, rng);
  return g.any(target.field, target.dim, s, cfg.maxDepth, true);
}

std::uint64_t caseSeed(std::uint64_t seed, std::uint64_t index) { return splitmix(splitmix(seed) ^ index); }

GenCase genCase(const GenConfig& cfg, std::uint64_t index) {
  std::mt19937_64 rng(caseSeed(cfg.seed, index));
  GenCase c;
  int nfree = std::uniform_int_distribution<int>(0, 2)(rng);
  const char* names[] = {"i", "j"};
  for (int k = 0; k < nfree; ++k)
    c.sigma.push(names[k], cfg.dims[std::uniform_int_distribution<size_t>(0, cfg.dims.size() - 1)(rng)]);
  c.type.field = cfg.fieldTerms && std::uniform_int_distribution<int>(0, 9)(rng) < 3;
  c.type.dim = c.type.field ? cfg.dims[std::uniform_int_distribution<size_t>(0, cfg.dims.size() - 1)(rng)] : 0;
  c.type.shape = c.sigma;
  c.expr = genWellTyped(cfg, standardGamma(), c.sigma, c.type, rng);
  return c;
}

DataEnv genData(const TypeEnv& gamma, std::uint64_t seed) {
  std::mt19937_64 rng(splitmix(seed));
  std::uniform_int_distribution<int> num(-6, 6), den(1, 4);
  DataEnv out;
  for (auto& [name, t] : gamma) {
    if (t.kind != ParamKind::Ten) continue;
    TensorData d;
    d.shape = t.shape;
    size_t n = 1;
    for (int b : t.shape) n *= static_cast<size_t>(b);
    for (size_t k = 0; k < n; ++k) {
      Rational q(num(rng), den(rng));
      q.canonicalize();
      d.data.push_back(q);
    }
    out[name] = d;
  }
  return out;
}

const char* propertyName(Property p) {
  switch (p) {
    case Property::Type: return "type";
    case Property::Value: return "value";
    case Property::Descent: return "descent";
    case Property::NfEquiv: return "nf-equiv";
    default: return "symbolic";
  }
}

Property propertyFromName(const std::string& name) {
  for (Property p : {Property::Type, Property::Value, Property::Descent, Property::NfEquiv, Property::Symbolic})
    if (name == propertyName(p)) return p;
  throw std::invalid_argument("unknown property '" + name + "'");
}

namespace {

constexpr long kStepBudget = 20000;

// Normalization that reports instead of throwing.
std::optional<std::string> traceOf(const IndexCtx& sigma, const Expr& e, std::vector<RewriteStep>& steps) {
  Expr cur = e;
  try {
    while (auto step = rewriteOnce(standardGamma(), sigma, cur)) {
      cur = step->after;
      steps.push_back(std::move(*step));
      if (static_cast<long>(steps.size()) > kStepBudget) return "step budget exceeded";
    }
  } catch (const std::exception& err) {
    return std::string("rewriting failed: ") + err.what();
  }
  return std::nullopt;
}

std::string at(const RewriteStep& s) {
  return ruleInfo(s.rule).id.name() + " at " + pathString(s.path) + " on " + print(s.before);
}

CaseOutcome checkImpl(Property p, const IndexCtx& sigma, const Expr& e, const DataEnv& psi) {
  const TypeEnv& gamma = standardGamma();
  CaseOutcome out;
  EinType t0;
  try {
    t0 = inferType(gamma, sigma, e);
  } catch (const TypeError& err) {
    out.failure = std::string("ill-typed input: ") + err.what();
    return out;
  }
  if (p == Property::Symbolic) {
    if (hasFieldTerms(e)) {
      out.skipped = 1;
      return out;
    }
    Value v;
    try {
      v = evalSymbolic(&psi, e);
    } catch (const EvalError&) {
      out.skipped = 1;
      return out;
    }
    bool exact = isAlgebraic(e);
    for (auto& rho : assignments(sigma)) {
      std::ostringstream os;
      os.precision(17);
      std::optional<Rational> n;
      double d = 0;
      long double w = 0;
      try {
        if (exact) {
          n = evalExact(psi, rho, e);
        } else {
          d = evalNumeric(psi, rho, e);
          w = evalNumericWide(psi, rho, e);
        }
      } catch (const EvalError&) {
        continue;
      }
      // ill-conditioned at this point: the oracle disagrees with itself
      if (!exact && (!std::isfinite(d) || !closeEnough(d, static_cast<double>(w)))) continue;
      ++out.checked;
      try {
        if (exact) {
          auto f = flattenExact(v, psi, rho);
          if (f && *f == *n) continue;
          os << "symbolic " << (f ? printRational(*f) : std::string("?")) << " != exact " << printRational(*n);
        } else {
          double f = static_cast<double>(flattenWide(v, psi, rho));
          if (closeEnough(static_cast<double>(w), f)) continue;
          os << "symbolic " << f << " != numeric " << static_cast<double>(w);
        }
      } catch (const EvalError& err) {
        os << "symbolic value undefined (" << err.what() << ")";
      }
      os << " at";
      for (auto& [k, x] : rho) os << " " << k << "=" << x;
      os << " for value " << printValue(v);
      out.failure = os.str();
      return out;
    }
    return out;
  }
  std::vector<RewriteStep> steps;
  auto err = traceOf(sigma, e, steps);
  out.steps = static_cast<long>(steps.size());
  if (err) {
    out.failure = *err;
    return out;
  }
  switch (p) {
    case Property::Type:
      for (auto& s : steps) {
        auto te = typeError(gamma, sigma, s.after);
        if (te) {
          out.failure = "ill-typed after " + at(s) + ": " + te->what();
          return out;
        }
        EinType t1 = inferType(gamma, sigma, s.after);
        if (!(t1 == t0)) {
          out.failure = "type " + printType(t0) + " became " + printType(t1) + " after " + at(s);
          return out;
        }
      }
      break;
    case Property::Descent: {
      BigInt s0 = size(e);
      for (auto& s : steps) {
        BigInt b = size(s.before), a = size(s.after);
        if (!(a < b)) {
          out.failure = "size " + b.get_str() + " -> " + a.get_str() + " after " + at(s);
          return out;
        }
      }
      if (BigInt(static_cast<long>(steps.size())) > s0 - 1) {
        out.failure = std::to_string(steps.size()) + " steps exceed size(initial)-1 = " + BigInt(s0 - 1).get_str();
        return out;
      }
      break;
    }
    case Property::NfEquiv: {
      std::vector<Expr> states{e};
      for (auto& s : steps) states.push_back(s.after);
      for (auto& st : states) {
        bool term = isTerminal(gamma, sigma, st);
        NfVerdict v = isNormalForm(gamma, sigma, st);
        if (term != v.inNormalForm) {
          std::string why;
          if (!v.violations.empty())
            why = ", violation " + v.violations[0].production + " at " + pathString(v.violations[0].path) + " (" +
                  v.violations[0].detail + ")";
          out.failure = std::string("terminal=") + (term ? "yes" : "no") + " but normal form=" +
                        (v.inNormalForm ? "yes" : "no") + " for " + print(st) + why;
          return out;
        }
      }
      break;
    }
    case Property::Value:
      for (auto& s : steps) {
        ValueCheck c = checkValuePreservation(gamma, sigma, s, psi);
        if (c.skipped) {
          ++out.skipped;
          continue;
        }
        ++out.checked;
        if (!c.ok) {
          out.failure = "value changed by " + at(s) + " -> " + print(s.after) + ": " + c.detail;
          return out;
        }
      }
      break;
    default:
      break;
  }
  return out;
}

Expr pathWalk(const Expr& e, const Path& p, IndexCtx& ctx) {
  Expr cur = e;
  for (int k : p) {
    ctx = childContext(ctx, cur, k);
    cur = cur->kids[static_cast<size_t>(k)];
  }
  return cur;
}

void allPaths(const Expr& e, Path& p, std::vector<Path>& out) {
  for (size_t k = 0; k < e->kids.size(); ++k) {
    p.push_back(static_cast<int>(k));
    out.push_back(p);
    allPaths(e->kids[k], p, out);
    p.pop_back();
  }
}

}  // namespace

CaseOutcome checkProperty(Property p, const IndexCtx& sigma, const Expr& e, const DataEnv& psi) {
  try {
    return checkImpl(p, sigma, e, psi);
  } catch (const std::exception& err) {
    CaseOutcome out;
    out.failure = std::string("unexpected error: ") + err.what();
    return out;
  }
}

std::pair<Expr, IndexCtx> shrink(Property p, const IndexCtx& sigma, const Expr& e, const DataEnv& psi) {
  Expr cur = e;
  IndexCtx ctx = sigma;
  for (int round = 0; round < 200; ++round) {
    std::vector<Path> paths;
    Path tmp;
    allPaths(cur, tmp, paths);
    std::sort(paths.begin(), paths.end(), [](const Path& a, const Path& b) { return a.size() > b.size(); });
    bool progress = false;
    for (auto& path : paths) {
      IndexCtx local = ctx;
      Expr cand = pathWalk(cur, path, local);
      if (!wellTyped(standardGamma(), local, cand)) continue;
      if (checkProperty(p, local, cand, psi).failure) {
        cur = cand;
        ctx = local;
        progress = true;
        break;
      }
    }
    if (!progress) break;
  }
  return {cur, ctx};
}

PropertyReport runSuite(Property p, const GenConfig& cfg, long cases, bool parallel) {
  validateConfig(cfg);
  auto t0 = std::chrono::steady_clock::now();
  PropertyReport r;
  r.property = propertyName(p);
  r.cases = cases;
  std::vector<CaseOutcome> outs(static_cast<size_t>(cases));
  std::vector<GenCase> gens(static_cast<size_t>(cases));
  auto one = [&](long k) {
    auto idx = static_cast<std::uint64_t>(k);
    try {
      gens[k] = genCase(cfg, idx);
    } catch (const std::exception& err) {
      outs[k].failure = std::string("generation failed: ") + err.what();
      return;
    }
    DataEnv psi = genData(standardGamma(), caseSeed(cfg.seed, idx) ^ 0x5bd1e995ULL);
    outs[k] = checkProperty(p, gens[k].sigma, gens[k].expr, psi);
  };
  if (parallel) {
#pragma omp parallel for schedule(dynamic)
    for (long k = 0; k < cases; ++k) one(k);
  } else {
    for (long k = 0; k < cases; ++k) one(k);
  }
  for (long k = 0; k < cases; ++k) {
    r.steps += outs[k].steps;
    r.checked += outs[k].checked;
    r.skipped += outs[k].skipped;
    if (!outs[k].failure) continue;
    Failure f;
    f.caseIndex = static_cast<std::uint64_t>(k);
    f.original = gens[k].expr;
    f.sigma = gens[k].sigma;
    f.diagnosis = *outs[k].failure;
    if (f.original) {
      DataEnv psi = genData(standardGamma(), caseSeed(cfg.seed, f.caseIndex) ^ 0x5bd1e995ULL);
      std::tie(f.shrunk, f.shrunkSigma) = shrink(p, f.sigma, f.original, psi);
      auto again = checkProperty(p, f.shrunkSigma, f.shrunk, psi);
      if (again.failure) f.diagnosis = *again.failure;
      try {
        f.trace = traceToDocument(normalize(standardGamma(), f.shrunkSigma, f.shrunk));
      } catch (const std::exception&) {
        f.trace = nullptr;
      }
    }
    r.failures.push_back(std::move(f));
  }
  r.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

Json reportToDocument(const PropertyReport& r) {
  Json d;
  d["property"] = r.property;
  d["cases"] = r.cases;
  d["steps"] = r.steps;
  d["checked"] = r.checked;
  d["skipped"] = r.skipped;
  d["elapsed"] = r.elapsed;
  Json fs = Json::array();
  for (auto& f : r.failures) {
    Json j;
    j["case"] = f.caseIndex;
    j["diagnosis"] = f.diagnosis;
    if (f.original) {
      j["original"] = print(f.original);
      j["shrunk"] = print(f.shrunk);
      j["sigma"] = printEnv({{}, f.shrunkSigma});
      j["trace"] = f.trace;
    }
    fs.push_back(j);
  }
  d["failures"] = fs;
  return d;
}

std::string reportSummary(const PropertyReport& r) {
  std::ostringstream os;
  os.precision(3);
  os << r.property << ": " << r.cases << " cases, " << r.steps << " steps";
  if (r.property == "value" || r.property == "symbolic") os << ", " << r.checked << " checked, " << r.skipped << " skipped";
  os << ", " << r.failures.size() << " failures (" << r.elapsed << "s)\n";
  for (auto& f : r.failures) {
    os << "  case " << f.caseIndex << ": " << f.diagnosis << "\n";
    if (f.shrunk) os << "    shrunk: " << print(f.shrunk) << "  [" << printEnv({{}, f.shrunkSigma}) << "]\n";
  }
  return os.str();
}

// ---- exhaustive enumeration ----

std::vector<Signature> enumerationSignatures() {
  auto I = IndexTerm::v;
  std::vector<Signature> out;
  {
    Signature s;
    s.name = "algebra";
    s.sigma = IndexCtx{{"i", 3}, {"j", 3}};
    s.leaves = {cst(0), cst(1), ten("S"), ten("A3", {I("j")}), delta(I("i"), I("j"))};
    s.unaries = {[](const Expr& e) { return neg(e); }, [](const Expr& e) { return unary(Op::Sqrt, e); }};
    s.binaries = {[](const Expr& a, const Expr& b) { return add(a, b); },
                  [](const Expr& a, const Expr& b) { return mul(a, b); },
                  [](const Expr& a, const Expr& b) { return div(a, b); }};
    out.push_back(s);
  }
  {
    Signature s;
    s.name = "sums";
    s.sigma = IndexCtx{{"j", 3}, {"k", 3}, {"l", 3}, {"m", 3}};
    s.leaves = {eps({I("i"), I("j"), I("k")}), eps({I("i"), I("l"), I("m")}), delta(I("j"), I("l")),
                ten("A3", {I("i")}), cst(1)};
    s.unaries = {[](const Expr& e) { return sum("i", 3, e); }, [](const Expr& e) { return neg(e); }};
    s.binaries = {[](const Expr& a, const Expr& b) { return mul(a, b); },
                  [](const Expr& a, const Expr& b) { return sub(a, b); }};
    out.push_back(s);
  }
  {
    Signature s;
    s.name = "fields";
    s.sigma = IndexCtx{{"i", 3}, {"j", 3}};
    s.leaves = {fld("F3"), fld("G3", {I("j")}), ten("S"), cst(0)};
    s.unaries = {[I](const Expr& e) { return partial({I("i")}, e); },
                 [](const Expr& e) { return probe(e, ten("X3")); },
                 [](const Expr& e) { return lift(3, e); },
                 [](const Expr& e) { return neg(e); }};
    s.binaries = {[](const Expr& a, const Expr& b) { return mul(a, b); },
                  [](const Expr& a, const Expr& b) { return add(a, b); }};
    out.push_back(s);
  }
  return out;
}

namespace {

struct EnumCounts {
  long candidates = 0, wellTyped = 0, normalForms = 0, disagreements = 0;
};

void checkBatch(const Signature& sig, const std::vector<Expr>& batch, bool parallel, EnumCounts& c,
                std::vector<std::string>& examples) {
  const TypeEnv& gamma = standardGamma();
  long n = static_cast<long>(batch.size());
  std::vector<signed char> res(batch.size(), -1);  // -1 ill-typed, 0 agree non-nf, 1 agree nf, 2 disagree
  auto one = [&](long k) {
    const Expr& e = batch[k];
    if (!wellTyped(gamma, sig.sigma, e)) return;
    bool term = isTerminal(gamma, sig.sigma, e);
    bool nf = isNormalForm(gamma, sig.sigma, e).inNormalForm;
    res[k] = term != nf ? 2 : (nf ? 1 : 0);
  };
  if (parallel) {
#pragma omp parallel for schedule(dynamic, 256)
    for (long k = 0; k < n; ++k) one(k);
  } else {
    for (long k = 0; k < n; ++k) one(k);
  }
  c.candidates += n;
  for (long k = 0; k < n; ++k) {
    if (res[k] < 0) continue;
    ++c.wellTyped;
    if (res[k] == 1) ++c.normalForms;
    if (res[k] == 2) {
      ++c.disagreements;
      if (examples.size() < 10) examples.push_back(print(batch[k]));
    }
  }
}

}  // namespace

EnumReport enumerateNfEquiv(const Signature& sig, int maxNodes, bool parallel) {
  // unary overhead in nodes
  std::vector<int> cost;
  for (auto& u : sig.unaries) cost.push_back(static_cast<int>(nodeCount(u(cst(1)))) - 1);
  std::vector<std::vector<Expr>> by(static_cast<size_t>(maxNodes) + 1);
  EnumCounts c;
  std::vector<std::string> examples;
  const size_t kBatch = 1 << 16;
  for (int n = 1; n <= maxNodes; ++n) {
    bool keep = n < maxNodes;
    std::vector<Expr> batch;
    auto emit = [&](Expr e) {
      if (keep) by[n].push_back(e);
      batch.push_back(std::move(e));
      if (batch.size() >= kBatch) {
        checkBatch(sig, batch, parallel, c, examples);
        batch.clear();
      }
    };
    for (auto& l : sig.leaves)
      if (static_cast<int>(nodeCount(l)) == n) emit(l);
    for (size_t u = 0; u < sig.unaries.size(); ++u) {
      int k = n - 1 - cost[u];
      if (k < 1) continue;
      for (auto& e : by[k]) emit(sig.unaries[u](e));
    }
    for (auto& b : sig.binaries)
      for (int a = 1; a < n - 1; ++a)
        for (auto& x : by[a])
          for (auto& y : by[n - 1 - a]) emit(b(x, y));
    checkBatch(sig, batch, parallel, c, examples);
  }
  EnumReport r;
  r.signature = sig.name;
  r.candidates = c.candidates;
  r.wellTyped = c.wellTyped;
  r.normalForms = c.normalForms;
  r.disagreements = c.disagreements;
  r.examples = examples;
  return r;
}

// ---- non-confluence ----

std::vector<std::pair<IndexCtx, Expr>> tripleEpsCorpus() {
  auto I = IndexTerm::v;
  auto E = [&](const char* a, const char* b, const char* c) { return eps({I(a), I(b), I(c)}); };
  IndexCtx s7{{"i", 3}, {"j", 3}, {"k", 3}, {"l", 3}, {"m", 3}, {"p", 3}, {"q", 3}};
  std::vector<std::pair<IndexCtx, Expr>> out;
  out.push_back({s7, mul(mul(E("i", "j", "k"), E("i", "l", "m")), E("m", "p", "q"))});
  out.push_back({s7, mul(E("i", "j", "k"), mul(E("i", "l", "m"), E("m", "p", "q")))});
  out.push_back({s7, mul(mul(E("j", "k", "i"), E("l", "i", "m")), E("p", "q", "m"))});
  out.push_back({s7, mul(mul(E("i", "j", "k"), E("k", "l", "m")), E("m", "p", "q"))});
  return out;
}

ConfluenceWitness findNonConfluence(const IndexCtx& sigma, const Expr& e, const DataEnv& psi) {
  ConfluenceWitness w;
  w.sigma = sigma;
  w.original = e;
  const TypeEnv& gamma = standardGamma();
  w.first = normalize(gamma, sigma, e);
  w.second = normalize(gamma, sigma, e, Strategy{true, true});
  w.found = !equal(w.first.final, w.second.final);
  auto contracted = [](const RewriteTrace& t) {
    std::set<std::string> s;
    for (auto& st : t.steps)
      if (st.contracted) s.insert(*st.contracted);
    return s;
  };
  auto ca = contracted(w.first), cb = contracted(w.second);
  std::set<std::string> all = ca;
  all.insert(cb.begin(), cb.end());
  IndexCtx outer;
  std::vector<std::pair<std::string, int>> sumAll, sumA, sumB;
  for (auto& [v, b] : sigma.entries()) {
    if (!all.count(v)) {
      outer.push(v, b);
      continue;
    }
    sumAll.push_back({v, b});
    if (!ca.count(v)) sumA.push_back({v, b});
    if (!cb.count(v)) sumB.push_back({v, b});
  }
  ValueCheck x = compareValues(outer, e, sumAll, w.first.final, sumA, psi);
  ValueCheck y = compareValues(outer, e, sumAll, w.second.final, sumB, psi);
  ValueCheck z = compareValues(outer, w.first.final, sumA, w.second.final, sumB, psi);
  w.valuesAgree = x.ok && y.ok && z.ok && !x.skipped;
  w.detail = "first: " + print(w.first.final) + "\nsecond: " + print(w.second.final);
  if (!x.ok) w.detail += "\noriginal vs first: " + x.detail;
  if (!y.ok) w.detail += "\noriginal vs second: " + y.detail;
  if (!z.ok) w.detail += "\nfirst vs second: " + z.detail;
  return w;
}

}  // namespace ein
