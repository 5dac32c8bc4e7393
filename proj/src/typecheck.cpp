#include "ein/typecheck.hpp"

#include <set>

#include "ein/document.hpp"
#include "ein/syntax.hpp"

namespace ein {

const char* typeErrorName(TypeErrorCode c) {
  switch (c) {
    case TypeErrorCode::UnboundParam:
      return "UnboundParam";
    case TypeErrorCode::UnboundIndex:
      return "UnboundIndex";
    case TypeErrorCode::ArityMismatch:
      return "ArityMismatch";
    case TypeErrorCode::BoundMismatch:
      return "BoundMismatch";
    case TypeErrorCode::DuplicateIndex:
      return "DuplicateIndex";
    case TypeErrorCode::KindMismatch:
      return "KindMismatch";
    case TypeErrorCode::DimMismatch:
      return "DimMismatch";
  }
  return "?";
}

TypeError::TypeError(TypeErrorCode code, Path path, const std::string& message)
    : std::runtime_error(std::string(typeErrorName(code)) + " at " + pathString(path) + ": " + message),
      code(code),
      path(std::move(path)),
      message(message) {}

std::string printType(const EinType& t) {
  std::string s = t.field ? "FLD_" + std::to_string(t.dim) : "TEN";
  s += "[";
  bool first = true;
  for (auto& [k, v] : t.shape.entries()) {
    if (!first) s += ",";
    first = false;
    s += k + ":" + std::to_string(v);
  }
  return s + "]";
}

void checkEnvOk(const TypeEnv&, const IndexCtx& sigma) {
  // TypeEnv is a map, so parameter keys are unique by construction.
  std::set<std::string> seen;
  for (auto& [k, v] : sigma.entries()) {
    if (!seen.insert(k).second)
      throw TypeError(TypeErrorCode::DuplicateIndex, {}, "index variable '" + k + "' repeats in the context");
    if (v < 1) throw TypeError(TypeErrorCode::BoundMismatch, {}, "index '" + k + "' has an empty range");
  }
}

void checkMultiIndex(const IndexCtx& sigma, const MultiIndex& alpha, const std::vector<int>& dims, const Path& path) {
  for (size_t k = 0; k < alpha.size(); ++k) {
    const IndexTerm& t = alpha[k];
    if (t.isVar()) {
      auto b = sigma.bound(t.var);
      if (!b) throw TypeError(TypeErrorCode::UnboundIndex, path, "index '" + t.var + "' is not in the context");
      if (*b != dims[k])
        throw TypeError(TypeErrorCode::BoundMismatch, path,
                        "index '" + t.var + "' ranges over " + std::to_string(*b) + " but position " +
                            std::to_string(k) + " has extent " + std::to_string(dims[k]));
    } else if (t.value < 1 || t.value > dims[k]) {
      throw TypeError(TypeErrorCode::BoundMismatch, path,
                      "constant index " + std::to_string(t.value) + " outside 1.." + std::to_string(dims[k]));
    }
  }
}

static std::set<std::string> varsOf(const MultiIndex& m) {
  std::set<std::string> s;
  for (auto& t : m)
    if (t.isVar()) s.insert(t.var);
  return s;
}

static const Expr& deltaOf(const Expr& head) { return head->op == Op::Delta ? head : head->kids[0]; }

IndexCtx childContext(const IndexCtx& sigma, const Expr& e, int k) {
  switch (e->op) {
    case Op::Sum:
      return sigma.with(e->name, e->n);
    case Op::Partial: {
      IndexCtx out = sigma;
      for (auto& t : e->alpha)
        if (t.isVar()) out = out.without(t.var);
      return out;
    }
    case Op::Mul:
      if (k == 1 && isDeltaApplication(e)) {
        const Expr& d = deltaOf(e->kids[0]);
        const IndexTerm& i = d->alpha[0];
        const IndexTerm& j = d->alpha[1];
        int n = 0;
        if (i.isVar()) {
          auto b = sigma.bound(i.var);
          if (!b) return sigma;
          n = *b;
          return sigma.without(i.var).with(j.var, n);
        }
        return sigma;
      }
      return sigma;
    default:
      return sigma;
  }
}

std::set<std::string> indexSupport(const Expr& e) {
  switch (e->op) {
    case Op::Const:
      return {};
    case Op::Tensor:
    case Op::Field:
    case Op::Delta:
    case Op::Eps:
      return varsOf(e->alpha);
    case Op::Conv: {
      auto s = varsOf(e->alpha);
      auto b = varsOf(e->beta);
      s.insert(b.begin(), b.end());
      return s;
    }
    case Op::Sum: {
      auto s = indexSupport(e->kids[0]);
      s.erase(e->name);
      return s;
    }
    case Op::Partial: {
      auto s = indexSupport(e->kids[0]);
      auto nu = varsOf(e->alpha);
      s.insert(nu.begin(), nu.end());
      return s;
    }
    case Op::Probe:
      return indexSupport(e->kids[0]);
    default:
      break;
  }
  if (isDeltaApplication(e)) {
    const Expr& d = deltaOf(e->kids[0]);
    auto s = indexSupport(e->kids[1]);
    s.erase(d->alpha[1].var);
    if (d->alpha[0].isVar()) s.insert(d->alpha[0].var);
    return s;
  }
  std::set<std::string> s;
  for (auto& k : e->kids) {
    auto c = indexSupport(k);
    s.insert(c.begin(), c.end());
  }
  return s;
}

bool isScalar(const Expr& e) { return indexSupport(e).empty(); }

namespace {

class Checker {
 public:
  explicit Checker(const TypeEnv& gamma) : gamma_(gamma) {}

  EinType infer(const IndexCtx& sigma, const Expr& e, Path& path) {
    switch (e->op) {
      case Op::Const:
        return {false, 0, sigma};
      case Op::Tensor:
      case Op::Field: {
        const SurfaceType& t = param(e->name, path);
        bool wantField = e->op == Op::Field;
        if (t.kind != (wantField ? ParamKind::Fld : ParamKind::Ten))
          throw TypeError(TypeErrorCode::KindMismatch, path,
                          "'" + e->name + "' is declared " + printSurfaceType(t) + ", used as a " +
                              (wantField ? "field" : "tensor"));
        arity(e->alpha, t.shape, e->name, path);
        checkMultiIndex(sigma, e->alpha, t.shape, path);
        return {wantField, wantField ? t.dim : 0, sigma};
      }
      case Op::Conv: {
        const SurfaceType& v = param(e->name, path);
        if (v.kind != ParamKind::Img)
          throw TypeError(TypeErrorCode::KindMismatch, path, "'" + e->name + "' is not an image");
        const SurfaceType& h = param(e->kernel, path);
        if (h.kind != ParamKind::Krn)
          throw TypeError(TypeErrorCode::KindMismatch, path, "'" + e->kernel + "' is not a kernel");
        arity(e->alpha, v.shape, e->name, path);
        checkMultiIndex(sigma, e->alpha, v.shape, path);
        checkMultiIndex(sigma, e->beta, std::vector<int>(e->beta.size(), v.dim), path);
        return {true, v.dim, sigma};
      }
      case Op::Delta:
        checkDelta(sigma, e, path);
        return {false, 0, sigma};
      case Op::Eps: {
        int n = static_cast<int>(e->alpha.size());
        checkMultiIndex(sigma, e->alpha, std::vector<int>(e->alpha.size(), n), path);
        return {false, 0, sigma};
      }
      case Op::Sum: {
        if (sigma.contains(e->name))
          throw TypeError(TypeErrorCode::DuplicateIndex, path, "summation index '" + e->name + "' already in scope");
        EinType body = child(sigma, e, 0, path);
        return {body.field, body.dim, sigma};
      }
      case Op::Partial: {
        std::set<std::string> seen;
        std::optional<int> d;
        for (auto& t : e->alpha) {
          if (!t.isVar()) throw TypeError(TypeErrorCode::UnboundIndex, path, "derivative indices must be variables");
          if (!seen.insert(t.var).second)
            throw TypeError(TypeErrorCode::DuplicateIndex, path, "derivative index '" + t.var + "' repeats");
          auto b = sigma.bound(t.var);
          if (!b) throw TypeError(TypeErrorCode::UnboundIndex, path, "index '" + t.var + "' is not in the context");
          if (d && *d != *b) throw TypeError(TypeErrorCode::BoundMismatch, path, "derivative indices range differently");
          d = *b;
        }
        EinType body = child(sigma, e, 0, path);
        if (!body.field) throw TypeError(TypeErrorCode::KindMismatch, path, "only fields can be differentiated");
        if (body.dim != *d)
          throw TypeError(TypeErrorCode::DimMismatch, path,
                          "derivative index ranges over " + std::to_string(*d) + " but the field is " +
                              std::to_string(body.dim) + "-d");
        return {true, body.dim, sigma};
      }
      case Op::Probe: {
        int d = point(e->kids[1], path, 1);
        const Expr& f = e->kids[0];
        if (f->op == Op::Delta || f->op == Op::Eps) return child(sigma, e, 0, path);
        EinType ft = child(sigma, e, 0, path);
        if (!ft.field) throw TypeError(TypeErrorCode::KindMismatch, path, "probe of a tensor expression");
        if (ft.dim != d)
          throw TypeError(TypeErrorCode::DimMismatch, path,
                          "probing a " + std::to_string(ft.dim) + "-d field at a " + std::to_string(d) + "-vector");
        return {false, 0, sigma};
      }
      case Op::Lift: {
        EinType b = child(sigma, e, 0, path);
        if (b.field) throw TypeError(TypeErrorCode::KindMismatch, path, "lift of a field");
        return {true, e->n, sigma};
      }
      case Op::Add:
      case Op::Sub:
        return same(sigma, e, path);
      case Op::Mul:
        if (isDeltaApplication(e)) {
          const Expr& head = e->kids[0];
          if (head->op == Op::Probe) point(head->kids[1], path, 0);
          const IndexTerm& i = deltaOf(head)->alpha[0];
          if (!i.isVar() || !sigma.contains(i.var))
            throw TypeError(TypeErrorCode::UnboundIndex, path, "delta index '" + printIndex(i) + "' is not in the context");
          EinType r = child(sigma, e, 1, path);
          return {r.field, r.dim, sigma};
        }
        if (isEpsHead(e->kids[0])) {
          child(sigma, e, 0, path);
          EinType r = child(sigma, e, 1, path);
          return {r.field, r.dim, sigma};
        }
        return same(sigma, e, path);
      case Op::Div: {
        EinType t = same(sigma, e, path);
        if (!isScalar(e->kids[1])) {
          path.push_back(1);
          TypeError err(TypeErrorCode::DimMismatch, path, "denominator must be scalar");
          path.pop_back();
          throw err;
        }
        return t;
      }
      case Op::Neg:
        return child(sigma, e, 0, path);
      default: {
        EinType t = child(sigma, e, 0, path);
        if (!isScalar(e->kids[0])) {
          path.push_back(0);
          TypeError err(TypeErrorCode::DimMismatch, path, std::string("operand of ") + opName(e->op) + " must be scalar");
          path.pop_back();
          throw err;
        }
        return t;
      }
    }
  }

 private:
  const TypeEnv& gamma_;

  EinType child(const IndexCtx& sigma, const Expr& e, int k, Path& path) {
    path.push_back(k);
    EinType t = infer(childContext(sigma, e, k), e->kids[k], path);
    path.pop_back();
    return t;
  }

  const SurfaceType& param(const std::string& name, const Path& path) {
    auto it = gamma_.find(name);
    if (it == gamma_.end()) throw TypeError(TypeErrorCode::UnboundParam, path, "'" + name + "' is not declared");
    return it->second;
  }

  static void arity(const MultiIndex& a, const std::vector<int>& shape, const std::string& name, const Path& path) {
    if (a.size() != shape.size())
      throw TypeError(TypeErrorCode::ArityMismatch, path,
                      "'" + name + "' has order " + std::to_string(shape.size()) + " but " + std::to_string(a.size()) +
                          " indices were given");
  }

  int point(const Expr& x, Path& path, int k) {
    path.push_back(k);
    if (x->op != Op::Tensor || !x->alpha.empty()) {
      TypeError err(TypeErrorCode::KindMismatch, path, "probe point must be a tensor parameter x[]");
      path.pop_back();
      throw err;
    }
    const SurfaceType& t = param(x->name, path);
    if (t.kind != ParamKind::Ten || t.shape.size() != 1) {
      TypeError err(TypeErrorCode::KindMismatch, path, "probe point '" + x->name + "' must be a TEN[d] vector");
      path.pop_back();
      throw err;
    }
    path.pop_back();
    return t.shape[0];
  }

  void checkDelta(const IndexCtx& sigma, const Expr& e, const Path& path) {
    const IndexTerm& i = e->alpha[0];
    const IndexTerm& j = e->alpha[1];
    std::optional<int> bi, bj;
    for (auto* t : {&i, &j}) {
      if (!t->isVar()) continue;
      auto b = sigma.bound(t->var);
      if (!b) throw TypeError(TypeErrorCode::UnboundIndex, path, "index '" + t->var + "' is not in the context");
      (t == &i ? bi : bj) = *b;
    }
    if (bi && bj && *bi != *bj) throw TypeError(TypeErrorCode::BoundMismatch, path, "delta indices range differently");
    if (bi && !j.isVar() && j.value > *bi)
      throw TypeError(TypeErrorCode::BoundMismatch, path, "constant delta index out of range");
    if (bj && !i.isVar() && i.value > *bj)
      throw TypeError(TypeErrorCode::BoundMismatch, path, "constant delta index out of range");
  }

  EinType same(const IndexCtx& sigma, const Expr& e, Path& path) {
    EinType a = child(sigma, e, 0, path);
    EinType b = child(sigma, e, 1, path);
    if (a.field != b.field)
      throw TypeError(TypeErrorCode::KindMismatch, path,
                      std::string("operands of ") + opName(e->op) + " mix a tensor and a field");
    if (a.dim != b.dim)
      throw TypeError(TypeErrorCode::DimMismatch, path,
                      std::string("operands of ") + opName(e->op) + " are fields of different dimension");
    return a;
  }
};

}  // namespace

EinType inferType(const TypeEnv& gamma, const IndexCtx& sigma, const Expr& e) {
  checkEnvOk(gamma, sigma);
  Path path;
  return Checker(gamma).infer(sigma, e, path);
}

std::optional<TypeError> typeError(const TypeEnv& gamma, const IndexCtx& sigma, const Expr& e) {
  try {
    inferType(gamma, sigma, e);
    return std::nullopt;
  } catch (const TypeError& err) {
    return err;
  }
}

bool wellTyped(const TypeEnv& gamma, const IndexCtx& sigma, const Expr& e) { return !typeError(gamma, sigma, e); }

std::vector<SubtermTyping> invertType(const TypeEnv& gamma, const IndexCtx& sigma, const Expr& e, const EinType& tau) {
  std::vector<SubtermTyping> out;
  auto at = [&](int k, EinType t, bool scalar = false) {
    out.push_back({k, childContext(sigma, e, k), std::move(t), scalar});
  };
  EinType kindAt{tau.field, tau.dim, sigma};
  switch (e->op) {
    case Op::Sum:
      at(0, {tau.field, tau.dim, childContext(sigma, e, 0)});
      break;
    case Op::Partial:
      at(0, {true, tau.dim, childContext(sigma, e, 0)});
      break;
    case Op::Lift:
      at(0, {false, 0, sigma});
      break;
    case Op::Probe: {
      const Expr& f = e->kids[0];
      if (f->op == Op::Delta || f->op == Op::Eps) {
        at(0, tau);
      } else {
        const SurfaceType& x = gamma.at(e->kids[1]->name);
        at(0, {true, x.shape.at(0), sigma});
      }
      out.push_back({1, sigma, std::nullopt, false});
      break;
    }
    case Op::Neg:
      at(0, tau);
      break;
    case Op::Add:
    case Op::Sub:
      at(0, tau);
      at(1, tau);
      break;
    case Op::Mul:
      if (isDeltaApplication(e)) {
        at(1, {tau.field, tau.dim, childContext(sigma, e, 1)});
      } else if (isEpsHead(e->kids[0])) {
        at(0, {false, 0, sigma});
        at(1, tau);
      } else {
        at(0, tau);
        at(1, tau);
      }
      break;
    case Op::Div:
      at(0, tau);
      at(1, kindAt, true);
      break;
    default:
      if (isUnary(e->op)) at(0, tau, true);
      break;
  }
  return out;
}

}  // namespace ein
