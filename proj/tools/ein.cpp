#include <CLI11.hpp>

#include <iostream>
#include <sstream>

#include "ein/analysis.hpp"
#include "ein/document.hpp"
#include "ein/harness.hpp"
#include "ein/rewrite.hpp"
#include "ein/syntax.hpp"
#include "ein/typecheck.hpp"
#include "ein/value.hpp"

using namespace ein;

namespace {

struct UserError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string input = "-";
  std::string expr;
  std::string envPath;
  std::string dataPath;
  std::string format = "text";
  bool trace = false;
  std::uint64_t seed = 1;
  long cases = 1000;
  int maxDepth = 6;
  bool parallel = false;
  bool noFields = false;
  std::string property;
};

bool structured(const Options& o) { return o.format == "structured"; }

Env loadEnv(const Options& o, bool required) {
  if (o.envPath.empty()) {
    if (required) throw UserError("--env is required for this command");
    return {};
  }
  Env env = parseEnv(readInput(o.envPath));
  checkEnvOk(env.gamma, env.sigma);
  return env;
}

Expr loadExpr(const Options& o, const Env& env) {
  std::string text = o.expr.empty() ? readInput(o.input) : o.expr;
  return parse(text, &env.gamma);
}

Json errorDoc(const TypeError& e) {
  Json d;
  d["ok"] = false;
  d["error"] = typeErrorName(e.code);
  d["path"] = pathString(e.path);
  d["message"] = e.message;
  return d;
}

int cmdCheck(const Options& o) {
  Env env = loadEnv(o, true);
  Expr e = loadExpr(o, env);
  try {
    EinType t = inferType(env.gamma, env.sigma, e);
    if (structured(o)) {
      Json d;
      d["ok"] = true;
      d["type"] = printType(t);
      d["expr"] = toDocument(e);
      std::cout << d.dump(2) << "\n";
    } else {
      std::cout << print(e) << " : " << printType(t) << "\n";
    }
    return 0;
  } catch (const TypeError& err) {
    if (structured(o)) std::cout << errorDoc(err).dump(2) << "\n";
    else std::cout << "type error " << typeErrorName(err.code) << " at " << pathString(err.path) << ": " << err.message << "\n";
    return 1;
  }
}

int cmdNormalize(const Options& o) {
  Env env = loadEnv(o, true);
  Expr e = loadExpr(o, env);
  inferType(env.gamma, env.sigma, e);
  RewriteTrace t = normalize(env.gamma, env.sigma, e);
  if (structured(o)) {
    Json d;
    d["final"] = toDocument(t.final);
    d["text"] = print(t.final);
    d["steps"] = t.steps.size();
    if (o.trace) d["trace"] = traceToDocument(t);
    std::cout << d.dump(2) << "\n";
    return 0;
  }
  if (o.trace) {
    for (size_t k = 0; k < t.steps.size(); ++k) {
      const auto& s = t.steps[k];
      const RuleInfo& info = ruleInfo(s.rule);
      std::cout << k + 1 << ". " << info.id.name();
      if (info.id.alias) std::cout << " (" << info.id.alias << ")";
      std::cout << " at " << pathString(s.path) << ": " << print(s.redexBefore) << " => " << print(s.redexAfter)
                << "   [size " << s.sizeBefore.get_str() << " -> " << s.sizeAfter.get_str() << "]\n";
    }
    std::cout << t.steps.size() << " step" << (t.steps.size() == 1 ? "" : "s") << "\n";
  }
  std::cout << print(t.final) << "\n";
  return 0;
}

std::string showAssignment(const Assignment& rho, const IndexCtx& sigma) {
  std::string s;
  for (auto& [v, b] : sigma.entries()) s += (s.empty() ? "" : ",") + v + "=" + std::to_string(rho.at(v));
  return s;
}

int cmdEval(const Options& o) {
  Env env = loadEnv(o, true);
  if (o.dataPath.empty()) throw UserError("--data is required for eval");
  DataEnv psi = parseData(readInput(o.dataPath));
  Expr e = loadExpr(o, env);
  inferType(env.gamma, env.sigma, e);
  auto rhos = assignments(env.sigma);
  bool exact = isAlgebraic(e);
  Json values = Json::array();
  std::ostringstream text;
  text.precision(17);
  for (auto& rho : rhos) {
    std::string v;
    if (exact) {
      Rational q = *evalExact(psi, rho, e);
      q.canonicalize();
      v = q.get_str();
      values.push_back(v);
    } else {
      double d = evalNumeric(psi, rho, e);
      std::ostringstream os;
      os.precision(17);
      os << d;
      v = os.str();
      values.push_back(d);
    }
    if (env.sigma.empty()) text << v << "\n";
    else text << showAssignment(rho, env.sigma) << ": " << v << "\n";
  }
  if (structured(o)) {
    Json d;
    Json shape = Json::array();
    for (auto& [v, b] : env.sigma.entries()) shape.push_back(b);
    d["shape"] = shape;
    d["exact"] = exact;
    d["values"] = values;
    try {
      d["symbolic"] = printValue(evalSymbolic(&psi, e));
    } catch (const EvalError&) {
      d["symbolic"] = nullptr;
    }
    std::cout << d.dump(2) << "\n";
  } else {
    std::cout << text.str();
  }
  return 0;
}

int cmdSize(const Options& o) {
  Env env = loadEnv(o, false);
  Expr e = loadExpr(o, env);
  BigInt s = size(e);
  if (structured(o)) {
    Json d;
    d["size"] = s.get_str();
    std::cout << d.dump(2) << "\n";
  } else {
    std::cout << s.get_str() << "\n";
  }
  return 0;
}

int cmdNf(const Options& o) {
  Env env = loadEnv(o, true);
  Expr e = loadExpr(o, env);
  inferType(env.gamma, env.sigma, e);
  NfVerdict v = isNormalForm(env.gamma, env.sigma, e);
  if (structured(o)) {
    std::cout << verdictToDocument(v).dump(2) << "\n";
    return 0;
  }
  std::cout << (v.inNormalForm ? "normal form" : "not in normal form") << "\n";
  for (auto& x : v.violations)
    std::cout << "  violation " << x.production << " at " << pathString(x.path) << ": " << x.detail << "\n";
  for (auto& x : v.gaps) std::cout << "  gap " << x.production << " at " << pathString(x.path) << ": " << x.detail << "\n";
  return 0;
}

int cmdFuzz(const Options& o) {
  Property p;
  try {
    p = propertyFromName(o.property);
  } catch (const std::invalid_argument& err) {
    throw UserError(err.what());
  }
  GenConfig cfg;
  cfg.seed = o.seed;
  cfg.maxDepth = o.maxDepth;
  cfg.fieldTerms = !o.noFields;
  try {
    validateConfig(cfg);
  } catch (const std::invalid_argument& err) {
    throw UserError(err.what());
  }
  PropertyReport r = runSuite(p, cfg, o.cases, o.parallel);
  if (structured(o)) std::cout << reportToDocument(r).dump(2) << "\n";
  else std::cout << reportSummary(r);
  return r.failures.empty() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ein: typecheck, normalize and evaluate tensor-calculus IR expressions"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* c, bool env) {
    c->add_option("input", o.input, "expression file, '-' for stdin")->capture_default_str();
    c->add_option("-e,--expr", o.expr, "expression text instead of a file");
    if (env) c->add_option("--env", o.envPath, "environment declarations");
    c->add_option("--format", o.format, "text or structured")->check(CLI::IsMember({"text", "structured"}));
  };

  auto* check = app.add_subcommand("check", "report the type of an expression");
  common(check, true);
  auto* norm = app.add_subcommand("normalize", "rewrite to normal form");
  common(norm, true);
  norm->add_flag("--trace", o.trace, "print every rewrite step");
  auto* eval = app.add_subcommand("eval", "evaluate numerically over every index assignment");
  common(eval, true);
  eval->add_option("--data", o.dataPath, "tensor data file");
  auto* sz = app.add_subcommand("size", "size metric");
  common(sz, true);
  auto* nf = app.add_subcommand("nf", "normal-form verdict");
  common(nf, true);
  auto* fuzz = app.add_subcommand("fuzz", "run a property suite on generated expressions");
  fuzz->add_option("property", o.property, "type, value, descent, nf-equiv or symbolic")->required();
  fuzz->add_option("--seed", o.seed, "generator seed")->capture_default_str();
  fuzz->add_option("--cases", o.cases, "number of cases")->capture_default_str();
  fuzz->add_option("--max-depth", o.maxDepth, "expression depth")->capture_default_str();
  fuzz->add_flag("--parallel", o.parallel, "run cases on all threads");
  fuzz->add_flag("--no-fields", o.noFields, "generate field-free expressions only");
  fuzz->add_option("--format", o.format, "text or structured")->check(CLI::IsMember({"text", "structured"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*check) return cmdCheck(o);
    if (*norm) return cmdNormalize(o);
    if (*eval) return cmdEval(o);
    if (*sz) return cmdSize(o);
    if (*nf) return cmdNf(o);
    return cmdFuzz(o);
  } catch (const ParseError& e) {
    std::cerr << "parse error at " << e.line << ":" << e.col << ": " << e.what() << "\n";
  } catch (const TypeError& e) {
    std::cerr << "type error " << typeErrorName(e.code) << " at " << pathString(e.path) << ": " << e.message << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
  }
  return 1;
}
