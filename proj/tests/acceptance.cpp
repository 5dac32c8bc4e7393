// One line per acceptance criterion; exit status is the number of failures.
#include <chrono>
#include <fstream>
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

using Clock = std::chrono::steady_clock;

int failures = 0;

void report(int n, bool ok, const std::string& what) {
  std::cout << (ok ? "PASS" : "FAIL") << " " << n << " " << what << std::endl;
  if (!ok) ++failures;
}

double since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(double s) {
  std::ostringstream o;
  o.precision(3);
  o << s << "s";
  return o.str();
}

PropertyReport suite(Property p, long cases) {
  GenConfig cfg;
  cfg.seed = 1;
  cfg.maxDepth = 6;
  cfg.dims = {2, 3};
  return runSuite(p, cfg, cases, true);
}

std::string summary(const PropertyReport& r) {
  std::string s = std::to_string(r.cases) + " cases, " + std::to_string(r.steps) + " steps, " +
                  std::to_string(r.failures.size()) + " failures, " + fmt(r.elapsed);
  if (!r.failures.empty()) s += "; first: " + r.failures[0].diagnosis;
  return s;
}

int levi(int a, int b, int c) {
  if (a == b || b == c || a == c) return 0;
  int inv = (a > b) + (a > c) + (b > c);
  return inv % 2 ? -1 : 1;
}

int kron(int a, int b) { return a == b; }

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// same document the CLI writes for `normalize --trace --format structured`
std::string goldenDoc(const Env& env, const std::string& text) {
  Expr e = parse(text, &env.gamma);
  RewriteTrace t = normalize(env.gamma, env.sigma, e);
  Json d;
  d["final"] = toDocument(t.final);
  d["text"] = print(t.final);
  d["steps"] = t.steps.size();
  d["trace"] = traceToDocument(t);
  return d.dump(2) + "\n";
}

}  // namespace

int main(int argc, char** argv) {
  long cases = 10000;
  std::string golden = EIN_GOLDEN_DIR;
  if (argc > 1) cases = std::stol(argv[1]);

  {
    auto t = Clock::now();
    PropertyReport r = suite(Property::Type, cases);
    double el = since(t);
    report(1, r.failures.empty() && r.cases >= 10000 && el < 120, "type preservation: " + summary(r));
  }
  {
    PropertyReport r = suite(Property::Descent, cases);
    report(2, r.failures.empty() && r.cases >= 10000, "strict descent and step bound: " + summary(r));
  }
  {
    PropertyReport r = suite(Property::NfEquiv, cases);
    long dis = 0, typed = 0;
    std::string ex;
    for (auto& sig : enumerationSignatures()) {
      EnumReport e = enumerateNfEquiv(sig, 8, true);
      dis += e.disagreements;
      typed += e.wellTyped;
      if (!e.examples.empty() && ex.empty()) ex = "; e.g. " + e.examples[0];
    }
    report(3, r.failures.empty() && r.cases >= 10000 && dis == 0,
           "terminal <=> normal form: " + summary(r) + "; exhaustive <=8 nodes: " + std::to_string(typed) +
               " well-typed, " + std::to_string(dis) + " disagreements" + ex);
  }
  {
    PropertyReport r = suite(Property::Value, cases);
    GenConfig cfg;
    cfg.seed = 2;
    cfg.fieldTerms = false;
    PropertyReport ff = runSuite(Property::Value, cfg, cases, true);
    report(4, r.failures.empty() && r.checked > 0 && ff.failures.empty() && ff.skipped == 0,
           "value preservation: " + summary(r) + ", " + std::to_string(r.checked) + " checked, " +
               std::to_string(r.skipped) + " field steps skipped; field-free: " + summary(ff) + ", " +
               std::to_string(ff.checked) + " checked");
  }
  {
    IndexCtx sg{{"j", 3}, {"k", 3}, {"l", 3}, {"m", 3}};
    Expr lhs = parse("sum(i,1,3, eps(i,j,k) * eps(i,l,m))");
    Expr rhs = parse("delta(j,l) * delta(k,m) - delta(j,m) * delta(k,l)");
    DataEnv psi;
    int n = 0, bad = 0;
    for (auto& rho : assignments(sg)) {
      int j = rho.at("j"), k = rho.at("k"), l = rho.at("l"), m = rho.at("m");
      int want = 0;
      for (int i = 1; i <= 3; ++i) want += levi(i, j, k) * levi(i, l, m);
      auto a = evalExact(psi, rho, lhs), b = evalExact(psi, rho, rhs);
      if (!a || !b || *a != want || *b != want || want != kron(j, l) * kron(k, m) - kron(j, m) * kron(k, l)) ++bad;
      ++n;
    }
    // the rewrite itself must produce the same identity
    RewriteTrace t = normalize(TypeEnv{}, sg, lhs);
    bool viaRule = !t.steps.empty() && ruleInfo(t.steps[0].rule).id.name() == "A1" &&
                   print(t.steps[0].redexAfter) == print(rhs);
    report(5, n == 81 && bad == 0 && viaRule,
           "eps-eps identity: " + std::to_string(n) + " assignments, " + std::to_string(bad) + " mismatches");
  }
  {
    IndexCtx ij{{"i", 3}, {"j", 3}};
    // delta application performs the k contraction
    Expr chain = parse("delta(i,k) * delta(k,j)");
    DataEnv psi;
    int bad = 0;
    for (auto& rho : assignments(ij)) {
      int want = 0;
      for (int k = 1; k <= 3; ++k) want += kron(rho.at("i"), k) * kron(k, rho.at("j"));
      auto v = evalExact(psi, rho, chain);
      if (!v || *v != want || want != kron(rho.at("i"), rho.at("j"))) ++bad;
    }
    IndexTerm i = IndexTerm::v("i"), j = IndexTerm::v("j"), k = IndexTerm::v("k");
    auto tr = evalExact(psi, {}, parse("sum(i,1,3, delta(i,i))"));
    bool sym = printValue(sumValue("k", 3, mulValues(kronValue(i, k), kronValue(k, j)))) ==
                   printValue(kronValue(i, j)) &&
               printValue(evalSymbolic(nullptr, chain)) == printValue(kronValue(i, j)) &&
               printValue(evalSymbolic(nullptr, parse("sum(i,1,3, delta(i,i))"))) == "3";
    report(6, bad == 0 && tr && *tr == 3 && sym,
           "delta laws: chain over 9 assignments, " + std::to_string(bad) + " mismatches; trace = " +
               (tr ? printRational(*tr) : std::string("undefined")));
  }
  {
    auto t = Clock::now();
    MetricReport r = checkMetricLemmas(6);
    double el = since(t);
    report(7, r.ok && el < 1.0,
           "metric lemmas: " + std::to_string(r.checks) + " checks, " + std::to_string(r.failures.size()) +
               " failures, " + fmt(el) + (r.failures.empty() ? "" : "; first: " + r.failures[0]));
  }
  {
    DataEnv psi = genData(standardGamma(), 1);
    int found = 0;
    bool agree = true;
    std::string ex;
    for (auto& [sg, e] : tripleEpsCorpus()) {
      ConfluenceWitness w = findNonConfluence(sg, e, psi);
      if (!w.found) continue;
      ++found;
      agree = agree && w.valuesAgree;
      if (ex.empty()) ex = "; " + print(w.first.final) + " vs " + print(w.second.final);
    }
    report(8, found > 0 && agree, "non-confluence: " + std::to_string(found) + " witnesses, values " +
                                      (agree ? "agree" : "differ") + ex);
  }
  {
    Env env = parseEnv(slurp(golden + "/env.ein"));
    std::ifstream list(golden + "/cases.txt");
    std::string line;
    int n = 0, bad = 0;
    std::string first;
    while (std::getline(list, line)) {
      auto tab = line.find('\t');
      if (tab == std::string::npos) continue;
      std::string name = line.substr(0, tab), text = line.substr(tab + 1);
      std::string a = goldenDoc(env, text), b = goldenDoc(env, text);
      ++n;
      if (a != b || a != slurp(golden + "/" + name + ".json")) {
        ++bad;
        if (first.empty()) first = "; mismatch: " + name;
      }
    }
    report(9, n >= 7 && bad == 0,
           "golden traces: " + std::to_string(n) + " cases, " + std::to_string(bad) + " mismatches" + first);
  }
  return failures;
}
