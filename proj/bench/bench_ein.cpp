#include <benchmark/benchmark.h>

#include "ein/harness.hpp"
#include "ein/syntax.hpp"
#include "ein/value.hpp"

using namespace ein;

namespace {

void suite(benchmark::State& st, bool parallel) {
  GenConfig cfg;
  cfg.seed = 1;
  for (auto _ : st) {
    PropertyReport r = runSuite(Property::Value, cfg, st.range(0), parallel);
    benchmark::DoNotOptimize(r.steps);
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

void sweep(benchmark::State& st, bool parallel) {
  IndexCtx sg{{"i", 3}, {"j", 3}, {"k", 3}, {"l", 3}, {"m", 3}, {"p", 3}};
  Expr lhs = parse("eps(i,j,k) * eps(i,l,m) * (M3[p,j] + A3[k] * A3[l])");
  Expr rhs = parse("(eps(i,j,k) * eps(i,l,m)) * M3[p,j] + eps(i,j,k) * eps(i,l,m) * (A3[k] * A3[l])");
  DataEnv psi = genData(standardGamma(), 3);
  for (auto _ : st) {
    ValueCheck v = compareValues(sg, lhs, {}, rhs, {}, psi, parallel);
    benchmark::DoNotOptimize(v.ok);
  }
}

void enumerate(benchmark::State& st, bool parallel) {
  Signature sig = enumerationSignatures()[0];
  for (auto _ : st) {
    EnumReport r = enumerateNfEquiv(sig, static_cast<int>(st.range(0)), parallel);
    benchmark::DoNotOptimize(r.disagreements);
  }
}

}  // namespace

BENCHMARK_CAPTURE(suite, serial, false)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(suite, parallel, true)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(sweep, serial, false)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(sweep, parallel, true)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(enumerate, serial, false)->Arg(7)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(enumerate, parallel, true)->Arg(7)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
