// Serial vs OpenMP paths of the sampling and subset-search kernels.
#include <benchmark/benchmark.h>

#include "corsearch/corpv.hpp"
#include "corsearch/kernels.hpp"

using namespace corsearch;

namespace {

ExecPolicy policy_of(const benchmark::State& st) {
  return st.range(0) ? ExecPolicy::Parallel : ExecPolicy::Serial;
}

ConvexRegion wedge(int d) {
  ConvexRegion r(d);
  for (int i = 0; i < d; ++i) r.add(-Vec::Unit(d, i), 0.0);  // orthant
  r.add(Vec::Ones(d) / std::sqrt(static_cast<double>(d)), 0.5);
  return r;
}

void BM_CountInside(benchmark::State& st) {
  const int d = 3;
  const ConvexRegion r = wedge(d);
  const auto inside = [&](const Vec& p) { return r.contains(p); };
  for (auto _ : st)
    benchmark::DoNotOptimize(kernels::count_inside(inside, -Vec::Ones(d), Vec::Ones(d), Rng(1), 200'000,
                                                   policy_of(st)));
}
BENCHMARK(BM_CountInside)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_HitAndRun(benchmark::State& st) {
  const int d = 3;
  const ConvexRegion r = wedge(d);
  for (auto _ : st) {
    kernels::HitAndRun hr(r, Vec::Constant(d, 0.1), Rng(2), 4, 8, 200);
    kernels::Moments m(d);
    hr.advance(5000, policy_of(st), m);
    benchmark::DoNotOptimize(m.mean());
  }
}
BENCHMARK(BM_HitAndRun)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

// Violation search over C(n, c) subsets with no feasible choice, so every
// subset is visited.
void BM_FirstSubset(benchmark::State& st) {
  const int n = 40, k = 3;
  for (auto _ : st)
    benchmark::DoNotOptimize(kernels::first_subset(
        n, k, [](const std::vector<int>& s) { return s[0] + s[1] + s[2] < 0; }, policy_of(st), 1'000'000));
}
BENCHMARK(BM_FirstSubset)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_SeparatingCut(benchmark::State& st) {
  AlgoParams p = AlgoParams::make(3, 0.1, 1);
  p.policy = policy_of(st);
  Rng rng(3);
  EpochState s = initial_state(p, KnowledgeSet(3), Rng(4));
  Vec theta(3);
  theta << 0.3, 0.2, 0.4;
  while (static_cast<int>(s.records.size()) < p.tau) {
    Vec x(3);
    for (int i = 0; i < 3; ++i) x[i] = std::abs(rng.normal());
    x.normalize();
    const double w = x.dot(s.kappa);
    record_explore(s, p, x, w, feedback(x.dot(theta), w), s.records.size() + 1);
  }
  for (auto _ : st) benchmark::DoNotOptimize(separating_cut(s, p, Rng(5)));
}
BENCHMARK(BM_SeparatingCut)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
