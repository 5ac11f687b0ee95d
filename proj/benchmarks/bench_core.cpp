#include <benchmark/benchmark.h>

#include <map>
#include <memory>

#include "acss/acss.hpp"
#include "acss/harness.hpp"
#include "acss/models.hpp"

using namespace acss;

namespace {

Replication null_data(ExperimentKind kind, std::uint64_t seed) {
  static std::map<ExperimentKind, std::unique_ptr<Experiment>> cache;
  auto& exp = cache[kind];
  if (!exp) exp = std::make_unique<Experiment>(default_config(kind));
  Rng rng(seed);
  return exp->generate(0, rng);
}

void BM_Solve(benchmark::State& state) {
  const auto kind = static_cast<ExperimentKind>(state.range(0));
  const Replication r = null_data(kind, 1);
  const AcssConfig cfg = Experiment(default_config(kind)).acss_config();
  Rng rng(2);
  const Vec w = draw_noise(r.model->dim(), rng);
  for (auto _ : state)
    benchmark::DoNotOptimize(solve_perturbed(*r.model, zero_regularizer(), r.x, w, cfg));
  state.SetLabel(to_string(kind));
}

void BM_MhStep(benchmark::State& state) {
  const auto kind = static_cast<ExperimentKind>(state.range(0));
  const Replication r = null_data(kind, 1);
  const Experiment exp(default_config(kind));
  const AcssConfig cfg = exp.acss_config();
  Rng rng(3);
  const auto est = solve_perturbed(*r.model, zero_regularizer(), r.x, draw_noise(r.model->dim(), rng), cfg);
  const CondDensityContext ctx(*r.model, zero_regularizer(), est.theta_hat, cfg);
  ProposalConfig prop;
  if (kind == ExperimentKind::Spatial) {
    prop.family = ProposalFamily::ArMixing;
    prop.rho = 0.9;
  } else {
    prop.s = 5;
  }
  MhChain chain(ctx, prop, r.x);
  for (auto _ : state) benchmark::DoNotOptimize(chain.step(rng));
  state.counters["accept"] = static_cast<double>(chain.accepted()) / static_cast<double>(chain.proposed());
  state.SetLabel(to_string(kind));
}

void BM_Bind(benchmark::State& state) {
  const auto kind = static_cast<ExperimentKind>(state.range(0));
  const Replication r = null_data(kind, 1);
  for (auto _ : state) benchmark::DoNotOptimize(r.model->bind(r.oracle_theta));
  state.SetLabel(to_string(kind));
}

}  // namespace

BENCHMARK(BM_Solve)->DenseRange(0, 3)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_MhStep)->DenseRange(0, 3)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Bind)->DenseRange(0, 3)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
