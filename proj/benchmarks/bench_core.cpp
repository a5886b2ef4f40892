#include <benchmark/benchmark.h>

#include <vector>

#include "rft/base_policy.hpp"
#include "rft/grpo.hpp"
#include "rft/harness.hpp"
#include "rft/policy.hpp"
#include "rft/rng.hpp"
#include "rft/strategies.hpp"
#include "rft/tasks.hpp"

using namespace rft;

namespace {

struct Setup {
  std::vector<TaskInstance> tasks;
  StrategySpec strategy;
  ParameterTable params;

  explicit Setup(StrategyKind kind, int order = 1)
      : tasks([] {
          Rng rng(1);
          return gen_classification(GeneratorConfig{}, 256, 0.0, rng);
        }()),
        strategy(make_strategy(kind)),
        params(instruction_prior(vocabulary_for(tasks), strategy, tasks, order, PriorConfig{})) {}
};

void BM_TokenDistribution(benchmark::State& state) {
  Setup s(StrategyKind::Thinking);
  const auto ctx = make_context(s.tasks[0].template_id, std::vector<TokenId>{}, 1);
  for (auto _ : state) benchmark::DoNotOptimize(token_distribution(s.params, ctx));
}
BENCHMARK(BM_TokenDistribution);

void BM_SampleResponse(benchmark::State& state) {
  Setup s(StrategyKind::Thinking, static_cast<int>(state.range(0)));
  Rng rng(2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_response(s.params, s.tasks[0], 24, rng));
  }
}
BENCHMARK(BM_SampleResponse)->Arg(0)->Arg(1)->Arg(3);

void BM_GrpoGradient(benchmark::State& state) {
  Setup s(StrategyKind::Thinking);
  GrpoConfig cfg;
  cfg.group_size = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  const auto group = collect_group(s.tasks[0], s.strategy, s.params, s.params, cfg, rng);
  for (auto _ : state) benchmark::DoNotOptimize(grpo_gradient(group, s.params, cfg));
}
BENCHMARK(BM_GrpoGradient)->Arg(4)->Arg(16);

void BM_TrainSteps(benchmark::State& state) {
  Setup s(StrategyKind::Thinking);
  GrpoConfig cfg;
  cfg.max_steps = 10;
  for (auto _ : state) {
    Rng rng(4);
    benchmark::DoNotOptimize(train(s.tasks, s.strategy, cfg, rng, s.params));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(cfg.max_steps));
}
BENCHMARK(BM_TrainSteps);

void BM_Evaluate(benchmark::State& state) {
  Setup s(StrategyKind::AdaptiveThinking);
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate(s.params, s.tasks, s.strategy, 24));
  }
}
BENCHMARK(BM_Evaluate);

}  // namespace

BENCHMARK_MAIN();
