#include <benchmark/benchmark.h>

#include "tumorseg/metrics.hpp"
#include "tumorseg/rng.hpp"

using namespace tumorseg;

namespace {

Tensor one_hot_128(std::uint64_t seed) {
  Rng rng(seed);
  Tensor t({128, 128, 4});
  for (int y = 0; y < 128; ++y) {
    for (int x = 0; x < 128; ++x) {
      t(y, x, static_cast<int>(rng.uniform_index(4))) = 1.0;
    }
  }
  return t;
}

Tensor probs_128(std::uint64_t seed) {
  Rng rng(seed);
  Tensor t({128, 128, 4});
  for (int y = 0; y < 128; ++y) {
    for (int x = 0; x < 128; ++x) {
      double sum = 0.0;
      for (int c = 0; c < 4; ++c) {
        t(y, x, c) = rng.uniform() + 1e-4;
        sum += t(y, x, c);
      }
      for (int c = 0; c < 4; ++c) t(y, x, c) /= sum;
    }
  }
  return t;
}

void BM_AccumulatorAdd(benchmark::State& state) {
  const Tensor target = one_hot_128(1);
  const Tensor probs = probs_128(2);
  for (auto _ : state) {
    MetricAccumulator acc;
    acc.add(target, probs);
    benchmark::DoNotOptimize(acc.values(DiceMode::soft));
  }
}
BENCHMARK(BM_AccumulatorAdd)->Unit(benchmark::kMicrosecond);

void BM_ConfusionCounts(benchmark::State& state) {
  const Tensor target = one_hot_128(3);
  const Tensor probs = probs_128(4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(confusion_counts(target, probs, Decision::argmax));
  }
}
BENCHMARK(BM_ConfusionCounts)->Unit(benchmark::kMicrosecond);

void BM_SoftDice(benchmark::State& state) {
  const Tensor target = one_hot_128(5);
  const Tensor probs = probs_128(6);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dice(target, probs));
  }
}
BENCHMARK(BM_SoftDice)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
