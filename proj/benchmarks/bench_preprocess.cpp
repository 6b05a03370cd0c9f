#include <benchmark/benchmark.h>

#include "tumorseg/preprocess.hpp"
#include "tumorseg/rng.hpp"

using namespace tumorseg;

namespace {

Tensor scanner_slice(int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t({h, w});
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(0.0, 65535.0);
  return t;
}

void BM_ResizeBilinear240to128(benchmark::State& state) {
  const Tensor s = scanner_slice(240, 240, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(resize_slice(s, 128, 128));
  }
}
BENCHMARK(BM_ResizeBilinear240to128)->Unit(benchmark::kMicrosecond);

void BM_ResizeNearestLabels(benchmark::State& state) {
  Rng rng(2);
  LabelImage img;
  img.height = 240;
  img.width = 240;
  img.v.resize(240 * 240);
  const std::uint8_t values[4] = {0, 1, 2, 4};
  for (auto& v : img.v) v = values[rng.uniform_index(4)];
  for (auto _ : state) {
    benchmark::DoNotOptimize(resize_slice(img, 128, 128));
  }
}
BENCHMARK(BM_ResizeNearestLabels)->Unit(benchmark::kMicrosecond);

void BM_NormalizeMinMax(benchmark::State& state) {
  const Tensor s = scanner_slice(128, 128, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(normalize_minmax(s));
  }
}
BENCHMARK(BM_NormalizeMinMax)->Unit(benchmark::kMicrosecond);

void BM_OneHot(benchmark::State& state) {
  Rng rng(4);
  LabelImage img;
  img.height = 128;
  img.width = 128;
  img.v.resize(128 * 128);
  for (auto& v : img.v) v = static_cast<std::uint8_t>(rng.uniform_index(4));
  for (auto _ : state) {
    benchmark::DoNotOptimize(one_hot(img));
  }
}
BENCHMARK(BM_OneHot)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
