#include <benchmark/benchmark.h>

#include "tumorseg/rng.hpp"
#include "tumorseg/unet.hpp"

using namespace tumorseg;

namespace {

Tensor random_batch(int b, int h, int w, int c, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t({b, h, w, c});
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform();
  return t;
}

void BM_ForwardMicro(benchmark::State& state) {
  UNetConfig cfg;
  cfg.base_features = 2;
  cfg.depth = 1;
  cfg.input_height = 8;
  cfg.input_width = 8;
  UNet model(cfg);
  const Tensor x = random_batch(1, 8, 8, 2, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.forward(x));
  }
}
BENCHMARK(BM_ForwardMicro);

void BM_ForwardSmall(benchmark::State& state) {
  UNetConfig cfg;
  cfg.base_features = 8;
  cfg.depth = 2;
  UNet model(cfg);
  const Tensor x = random_batch(1, 128, 128, 2, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.forward(x));
  }
}
BENCHMARK(BM_ForwardSmall)->Unit(benchmark::kMillisecond);

void BM_ForwardDefault(benchmark::State& state) {
  UNetConfig cfg;  // base 32, depth 4, 128x128
  UNet model(cfg);
  const Tensor x = random_batch(1, 128, 128, 2, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.forward(x));
  }
}
BENCHMARK(BM_ForwardDefault)->Unit(benchmark::kMillisecond);

void BM_TrainStepSmall(benchmark::State& state) {
  UNetConfig cfg;
  cfg.base_features = 8;
  cfg.depth = 2;
  UNet model(cfg);
  const Tensor x = random_batch(1, 128, 128, 2, 4);
  Rng rng(5);
  Tensor target({1, 128, 128, 4});
  for (int y = 0; y < 128; ++y) {
    for (int xx = 0; xx < 128; ++xx) {
      target(0, y, xx, static_cast<int>(rng.uniform_index(4))) = 1.0;
    }
  }
  UNet::Cache cache;
  for (auto _ : state) {
    const Tensor probs = model.forward(x, cache);
    Tensor dlogits(probs.shape());
    for (std::int64_t i = 0; i < probs.size(); ++i) {
      dlogits[i] = (probs[i] - target[i]) / (128.0 * 128.0);
    }
    model.zero_grad();
    model.backward(cache, dlogits);
    benchmark::DoNotOptimize(model.parameters());
  }
}
BENCHMARK(BM_TrainStepSmall)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
