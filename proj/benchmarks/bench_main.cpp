#include <benchmark/benchmark.h>

#include "stylo/matrix.hpp"
#include "stylo/model.hpp"
#include "stylo/rng.hpp"
#include "stylo/synthetic.hpp"

namespace {

using namespace stylo;

void BM_Matmul(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  Mat<float> a(n, n), b(n, n);
  for (auto& v : a.data) v = static_cast<float>(rng.uniform(-1, 1));
  for (auto& v : b.data) v = static_cast<float>(rng.uniform(-1, 1));
  for (auto _ : state) {
    auto c = matmul(a, b);
    benchmark::DoNotOptimize(c.data.data());
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

ModelConfig small_config(EncoderKind enc) {
  ModelConfig cfg;
  cfg.encoder = enc;
  cfg.M = 20;
  cfg.N = 15;
  cfg.d_p = 16;
  cfg.d_l = 32;
  cfg.filters_per_width = 32;
  cfg.windows = {3, 5};
  cfg.classes = 2;
  return cfg;
}

Segment sample_segment(const ModelConfig& cfg) {
  SyntheticConfig scfg;
  scfg.segments_per_author = 1;
  scfg.M = cfg.M;
  scfg.N = cfg.N;
  return generate_synthetic(scfg).train_pool.front();
}

void BM_ForwardBackward(benchmark::State& state) {
  const auto enc = state.range(0) == 0 ? EncoderKind::cnn : EncoderKind::lstm;
  const ModelConfig cfg = small_config(enc);
  SyntacticModel<float> model(cfg);
  Rng rng(7);
  model.init(rng);
  const Segment seg = sample_segment(cfg);
  ForwardCache<float> cache;
  for (auto _ : state) {
    model.zero_grads();
    auto probs = model.forward(seg, cache);
    benchmark::DoNotOptimize(probs.data());
    model.backward(seg, cache, seg.author_id, 1.0f);
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(0)->Arg(1);

}  // namespace

BENCHMARK_MAIN();
