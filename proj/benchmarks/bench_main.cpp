#include <benchmark/benchmark.h>

#include <vector>

#include "epsmax/core_math.hpp"
#include "epsmax/eps_softmax.hpp"
#include "epsmax/losses.hpp"
#include "epsmax/model.hpp"
#include "epsmax/rng.hpp"

namespace {

using namespace epsmax;

std::vector<double> random_logits(std::size_t k, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> h(k);
  for (double& v : h) v = rng.uniform(-5.0, 5.0);
  return h;
}

void BM_Softmax(benchmark::State& state) {
  const auto h = random_logits(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(stable_softmax(h));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Softmax)->Arg(10)->Arg(100)->Arg(1000);

void BM_EpsSoftmax(benchmark::State& state) {
  const auto h = random_logits(static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(eps_softmax(h, {1e4}));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_EpsSoftmax)->Arg(10)->Arg(100)->Arg(1000);

void BM_BatchLoss(benchmark::State& state) {
  const auto kind = static_cast<LossKind>(state.range(0));
  LossSpec spec;
  spec.kind = kind;
  spec.m = 1e4;
  spec.alpha = 0.1;
  spec.beta = 1.0;
  const std::size_t n = 128, k = 10;
  Matrix logits(n, k, random_logits(n * k, 3));
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = i % k;
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_batch(logits, labels, spec));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
  state.SetLabel(std::string(to_string(kind)));
}
BENCHMARK(BM_BatchLoss)->DenseRange(0, 8);

void BM_MlpStep(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  Params params = init_params({{8, 64, 64, 4}, 0});
  Grads velocity = zeros_like(params);
  Matrix x(batch, 8, random_logits(batch * 8, 4));
  std::vector<std::size_t> labels(batch);
  for (std::size_t i = 0; i < batch; ++i) labels[i] = i % 4;
  LossSpec spec;
  spec.kind = LossKind::kCEEpsMAE;
  spec.m = 1e4;
  spec.alpha = 0.1;
  for (auto _ : state) {
    auto fwd = forward(params, x);
    const BatchLoss loss = evaluate_batch(fwd.logits, labels, spec);
    Grads grads = backward(fwd.cache, loss.grad_logits);
    clip_grad_norm(grads, 5.0);
    sgd_step(params, grads, velocity, 0.01, 0.9, 1e-4);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_MlpStep)->Arg(32)->Arg(128)->Arg(512);

}  // namespace

BENCHMARK_MAIN();
