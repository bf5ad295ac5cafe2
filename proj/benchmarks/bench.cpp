#include <benchmark/benchmark.h>

#include "pdgan/eval.hpp"
#include "pdgan/models.hpp"
#include "pdgan/rng.hpp"
#include "pdgan/synthdata.hpp"
#include "pdgan/tensor.hpp"

using namespace pdgan;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, bool grad = false) {
  Rng rng(seed);
  Tensor t(std::move(shape), grad);
  for (double& v : t.data()) v = rng.uniform(-1.0, 1.0);
  return t;
}

void BM_conv2d_forward(benchmark::State& state) {
  Tensor x = random_tensor(Shape{8, 16, 32, 32}, 1);
  Tensor k = random_tensor(Shape{16, 16, 3, 3}, 2);
  Tensor b = random_tensor(Shape{16}, 3);
  for (auto _ : state) {
    Tensor y = conv2d(x, k, b, 1, 1);
    benchmark::DoNotOptimize(y.data().data());
  }
}
BENCHMARK(BM_conv2d_forward);

void BM_conv2d_backward(benchmark::State& state) {
  Tensor x = random_tensor(Shape{8, 16, 32, 32}, 1, true);
  Tensor k = random_tensor(Shape{16, 16, 3, 3}, 2, true);
  Tensor b = random_tensor(Shape{16}, 3, true);
  for (auto _ : state) {
    x.zero_grad();
    k.zero_grad();
    b.zero_grad();
    Tensor loss = mean(conv2d(x, k, b, 1, 1));
    backward(loss);
    benchmark::DoNotOptimize(k.grad().data());
  }
}
BENCHMARK(BM_conv2d_backward);

void BM_generator_forward(benchmark::State& state) {
  Model g = init_generator(0.25, 7);
  Tensor rgb = random_tensor(Shape{8, 3, 32, 32}, 4);
  for (double& v : rgb.data()) v = 0.5 * (v + 1.0);
  for (auto _ : state) {
    Tensor d = generator_forward(g, rgb, false);
    benchmark::DoNotOptimize(d.data().data());
  }
}
BENCHMARK(BM_generator_forward);

void BM_generator_train_step(benchmark::State& state) {
  Model g = init_generator(0.25, 7);
  Tensor rgb = random_tensor(Shape{8, 3, 32, 32}, 4);
  for (double& v : rgb.data()) v = 0.5 * (v + 1.0);
  Tensor gt = random_tensor(Shape{8, 1, 32, 32}, 5);
  for (double& v : gt.data()) v = 0.5 * (v + 1.0);
  for (auto _ : state) {
    for (auto& [n, p] : g.params) p.zero_grad();
    Tensor loss = l1_loss(generator_forward(g, rgb, true), gt);
    backward(loss);
    benchmark::DoNotOptimize(loss.item());
  }
}
BENCHMARK(BM_generator_train_step);

void BM_encoder_embed(benchmark::State& state) {
  Model g = init_generator(0.25, 7);
  Tensor rgb = random_tensor(Shape{8, 3, 32, 32}, 4);
  for (double& v : rgb.data()) v = 0.5 * (v + 1.0);
  for (auto _ : state) {
    Tensor e = encoder_embed(g, rgb);
    benchmark::DoNotOptimize(e.data().data());
  }
}
BENCHMARK(BM_encoder_embed);

void BM_sweep_threshold(benchmark::State& state) {
  Rng rng(9);
  ScoredSet set;
  for (int i = 0; i < 1000; ++i) {
    set.scores.push_back(rng.uniform(0.0, 1.0));
    set.labels.push_back(rng.bernoulli(0.5) ? 1 : 0);
  }
  set.labels[0] = 0;
  set.labels[1] = 1;
  for (auto _ : state) {
    MetricsReport r = sweep_threshold(set);
    benchmark::DoNotOptimize(r.acer);
  }
}
BENCHMARK(BM_sweep_threshold);

void BM_generate_sample(benchmark::State& state) {
  std::uint64_t i = 0;
  for (auto _ : state) {
    Rng rng = Rng::substream(11, i++);
    Sample s = generate_sample(rng, Label::kSpoof, SpoofClass::kScreen, 32);
    benchmark::DoNotOptimize(s.rgb.data().data());
  }
}
BENCHMARK(BM_generate_sample);

}  // namespace

BENCHMARK_MAIN();
