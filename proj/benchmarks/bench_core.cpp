#include <benchmark/benchmark.h>

#include <random>

#include "histocam/augment.hpp"
#include "histocam/explain.hpp"
#include "histocam/metrics.hpp"
#include "histocam/network.hpp"
#include "histocam/ops.hpp"
#include "histocam/trainer.hpp"

namespace {

using histocam::ag::Tape;
using histocam::ag::Tensor;
namespace ops = histocam::ag::ops;
using histocam::network::Model;
using histocam::network::ModelConfig;

Tensor random_tensor(histocam::ag::Shape shape, std::uint64_t seed, bool requires_grad = false) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

// First TinyVGG convolution on a batch of 64x64 images.
void BM_Conv2dForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor x = random_tensor({n, 3, 64, 64}, 1);
  const Tensor k = random_tensor({8, 3, 3, 3}, 2);
  const Tensor b = Tensor::zeros({8});
  for (auto _ : state) {
    Tape tape;
    tape.set_recording(false);
    benchmark::DoNotOptimize(ops::conv2d(tape, x, k, b, 1, 1));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Conv2dForward)->Arg(1)->Arg(8);

void BM_Conv2dForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Tensor x = random_tensor({n, 3, 64, 64}, 1, true);
  Tensor k = random_tensor({8, 3, 3, 3}, 2, true);
  Tensor b = Tensor::zeros({8}, true);
  for (auto _ : state) {
    x.zero_grad();
    k.zero_grad();
    b.zero_grad();
    Tape tape;
    tape.backward(ops::sum(tape, ops::conv2d(tape, x, k, b, 1, 1)));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Conv2dForwardBackward)->Arg(1)->Arg(8);

// One optimisation step of TinyVGG on 64x64 inputs: forward, BCE, backward, Adam.
void BM_TrainStep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Model model(ModelConfig::tiny_vgg({64, 64, 3}, 1));
  const Tensor batch = random_tensor({n, 3, 64, 64}, 3);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % 2);
  histocam::trainer::Adam adam(histocam::trainer::TrainConfig{});
  std::mt19937_64 rng(4);
  for (auto _ : state) {
    for (auto& p : model.parameters()) p.value.zero_grad();
    Tape tape;
    const auto pass = model.forward(tape, batch, ops::Mode::train, &rng);
    tape.backward(histocam::trainer::bce_loss(tape, pass.probabilities, labels));
    adam.step(model.parameters());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_TrainStep)->Arg(8)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_Auroc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> scores(n);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = u(rng);
    labels[i] = static_cast<int>(i % 2);
  }
  for (auto _ : state) benchmark::DoNotOptimize(histocam::metrics::auroc(scores, labels));
  state.SetComplexityN(static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Auroc)->RangeMultiplier(10)->Range(100, 100000)->Complexity(benchmark::oNLogN);

void BM_CropSquareResize(benchmark::State& state) {
  histocam::Image img(768, 768);
  std::mt19937_64 rng(6);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng() & 0xff);
  for (auto _ : state) benchmark::DoNotOptimize(histocam::augment::crop_square_resize(img, 224));
}
BENCHMARK(BM_CropSquareResize)->Unit(benchmark::kMillisecond);

void BM_GradCam(benchmark::State& state) {
  const Model model(ModelConfig::tiny_vgg({64, 64, 3}, 1));
  const Tensor x = random_tensor({1, 3, 64, 64}, 7);
  for (auto _ : state) benchmark::DoNotOptimize(histocam::explain::gradcam(model, x, 1));
}
BENCHMARK(BM_GradCam)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
