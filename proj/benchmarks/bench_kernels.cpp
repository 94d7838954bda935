#include <benchmark/benchmark.h>

#include "focuslab/camera.hpp"
#include "focuslab/metrics.hpp"
#include "focuslab/model.hpp"
#include "focuslab/optics.hpp"
#include "focuslab/rng.hpp"

namespace {

using namespace focuslab;

Image noise(int size, std::uint64_t seed) {
  Rng rng(seed);
  Image img(size, size);
  for (auto& v : img.pixels()) v = rng.uniform();
  return img;
}

void BM_ApplyDefocus(benchmark::State& state) {
  const Image img = noise(64, 1);
  const auto kernel = optics::psf_kernel(static_cast<double>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(optics::apply_defocus(img, kernel));
}
BENCHMARK(BM_ApplyDefocus)->Arg(1)->Arg(4)->Arg(8);

void BM_Tenengrad(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const Image img = noise(size, 2), weight(size, size, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::tenengrad(img, weight));
}
BENCHMARK(BM_Tenengrad)->Arg(64)->Arg(256);

void BM_SynthesizeStack(benchmark::State& state) {
  camera::SyntheticStackSpec spec;
  spec.positions = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(camera::make_synthetic_stack(spec, optics::LensConfig{}, 0));
}
BENCHMARK(BM_SynthesizeStack)->Arg(80)->Unit(benchmark::kMillisecond);

void BM_ForwardStep(benchmark::State& state) {
  const auto params = model::ModelParams::random(model::ModelConfig::desk(), 1);
  const Image img = noise(64, 3);
  const auto h = model::RecurrentState<float>::zeros(params.config);
  for (auto _ : state) benchmark::DoNotOptimize(model::forward_step(params, img, h));
}
BENCHMARK(BM_ForwardStep)->Unit(benchmark::kMillisecond);

void BM_BackwardEpisode(benchmark::State& state) {
  const auto params = model::ModelParams::random(model::ModelConfig::desk(), 1);
  std::vector<model::StepRecord<float>> records;
  auto h = model::RecurrentState<float>::zeros(params.config);
  const auto labels = model::mask_labels(noise(64, 5));
  for (int t = 0; t < 4; ++t) {
    model::StepRecord<float> r;
    r.cache = model::forward_step_cached(params, noise(64, 10 + t), h);
    r.target_step = 0.5;
    r.labels = labels;
    h = r.cache.out.state;
    records.push_back(std::move(r));
  }
  auto grads = model::Gradients::zeros(params.config);
  for (auto _ : state) {
    grads.set_zero();
    model::backward<float>(params, records, 4.0, grads);
    benchmark::DoNotOptimize(grads.tensors.front().data());
  }
}
BENCHMARK(BM_BackwardEpisode)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
