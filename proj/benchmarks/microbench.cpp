#include <benchmark/benchmark.h>

#include "spsn/autodiff.hpp"
#include "spsn/neurons.hpp"
#include "spsn/numerics.hpp"

namespace {

using spsn::Rng;
using spsn::Tape;
using spsn::Tensor;

constexpr std::size_t kBatch = 8;
constexpr std::size_t kWidth = 128;

Tensor<float> random_input(std::size_t steps, std::size_t width, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<float> x({steps, kBatch, width});
  for (auto& v : x.storage()) v = static_cast<float>(rng.uniform(0.0, 0.2));
  return x;
}

spsn::NeuronParams params() {
  spsn::NeuronParams p;
  p.tau_syn = 0.005;
  p.tau_mem = 0.01;
  return p;
}

void BM_CausalFftConvolve(benchmark::State& state) {
  const auto steps = static_cast<std::size_t>(state.range(0));
  const auto x = random_input(steps, kWidth, 1);
  const auto kernel = spsn::build_decay_kernel<float>(0.95, 0.05, steps);
  for (auto _ : state) benchmark::DoNotOptimize(spsn::causal_fft_convolve(kernel, x));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(x.size()));
}
BENCHMARK(BM_CausalFftConvolve)->RangeMultiplier(4)->Range(64, 16384)->Unit(benchmark::kMicrosecond);

void BM_LifForward(benchmark::State& state) {
  const auto steps = static_cast<std::size_t>(state.range(0));
  const auto x = random_input(steps, kWidth, 2);
  for (auto _ : state) {
    Tape<float> tape;
    benchmark::DoNotOptimize(spsn::lif_forward(tape.leaf(x), params()).spikes.value().data().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(x.size()));
}
BENCHMARK(BM_LifForward)->RangeMultiplier(4)->Range(64, 16384)->Unit(benchmark::kMicrosecond);

void BM_SpsnForward(benchmark::State& state) {
  const auto steps = static_cast<std::size_t>(state.range(0));
  const auto x = random_input(steps, kWidth, 3);
  Rng rng(4);
  for (auto _ : state) {
    Tape<float> tape;
    benchmark::DoNotOptimize(
        spsn::spsn_forward(tape.leaf(x), params(), spsn::FiringOptions{}, rng).spikes.value().data().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(x.size()));
}
BENCHMARK(BM_SpsnForward)->RangeMultiplier(4)->Range(64, 16384)->Unit(benchmark::kMicrosecond);

void BM_SigmoidBernoulli(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng init(5), rng(6);
  Tensor<float> u({n});
  for (auto& v : u.storage()) v = static_cast<float>(init.uniform(-2.0, 2.0));
  for (auto _ : state) {
    Tape<float> tape;
    benchmark::DoNotOptimize(spsn::op_sigmoid_bernoulli(tape.leaf(u), rng).value().data().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_SigmoidBernoulli)->Range(1 << 10, 1 << 20);

void BM_DenseForwardBackward(benchmark::State& state) {
  const auto steps = static_cast<std::size_t>(state.range(0));
  const auto x = random_input(steps, 700, 7);
  Rng rng(8);
  Tensor<float> w({700, kWidth}), b({kWidth});
  for (auto& v : w.storage()) v = static_cast<float>(rng.uniform(-0.04, 0.04));
  for (auto _ : state) {
    Tape<float> tape;
    auto wv = tape.leaf(w);
    auto loss = spsn::op_sum(spsn::op_dense(tape.leaf(x, false), wv, tape.leaf(b)));
    benchmark::DoNotOptimize(spsn::backward(tape, loss).of(wv).data().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(steps * kBatch));
}
BENCHMARK(BM_DenseForwardBackward)->RangeMultiplier(4)->Range(64, 4096)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
