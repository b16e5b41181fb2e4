// Serial vs OpenMP kernels, and incremental vs exact diffusion.

#include <benchmark/benchmark.h>

#include <vector>

#include "inpaint/config.hpp"
#include "inpaint/kernels.hpp"
#include "inpaint/model.hpp"
#include "inpaint/random.hpp"
#include "inpaint/synthetic.hpp"

using namespace inpaint;
namespace k = inpaint::kernels;

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

template <bool Parallel>
void BM_gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_values(n * n, 1), b = random_values(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    if constexpr (Parallel) k::parallel::gemm_nn(a, b, c, n, n, n);
    else k::serial::gemm_nn(a, b, c, n, n, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n * n));
}

template <bool Parallel>
void BM_softmax(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = random_values(n * n, 3);
  std::vector<double> y(n * n);
  for (auto _ : state) {
    if constexpr (Parallel) k::parallel::softmax_rows(x, y, n, n);
    else k::serial::softmax_rows(x, y, n, n);
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel>
void BM_conv(benchmark::State& state) {
  const auto hw = static_cast<std::size_t>(state.range(0));
  const k::ConvGeometry g{16, hw, hw, 32, 3, 2, 1};
  const auto x = random_values(16 * hw * hw, 4), w = random_values(32 * 16 * 9, 5), b = random_values(32, 6);
  std::vector<double> y(32 * g.out_height() * g.out_width());
  for (auto _ : state) {
    if constexpr (Parallel) k::parallel::conv2d_forward(g, x, w, b, y);
    else k::serial::conv2d_forward(g, x, w, b, y);
    benchmark::DoNotOptimize(y.data());
  }
}

void BM_diffusion(benchmark::State& state, DiffusionMode mode) {
  ModelConfig mc;
  mc.height = mc.width = static_cast<std::size_t>(state.range(0));
  mc.dim = 32;
  mc.heads = 2;
  mc.encoder_layers = mc.decoder_layers = 2;
  const Model model(mc, 3);
  const auto samples = make_toy_dataset(1, mc.height, mc.width, mc.decoder_factor, mc.patch, 0.4, 3);
  PipelineOptions opt;
  opt.mode = mode;
  double ratio = 0.0;
  for (auto _ : state) {
    NoGradGuard no_grad;
    const PipelineResult r = model.run(samples[0].image, samples[0].mask, opt);
    ratio = r.diffusion.cost.ratio();
    benchmark::DoNotOptimize(r.output.pixels.data());
  }
  state.counters["cost_ratio"] = ratio;
}

}  // namespace

BENCHMARK(BM_gemm<false>)->Arg(64)->Arg(256);
BENCHMARK(BM_gemm<true>)->Arg(64)->Arg(256);
BENCHMARK(BM_softmax<false>)->Arg(256)->Arg(1024);
BENCHMARK(BM_softmax<true>)->Arg(256)->Arg(1024);
BENCHMARK(BM_conv<false>)->Arg(64)->Arg(128);
BENCHMARK(BM_conv<true>)->Arg(64)->Arg(128);
BENCHMARK_CAPTURE(BM_diffusion, incremental, DiffusionMode::kIncremental)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_diffusion, exact, DiffusionMode::kExact)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
