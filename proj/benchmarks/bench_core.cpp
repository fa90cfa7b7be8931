#include <benchmark/benchmark.h>

#include <random>

#include "bonelayer/metrics.hpp"
#include "bonelayer/registration.hpp"
#include "bonelayer/separator.hpp"
#include "bonelayer/synthesizer.hpp"

namespace bonelayer {
namespace {

Phantom overlapping(int side) {
  PhantomSpec s = PhantomSpec::with_side(side);
  s.bones[1].cy -= 0.1 * side;
  return make_phantom(s);
}

void BM_InpaintLaplace(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const Phantom p = make_phantom(PhantomSpec::with_side(side));
  const BinaryMask uni = p.masks.union_mask();
  for (auto _ : state) benchmark::DoNotOptimize(inpaint_laplace(p.image, uni));
  state.SetItemsProcessed(state.iterations() * uni.count());
}
BENCHMARK(BM_InpaintLaplace)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_Reconstruct(benchmark::State& state) {
  const Phantom p = overlapping(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(reconstruct(p.layers, p.k));
  state.SetItemsProcessed(state.iterations() * p.image.size());
}
BENCHMARK(BM_Reconstruct)->Arg(256)->Arg(512)->Unit(benchmark::kMicrosecond);

void BM_Ssim(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ScalarField a(Shape{side, side}, 0.0), b(Shape{side, side}, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = u(rng);
    b[i] = u(rng);
  }
  const GrayImage x(a), y(b);
  for (auto _ : state) benchmark::DoNotOptimize(ssim(x, y));
  state.SetItemsProcessed(state.iterations() * x.size());
}
BENCHMARK(BM_Ssim)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_Separate(benchmark::State& state) {
  const Phantom p = overlapping(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(separate(p.image, p.masks, p.k));
}
BENCHMARK(BM_Separate)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_RegisterTranslation(benchmark::State& state) {
  const Phantom p = make_phantom(PhantomSpec::with_side(256));
  const GrayImage moved = translate(p.image, Offset{3, -2});
  const BinaryMask support = p.masks.union_mask();
  const int radius = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(register_translation(moved, p.image, support, radius));
}
BENCHMARK(BM_RegisterTranslation)->Arg(8)->Arg(24)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace bonelayer

BENCHMARK_MAIN();
