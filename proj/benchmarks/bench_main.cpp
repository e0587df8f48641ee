#include <benchmark/benchmark.h>

#include <owttt/protocol.hpp>

#include <random>

using namespace owttt;

namespace {

std::vector<double> mixture(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> lo(0.3, 0.08), hi(0.8, 0.06);
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = i % 2 ? hi(rng) : lo(rng);
  return s;
}

Feature unit(std::mt19937_64 &rng, Eigen::Index d) {
  std::normal_distribution<double> n;
  Feature f(d);
  for (Eigen::Index i = 0; i < d; ++i) f(i) = n(rng);
  return f.normalized();
}

} // namespace

static void BM_AdaptiveThreshold(benchmark::State &state) {
  ScoreWindow window(static_cast<std::size_t>(state.range(0)));
  window.push(mixture(window.capacity(), 1));
  for (auto _ : state) benchmark::DoNotOptimize(adaptive_threshold(window));
}
BENCHMARK(BM_AdaptiveThreshold)->Arg(64)->Arg(512);

static void BM_Expand(benchmark::State &state) {
  std::mt19937_64 rng(3);
  FeatureList src;
  for (int k = 0; k < 5; ++k) src.push_back(unit(rng, 16));
  FeatureList batch;
  for (int i = 0; i < 64; ++i) batch.push_back(unit(rng, 16));
  for (auto _ : state) {
    state.PauseTiming();
    PrototypePool pool(src, 100);
    for (int i = 0; i < state.range(0); ++i) pool.push_novel(unit(rng, 16));
    ScoreWindow window(512);
    window.push(mixture(448, 5));
    state.ResumeTiming();
    benchmark::DoNotOptimize(expand(pool, batch, window));
  }
}
BENCHMARK(BM_Expand)->Arg(0)->Arg(100);

static void BM_EngineBatch(benchmark::State &state) {
  WorldSpec w;
  w.n_batches = 1;
  const auto src = generate_source(w);
  const auto stream = generate_stream(w);
  std::vector<RawSample> batch;
  for (const auto &s : stream[0]) batch.push_back(s.sample);
  Engine engine(RunConfig{}, src);
  for (auto _ : state) {
    benchmark::DoNotOptimize(engine.infer(batch));
    benchmark::DoNotOptimize(engine.adapt());
  }
}
BENCHMARK(BM_EngineBatch);

static void BM_RunStream(benchmark::State &state) {
  const WorldSpec w;
  const auto src = generate_source(w);
  const auto stream = generate_stream(w);
  for (auto _ : state) benchmark::DoNotOptimize(run_stream(stream, RunConfig{}, src));
}
BENCHMARK(BM_RunStream)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
