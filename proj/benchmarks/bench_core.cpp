#include <benchmark/benchmark.h>

#include <random>

#include "cmig/autodiff/value.hpp"
#include "cmig/data/synth.hpp"
#include "cmig/geometry/neighbors.hpp"
#include "cmig/geometry/procrustes.hpp"
#include "cmig/harness/config.hpp"
#include "cmig/harness/pipeline.hpp"
#include "cmig/harness/training.hpp"
#include "cmig/projection.hpp"

using namespace cmig;

namespace {

geometry::Points random_points(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  geometry::Points p(static_cast<Eigen::Index>(n), 3);
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (int c = 0; c < 3; ++c) p(i, c) = u(rng);
  return p;
}

void BM_Knn(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto p = random_points(n, 1);
  for (auto _ : state) benchmark::DoNotOptimize(geometry::knn(p, 16));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Knn)->RangeMultiplier(2)->Range(64, 1024)->Complexity(benchmark::oNSquared);

void BM_WeightedSvd(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  const auto src = random_points(k, 2), dst = random_points(k, 3);
  const std::vector<double> w(k, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(geometry::weighted_svd(src, dst, w));
}
BENCHMARK(BM_WeightedSvd)->Arg(64)->Arg(512);

void BM_MatmulBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> v(n * n, 0.5);
  for (auto _ : state) {
    ad::Value a = ad::Value::parameter({n, n}, v), b = ad::Value::parameter({n, n}, v);
    ad::backward(ad::sum_all(ad::matmul(a, b)));
    benchmark::DoNotOptimize(a.grad().data());
  }
}
BENCHMARK(BM_MatmulBackward)->Arg(64)->Arg(128);

void BM_Render(benchmark::State& state) {
  const geometry::PointCloud cloud(random_points(1024, 4) * 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(projection::render_views(cloud, 4, 32));
}
BENCHMARK(BM_Render);

// Full inference at the default desk-scale model, n_iter from the argument.
void BM_Pipeline(benchmark::State& state) {
  harness::RunConfig cfg;
  const auto model = harness::initial_model(cfg);
  const auto sample = harness::make_eval_set(cfg).front();
  auto opts = harness::pipeline_options(cfg);
  opts.n_iter = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(harness::run_pipeline(model, sample.source, sample.target, opts));
}
BENCHMARK(BM_Pipeline)->DenseRange(1, 5)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  harness::RunConfig cfg;
  const auto model = harness::initial_model(cfg);
  const auto set = harness::make_training_set(cfg);
  std::vector<const data::RegistrationSample*> batch;
  for (std::size_t i = 0; i < cfg.train.batch_size; ++i) batch.push_back(&set[i]);
  for (auto _ : state) {
    auto loss = harness::batch_loss(model, batch, cfg);
    ad::backward(loss.total);
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
