// Serial reference vs OpenMP kernels. Set OMP_NUM_THREADS to compare.

#include <benchmark/benchmark.h>

#include "ndiff/kernels.hpp"
#include "ndiff/metrics.hpp"
#include "ndiff/neurise.hpp"

namespace {

using namespace ndiff;

const GibbsModel& bench_model() {
  static const GibbsModel m = random_ising(16, 0.5, 0.2, 7);
  return m;
}

const std::vector<double>& bench_table() {
  static const std::vector<double> t = [] {
    auto d = exact_distribution(bench_model());
    return std::vector<double>(d.probs().begin(), d.probs().end());
  }();
  return t;
}

ReverseRowFn bench_rows() {
  const NoiseSchedule s(16, 2, 32, 0.3);
  return [s](int n, StateIndex, std::span<const Symbol> from, std::span<double> row) {
    std::vector<double> cond = exact_conditional(bench_model(), from, s.coordinate_at(n));
    reverse_row_from_conditional(cond, from[s.coordinate_at(n) - 1], s.a(), s.b(), row);
  };
}

struct GradientCase {
  Mlp net;
  std::vector<double> features;
  std::vector<int> targets;
};

const GradientCase& gradient_case() {
  static const GradientCase c = [] {
    Rng rng(3);
    const int q = 16, p = 2, batch = 512;
    const MlpShape shape{input_dim(q, p), 64, 2, p};
    GradientCase g{Mlp::initialized(shape, rng), {}, {}};
    for (int i = 0; i < batch * shape.input_dim; ++i) g.features.push_back(2.0 * uniform01(rng) - 1.0);
    for (int i = 0; i < batch; ++i) g.targets.push_back(uniform_below(rng, p));
    return g;
  }();
  return c;
}

const std::vector<double>& point_cloud() {
  static const std::vector<double> x = [] {
    Rng rng(5);
    std::vector<double> v(2000 * 16);
    for (double& e : v) e = coin(rng) ? 1.0 : -1.0;
    return v;
  }();
  return x;
}

void BM_GibbsWeights_Serial(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(serial::gibbs_log_weights(bench_model()));
}
void BM_GibbsWeights_Parallel(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(kernels::gibbs_log_weights(bench_model()));
}

void BM_PushForward_Serial(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(serial::push_forward_table(bench_table(), 16, 2, 5, 0.35, 0.65));
}
void BM_PushForward_Parallel(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(kernels::push_forward_table(bench_table(), 16, 2, 5, 0.35, 0.65));
}

void BM_ReverseStep_Serial(benchmark::State& st) {
  const auto rows = bench_rows();
  for (auto _ : st) benchmark::DoNotOptimize(serial::reverse_step_table(bench_table(), 16, 2, 4, 5, rows));
}
void BM_ReverseStep_Parallel(benchmark::State& st) {
  const auto rows = bench_rows();
  for (auto _ : st) benchmark::DoNotOptimize(kernels::reverse_step_table(bench_table(), 16, 2, 4, 5, rows));
}

void BM_BatchGradient_Serial(benchmark::State& st) {
  const auto& g = gradient_case();
  std::vector<double> grad(g.net.param_count());
  for (auto _ : st) benchmark::DoNotOptimize(serial::batch_gradient(g.net, g.features, g.targets, 1.0, grad));
}
void BM_BatchGradient_Parallel(benchmark::State& st) {
  const auto& g = gradient_case();
  std::vector<double> grad(g.net.param_count());
  for (auto _ : st) benchmark::DoNotOptimize(kernels::batch_gradient(g.net, g.features, g.targets, 1.0, grad));
}

void BM_KernelSum_Serial(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(serial::gaussian_kernel_sum(point_cloud(), point_cloud(), 16, 4.0, true));
}
void BM_KernelSum_Parallel(benchmark::State& st) {
  for (auto _ : st)
    benchmark::DoNotOptimize(kernels::gaussian_kernel_sum(point_cloud(), point_cloud(), 16, 4.0, true));
}

}  // namespace

BENCHMARK(BM_GibbsWeights_Serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GibbsWeights_Parallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PushForward_Serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PushForward_Parallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ReverseStep_Serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ReverseStep_Parallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchGradient_Serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchGradient_Parallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_KernelSum_Serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_KernelSum_Parallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
