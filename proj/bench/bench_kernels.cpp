// Serial reference vs OpenMP kernels: feature map and collapsed-Gaussian cache rebuild.

#include "sirf/engine.hpp"
#include "sirf/rff.hpp"
#include "sirf/rng.hpp"

#include <benchmark/benchmark.h>

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    sirf::Rng rng(seed);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    return m;
}

void BM_FeatureMapSerial(benchmark::State& state) {
    const auto n = state.range(0);
    const Eigen::MatrixXd latent = random_matrix(n, 5, 1);
    const Eigen::MatrixXd W = random_matrix(50, 5, 2);
    for (auto _ : state) benchmark::DoNotOptimize(sirf::feature_map_serial(latent, W));
}

void BM_FeatureMapParallel(benchmark::State& state) {
    const auto n = state.range(0);
    const Eigen::MatrixXd latent = random_matrix(n, 5, 1);
    const Eigen::MatrixXd W = random_matrix(50, 5, 2);
    for (auto _ : state) benchmark::DoNotOptimize(sirf::feature_map(latent, W));
}

sirf::ModelState bench_state(const sirf::Dataset& data, const sirf::Hyperparameters& hp) {
    return sirf::init_state(data, hp, 7, 4);
}

void rebuild(benchmark::State& state, bool parallel) {
    sirf::Hyperparameters hp;
    const sirf::Dataset data = sirf::make_dataset(random_matrix(state.range(0), 36, 3), sirf::Likelihood::Gaussian);
    const sirf::ModelState s = bench_state(data, hp);
    sirf::CollapsedGaussianEngine engine(data, hp, parallel);
    for (auto _ : state) {
        engine.reset(s);
        benchmark::DoNotOptimize(engine.total());
    }
}

void BM_CollapsedRebuildSerial(benchmark::State& state) { rebuild(state, false); }
void BM_CollapsedRebuildParallel(benchmark::State& state) { rebuild(state, true); }

void row_deltas(benchmark::State& state, bool parallel) {
    sirf::Hyperparameters hp;
    const sirf::Dataset data = sirf::make_dataset(random_matrix(state.range(0), 36, 3), sirf::Likelihood::Gaussian);
    const sirf::ModelState s = bench_state(data, hp);
    sirf::CollapsedGaussianEngine engine(data, hp, parallel);
    engine.reset(s);
    sirf::Rng rng(5);
    for (auto _ : state) benchmark::DoNotOptimize(engine.row_delta(0, rng.normal_vector(4)));
}

void BM_RowDeltaSerial(benchmark::State& state) { row_deltas(state, false); }
void BM_RowDeltaParallel(benchmark::State& state) { row_deltas(state, true); }

} // namespace

BENCHMARK(BM_FeatureMapSerial)->Arg(150)->Arg(1000);
BENCHMARK(BM_FeatureMapParallel)->Arg(150)->Arg(1000);
BENCHMARK(BM_CollapsedRebuildSerial)->Arg(150);
BENCHMARK(BM_CollapsedRebuildParallel)->Arg(150);
BENCHMARK(BM_RowDeltaSerial)->Arg(150);
BENCHMARK(BM_RowDeltaParallel)->Arg(150);

BENCHMARK_MAIN();
