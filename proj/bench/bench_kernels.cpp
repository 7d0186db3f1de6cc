// Serial reference vs OpenMP kernels.

#include <benchmark/benchmark.h>

#include "flexnn/cost_model.hpp"
#include "flexnn/harness.hpp"
#include "flexnn/tensor.hpp"

using namespace flexnn;

namespace {

const LayerDesc kConv = make_conv("bench", 28, 28, 64, 3, 3, 64, 1, 1);

void BM_Conv2dRef(benchmark::State& st) {
    const Tensor4 in = gen_sparse_tensor(kConv.if_dims(), 0.5, 1), fl = gen_sparse_tensor(kConv.fl_dims(), 0.5, 2);
    for (auto _ : st) benchmark::DoNotOptimize(conv2d_ref(in, fl, kConv));
    st.SetItemsProcessed(st.iterations() * kConv.dense_macs());
}
BENCHMARK(BM_Conv2dRef)->Unit(benchmark::kMillisecond);

void BM_Conv2dOmp(benchmark::State& st) {
    const Tensor4 in = gen_sparse_tensor(kConv.if_dims(), 0.5, 1), fl = gen_sparse_tensor(kConv.fl_dims(), 0.5, 2);
    for (auto _ : st) benchmark::DoNotOptimize(conv2d(in, fl, kConv));
    st.SetItemsProcessed(st.iterations() * kConv.dense_macs());
}
BENCHMARK(BM_Conv2dOmp)->Unit(benchmark::kMillisecond);

const LayerDesc kSearch = make_conv("search", 14, 14, 256, 3, 3, 256, 1, 1);

void BM_FindOptimalSerial(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(find_optimal_serial(kSearch, HwConfig{}, Objective::Energy));
}
BENCHMARK(BM_FindOptimalSerial)->Unit(benchmark::kMillisecond);

void BM_FindOptimalOmp(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(find_optimal(kSearch, HwConfig{}, Objective::Energy));
}
BENCHMARK(BM_FindOptimalOmp)->Unit(benchmark::kMillisecond);

void BM_SparseHintSearch(benchmark::State& st) {
    const SparsityHint hint{SparsityMode::TwoSided, 0.61, 0.55};
    for (auto _ : st) benchmark::DoNotOptimize(find_optimal(kSearch, HwConfig{}, Objective::Cycles, hint));
}
BENCHMARK(BM_SparseHintSearch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
