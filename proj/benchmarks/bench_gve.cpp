#include "gve/dgp.hpp"
#include "gve/factor_iv.hpp"
#include "gve/wgve.hpp"

#include <benchmark/benchmark.h>

namespace {

gve::DgpDraw draw(int n, int j) {
    gve::DgpSpec spec;
    spec.n = n;
    spec.j = j;
    spec.seed = 3;
    return gve::generate(spec);
}

gve::PartitionScheme half_split(int j) {
    gve::IndexSet aj;
    gve::IndexSet bj;
    for (int g = 1; g < j; ++g) (g < j / 2 ? aj : bj).push_back(g);
    return gve::make_partition(j, 1, {0}, aj, bj);
}

void BM_GveFit(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const int j = static_cast<int>(state.range(1));
    const gve::DgpDraw d = draw(n, j);
    const gve::PartitionScheme s = half_split(j);
    for (auto _ : state) {
        benchmark::DoNotOptimize(gve::estimate_gve(gve::build_stacked_system(d.panel, s, gve::InstrumentKind::Z1)));
    }
}
BENCHMARK(BM_GveFit)->Args({100, 20})->Args({1000, 20})->Args({10000, 20});

void BM_Wgve(benchmark::State& state) {
    const int j = static_cast<int>(state.range(0));
    const auto first_stage = static_cast<gve::FirstStage>(state.range(1));
    const gve::DgpDraw d = draw(100, j);
    const gve::ResidualPanel res{d.panel.y(), gve::Vector()};
    const gve::NormalizationSet set = gve::enumerate_partitions(j, {0}, 1, 1);
    gve::WgveOptions opts;
    opts.first_stage = first_stage;
    for (auto _ : state) {
        benchmark::DoNotOptimize(gve::estimate_wgve(res, set, opts));
    }
}
BENCHMARK(BM_Wgve)
    ->Args({10, static_cast<int>(gve::FirstStage::BlockAverage)})
    ->Args({10, static_cast<int>(gve::FirstStage::Lasso)})
    ->Args({20, static_cast<int>(gve::FirstStage::Lasso)});

void BM_PcaFactors(benchmark::State& state) {
    const gve::DgpDraw d = draw(static_cast<int>(state.range(0)), 20);
    const gve::ResidualPanel res{d.panel.y(), gve::Vector()};
    for (auto _ : state) {
        benchmark::DoNotOptimize(gve::pca_factors(res, 1, gve::PcaNormalization::FirstGroup));
    }
}
BENCHMARK(BM_PcaFactors)->Arg(100)->Arg(1000);

}  // namespace
