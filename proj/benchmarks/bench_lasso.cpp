#include "gve/lasso.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

gve::Matrix normal_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
    std::normal_distribution<double> z;
    gve::Matrix out(rows, cols);
    for (Eigen::Index k = 0; k < out.size(); ++k) out.data()[k] = z(rng);
    return out;
}

void BM_LassoPlugIn(benchmark::State& state) {
    const auto n = state.range(0);
    const auto m = state.range(1);
    std::mt19937_64 rng(1);
    const gve::Matrix x = normal_matrix(rng, n, m);
    const gve::Vector y = 2.0 * x.col(0) - x.col(1) + 0.5 * normal_matrix(rng, n, 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(gve::lasso_first_stage(y, x, gve::PenaltySpec::plug_in()));
    }
}
BENCHMARK(BM_LassoPlugIn)->Args({50, 10})->Args({100, 20})->Args({400, 50})->Args({50, 100});

void BM_LassoFixed(benchmark::State& state) {
    std::mt19937_64 rng(2);
    const gve::Matrix x = normal_matrix(rng, 200, 100);
    const gve::Vector y = x.col(5) + normal_matrix(rng, 200, 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(gve::lasso_first_stage(y, x, gve::PenaltySpec::fixed(20.0)));
    }
}
BENCHMARK(BM_LassoFixed);

}  // namespace
