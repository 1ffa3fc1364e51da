#include <benchmark/benchmark.h>

#include <random>

#include "delaycast/em.hpp"
#include "delaycast/glm.hpp"
#include "delaycast/inference.hpp"
#include "delaycast/simulate.hpp"

using namespace delaycast;

namespace {

RunoffTriangle make_triangle(long tau) {
    auto cfg = make_default_scenario(tau + 30, 42);
    auto sim = simulate_portfolio(cfg);
    return simulated_triangle(sim, cfg, tau);
}

OccurrenceSpec bench_occurrence() {
    OccurrenceSpec occ;
    occ.toggles = {false, true, false, false, false};
    return occ;
}

ReportingSpec bench_reporting(ReportingSpec::Kind kind) {
    ReportingSpec rep;
    rep.kind = kind;
    rep.week_toggles = {false, true, false, false, false};
    return rep;
}

void bm_fit_em_matrix(benchmark::State& state) {
    auto tri = make_triangle(state.range(0));
    for (auto _ : state) {
        auto fit = fit_em(tri, bench_occurrence(),
                          bench_reporting(ReportingSpec::Kind::week_matrix));
        benchmark::DoNotOptimize(fit.trace.back().loglik);
    }
}
BENCHMARK(bm_fit_em_matrix)->Arg(200)->Arg(365)->Unit(benchmark::kMillisecond);

void bm_fit_em_reverse(benchmark::State& state) {
    auto tri = make_triangle(state.range(0));
    for (auto _ : state) {
        auto fit = fit_em(tri, bench_occurrence(),
                          bench_reporting(ReportingSpec::Kind::week_reverse));
        benchmark::DoNotOptimize(fit.trace.back().loglik);
    }
}
BENCHMARK(bm_fit_em_reverse)->Arg(200)->Unit(benchmark::kMillisecond);

void bm_delay_table(benchmark::State& state) {
    long tau = state.range(0);
    auto tri = make_triangle(tau);
    auto fit = fit_em(tri, bench_occurrence(),
                      bench_reporting(ReportingSpec::Kind::week_matrix));
    for (auto _ : state) {
        DelayTable table(fit.model.reporting, tri.calendar(), tau);
        benchmark::DoNotOptimize(table.reported_mass(1));
    }
}
BENCHMARK(bm_delay_table)->Arg(365)->Arg(730)->Unit(benchmark::kMillisecond);

void bm_e_step(benchmark::State& state) {
    long tau = state.range(0);
    auto tri = make_triangle(tau);
    auto fit = fit_em(tri, bench_occurrence(),
                      bench_reporting(ReportingSpec::Kind::week_matrix));
    for (auto _ : state) {
        auto counts = e_step(fit.model, tri);
        benchmark::DoNotOptimize(counts.row_totals.sum());
    }
}
BENCHMARK(bm_e_step)->Arg(365)->Unit(benchmark::kMillisecond);

void bm_poisson_glm(benchmark::State& state) {
    int n = static_cast<int>(state.range(0));
    std::mt19937 rng(7);
    std::normal_distribution<double> normal(0.0, 0.5);
    std::poisson_distribution<long> pois(6.0);
    DesignMatrix d;
    d.X = Eigen::MatrixXd::Ones(n, 8);
    for (int i = 0; i < n; ++i)
        for (int j = 1; j < 8; ++j) d.X(i, j) = normal(rng);
    d.names.assign(8, "x");
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y[i] = static_cast<double>(pois(rng));
    for (auto _ : state) {
        auto fit = fit_weighted_poisson(d, y);
        benchmark::DoNotOptimize(fit.loglik);
    }
}
BENCHMARK(bm_poisson_glm)->Arg(365)->Arg(2000)->Unit(benchmark::kMillisecond);

void bm_observed_information(benchmark::State& state) {
    long tau = state.range(0);
    auto tri = make_triangle(tau);
    auto fit = fit_em(tri, bench_occurrence(),
                      bench_reporting(ReportingSpec::Kind::week_matrix));
    ParameterPacker packer(fit.model, tri);
    for (auto _ : state) {
        auto info = observed_information(fit.model, tri, packer);
        benchmark::DoNotOptimize(info.I_o(0, 0));
    }
}
BENCHMARK(bm_observed_information)->Arg(150)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
