#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "pnrsim/absorption.hpp"
#include "pnrsim/circuit.hpp"
#include "pnrsim/fidelity.hpp"
#include "pnrsim/photonstats.hpp"
#include "pnrsim/signalproc.hpp"

using namespace pnrsim;

namespace {

WireProbabilityVector device_wires() { return per_wire_probabilities(AbsorptionModel::measured_device(Polarization::TE)); }

void BM_Transient(benchmark::State& state) {
    const DetectorCircuit c;
    const auto events = first_wires_event(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(simulate_transient(c, events, 40e-9, 1e-12));
}
BENCHMARK(BM_Transient)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_DetectionDistribution(benchmark::State& state) {
    const auto w = device_wires();
    const int n = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(detection_distribution(n, w, 0.316));
}
BENCHMARK(BM_DetectionDistribution)->Arg(2)->Arg(6)->Arg(12);

void BM_PoissonMixture(benchmark::State& state) {
    const auto w = device_wires();
    for (auto _ : state) benchmark::DoNotOptimize(poisson_mixture(5.0, w, 0.316));
}
BENCHMARK(BM_PoissonMixture);

void BM_MonteCarlo(benchmark::State& state) {
    SourceConfig source;
    source.mean_photons = 1.0;
    McOptions opt;
    opt.workers = static_cast<int>(state.range(0));
    const auto w = device_wires();
    for (auto _ : state) {
        benchmark::DoNotOptimize(monte_carlo_run(source, w, {}, {}, 1'000'000, 1, false, opt));
    }
    state.SetItemsProcessed(state.iterations() * 1'000'000);
}
BENCHMARK(BM_MonteCarlo)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_Filters(benchmark::State& state) {
    PulseTrace t;
    t.dt = 1e-12;
    t.samples.resize(40000);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    for (auto& v : t.samples) v = g(rng);
    const auto spec = FilterSpec::amplifier();
    for (auto _ : state) benchmark::DoNotOptimize(apply_filters(t, spec));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(t.samples.size()));
}
BENCHMARK(BM_Filters);

void BM_Fidelity(benchmark::State& state) {
    const auto model = default_peak_model();
    for (auto _ : state) benchmark::DoNotOptimize(discrimination_fidelity(model));
}
BENCHMARK(BM_Fidelity);

}  // namespace

BENCHMARK_MAIN();
