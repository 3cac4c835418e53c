#include <benchmark/benchmark.h>

#include <array>
#include <vector>

#include "dipolescope/estimation.hpp"
#include "dipolescope/harness.hpp"
#include "dipolescope/wigner.hpp"

namespace ds = dipolescope;
namespace k = dipolescope::constants;

namespace {

void Wigner6j(benchmark::State& state) {
    const std::vector<std::array<int, 6>> args = {
        {1, 3, 2, 10, 8, 7}, {1, 3, 2, 8, 8, 7}, {1, 3, 2, 6, 8, 7}, {1, 3, 2, 8, 6, 7}};
    std::size_t i = 0;
    for (auto _ : state) {
        const auto& a = args[i++ & 3];
        benchmark::DoNotOptimize(ds::wigner_6j(a[0], a[1], a[2], a[3], a[4], a[5]));
    }
}
BENCHMARK(Wigner6j);

void PhaseShift(benchmark::State& state) {
    const auto line = ds::cesium_d2();
    ds::TrappedSample sample;
    sample.column_density = {{6, 3e12}, {8, 1e13}};
    for (auto _ : state) {
        benchmark::DoNotOptimize(ds::phase_shift(sample, line, k::two_pi * 100e6));
    }
}
BENCHMARK(PhaseShift);

void LoadingCurve(benchmark::State& state) {
    const ds::LoadingParams comp{1.34e7, 831.0, 3.5, 1.1e-4};
    std::vector<double> grid;
    for (int i = 0; i < 60; ++i) grid.push_back(2e-4 + 1.2 * i / 59.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(ds::loading_curve(comp, 0.0, grid));
    }
}
BENCHMARK(LoadingCurve);

void LossClosedForm(benchmark::State& state) {
    const ds::LossParams p{21.0, 2.3e-4};
    for (auto _ : state) {
        benchmark::DoNotOptimize(ds::loss_curve_closed_form(p, 1e5, 0.05));
    }
}
BENCHMARK(LossClosedForm);

void SimulatePulseTrain(benchmark::State& state) {
    const auto line = ds::cesium_d2();
    ds::ProbePulseConfig probe;
    probe.detuning = k::two_pi * 100e6;
    probe.waist = 20e-6;
    probe.duration = 2e-6;
    probe.period = 6e-6;
    probe.pulse_count = static_cast<int>(state.range(0));
    probe.power = 1e-6;
    ds::NoiseConfig noise;
    noise.rng_seed = 1;
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            ds::simulate_pulse_train(probe, [](double) { return 0.01; }, noise, line));
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(SimulatePulseTrain)->Range(100, 10000)->Complexity();

void TwoPointVariance(benchmark::State& state) {
    const auto line = ds::cesium_d2();
    ds::ProbePulseConfig probe;
    probe.detuning = k::two_pi * 100e6;
    probe.waist = 20e-6;
    probe.duration = 2e-6;
    probe.period = 6e-6;
    probe.pulse_count = 1000;
    probe.power = 1e-6;
    ds::NoiseConfig noise;
    noise.rng_seed = 1;
    const auto rec = ds::simulate_pulse_train(probe, [](double) { return 0.0; }, noise, line);
    for (auto _ : state) {
        benchmark::DoNotOptimize(ds::two_point_variance(rec, 1));
    }
}
BENCHMARK(TwoPointVariance);

void BallisticMcOracle(benchmark::State& state) {
    ds::BallisticParams bp;
    bp.temperature = 15e-6;
    bp.radial_freq = 275.0;
    bp.probe_waist = 20e-6;
    for (auto _ : state) {
        benchmark::DoNotOptimize(ds::ballistic_mc_oracle(bp, 2e-3, 100000, 7));
    }
}
BENCHMARK(BallisticMcOracle);

void FitLoss(benchmark::State& state) {
    const ds::LossParams truth{21.0, 2.3e-4};
    ds::FitData data;
    for (int i = 0; i < 40; ++i) {
        data.t.push_back(1e-3 + 0.25 * i / 39.0);
        data.y.push_back(ds::loss_curve_closed_form(truth, 1e5, data.t.back()));
        data.sigma.push_back(37.0);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(ds::fit_loss(data));
    }
}
BENCHMARK(FitLoss);

void TimeOfFlightScenario(benchmark::State& state) {
    auto s = ds::default_scenario("time_of_flight");
    s.seed = 3;
    for (auto _ : state) {
        benchmark::DoNotOptimize(ds::run_scenario(s));
    }
}
BENCHMARK(TimeOfFlightScenario);

}  // namespace

int main(int argc, char** argv) {
    ::benchmark::Initialize(&argc, argv);
    if (::benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
    ::benchmark::RunSpecifiedBenchmarks();
    ::benchmark::Shutdown();
    return 0;
}
