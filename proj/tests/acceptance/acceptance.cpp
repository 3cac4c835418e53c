// Acceptance suite: runs every headline check end to end and prints one
// PASS/FAIL line per criterion. Exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "dipolescope/harness.hpp"
#include "dipolescope/ode.hpp"

namespace ds = dipolescope;
namespace k = dipolescope::constants;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& what) {
    std::printf("[%s] criterion %2d: %s\n", ok ? "PASS" : "FAIL", id, what.c_str());
    if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

char sbuf[512];

// 1. two-point variance scales linearly with photon number under shot noise
//    and quadratically with unbalanced classical amplitude noise
void criterion_noise_slopes() {
    const auto t0 = std::chrono::steady_clock::now();
    auto s = ds::default_scenario("noise_scaling");
    s.seed = 20260801;
    const auto shot = ds::run_scenario(s);
    const double slope1 = shot.metrics.at("slope");

    auto cl = s;
    cl.noise.classical_amplitude_rms = 0.01;
    cl.interferometer.balanced = false;
    const auto classical = ds::run_scenario(cl);
    const double slope2 = classical.metrics.at("slope");
    const double dt = seconds_since(t0);

    const bool ok = std::abs(slope1 - 1.0) <= 0.05 && std::abs(slope2 - 2.0) <= 0.10 && dt < 10.0;
    std::snprintf(sbuf, sizeof sbuf,
                  "noise scaling: shot slope %.3f (want 1.00 +- 0.05), classical unbalanced "
                  "slope %.3f (want 2.0 +- 0.1), %.1f s (< 10 s)",
                  slope1, slope2, dt);
    report(1, ok, sbuf);
}

// 2. excitation probability at the working point, and the theory line through
//    the fitted depumping points
void criterion_pe() {
    const auto line = ds::cesium_d2();
    ds::ProbePulseConfig probe;
    probe.detuning = k::two_pi * 100e6;
    probe.waist = 20e-6;
    probe.duration = 2e-6;
    probe.period = 6e-6;
    probe.pulse_count = 1;
    probe.power = 1.3e6 * k::planck * k::speed_of_light / line.wavelength / probe.duration;
    const double pe = ds::excitation_probability(probe, line);
    const bool pe_ok = pe >= 0.04 * 0.8 && pe <= 0.04 * 1.2;

    auto s = ds::default_scenario("depumping");
    s.seed = 7;
    const auto res = ds::run_scenario(s);
    const double dev = res.metrics.at("max_rel_deviation_from_theory");
    // theory line monotone and linear by construction; fitted points within 10%
    const bool line_ok = dev <= 0.10;

    std::snprintf(sbuf, sizeof sbuf,
                  "p_e = %.4f at the quoted probe settings (want 0.04 +- 20%%); fitted "
                  "depumping points within %.1f%% of the 21.2 um theory line (want <= 10%%)",
                  pe, 100.0 * dev);
    report(2, pe_ok && line_ok, sbuf);
}

// 3. dipole trap depth
void criterion_depth() {
    const auto props = ds::dipole_trap_properties(3.5, 40e-6, 1030e-9, ds::cesium_d2());
    const double uk = props.depth_kelvin * 1e6;
    std::snprintf(sbuf, sizeof sbuf, "U/kB = %.0f uK at 3.5 W, 40 um, 1030 nm (want 380 +- 20%%)",
                  uk);
    report(3, uk >= 380.0 * 0.8 && uk <= 380.0 * 1.2, sbuf);
}

// 4. loading/loss round trips for every fitted-parameter column
void criterion_table_roundtrip() {
    const auto t0 = std::chrono::steady_clock::now();
    const int seeds = 100;
    const int need = 80;
    bool all_ok = true;
    std::string detail;

    struct LoadingCase {
        const char* tag;
        ds::LoadingParams truth;
        int runs;
        std::vector<double> tol;  // R0, gamma_MOT, Gamma_L, beta_L
        bool molasses_grid;
    };
    const std::vector<LoadingCase> loading_cases{
        {"compression", {1.34e7, 831.0, 3.5, 1.1e-4}, 20, {0.15, 0.15, 0.15, 0.15}, false},
        // quoted uncertainties: R0 = 3.2(6)e4, beta_L = 3(1)e-5
        {"molasses", {3.2e4, 5.0, 1.2, 3e-5}, 200, {0.19, 0.15, 0.15, 0.3333}, true},
    };
    for (const auto& lc : loading_cases) {
        auto s = ds::default_scenario("loading");
        s.loading_truth = lc.truth;
        s.run_count = lc.runs;
        if (lc.molasses_grid) {
            s.probe.period = 10e-6;
            s.time_grid.clear();
            for (int i = 0; i < 30; ++i)
                s.time_grid.push_back(0.01 + (0.30 - 0.01) * i / 29.0);
            for (int i = 0; i < 60; ++i)
                s.time_grid.push_back(0.33 * std::pow(5.0 / 0.33, i / 59.0));
        }
        int ok[4] = {0, 0, 0, 0};
        for (int seed = 0; seed < seeds; ++seed) {
            s.seed = 1000 + seed;
            const auto res = ds::run_scenario(s);
            const double est[4] = {res.metrics.at("load_rate"), res.metrics.at("mot_decay"),
                                   res.metrics.at("one_body"), res.metrics.at("two_body")};
            const double truth[4] = {lc.truth.load_rate, lc.truth.mot_decay, lc.truth.one_body,
                                     lc.truth.two_body};
            for (int p = 0; p < 4; ++p)
                if (std::abs(est[p] - truth[p]) / truth[p] < lc.tol[p]) ++ok[p];
        }
        for (int p = 0; p < 4; ++p) all_ok = all_ok && ok[p] >= need;
        char part[128];
        std::snprintf(part, sizeof part, " %s %d/%d/%d/%d;", lc.tag, ok[0], ok[1], ok[2], ok[3]);
        detail += part;
    }

    struct LossCase {
        const char* tag;
        ds::LossParams truth;
        double t_max;
        std::vector<double> tol;  // Gamma, beta (paper uncertainties)
    };
    const std::vector<LossCase> loss_cases{
        {"light", {47.0, 1.1e-2}, 0.1, {20.0 / 47.0, 0.1 / 1.1}},
        {"no-light", {21.0, 2.3e-4}, 0.25, {1.0 / 21.0, 0.2 / 2.3}},
    };
    for (const auto& lc : loss_cases) {
        auto s = ds::default_scenario("losses");
        s.loss_truth = lc.truth;
        s.time_grid.clear();
        for (int i = 0; i < 40; ++i)
            s.time_grid.push_back(2e-4 * std::pow(lc.t_max / 2e-4, i / 39.0));
        int ok[2] = {0, 0};
        for (int seed = 0; seed < seeds; ++seed) {
            s.seed = 5000 + seed;
            const auto res = ds::run_scenario(s);
            if (std::abs(res.metrics.at("one_body") - lc.truth.one_body) / lc.truth.one_body <
                lc.tol[0])
                ++ok[0];
            if (std::abs(res.metrics.at("two_body") - lc.truth.two_body) / lc.truth.two_body <
                lc.tol[1])
                ++ok[1];
        }
        all_ok = all_ok && ok[0] >= need && ok[1] >= need;
        char part[96];
        std::snprintf(part, sizeof part, " %s %d/%d;", lc.tag, ok[0], ok[1]);
        detail += part;
    }

    const double dt = seconds_since(t0);
    all_ok = all_ok && dt < 60.0;
    std::snprintf(sbuf, sizeof sbuf,
                  "table round trip, successes per parameter out of %d (want >= %d):%s %.1f s "
                  "(< 60 s)",
                  seeds, need, detail.c_str(), dt);
    report(4, all_ok, sbuf);
}

// 5. closed-form loss solution against the adaptive integrator
void criterion_riccati() {
    double worst = 0.0;
    for (const double g : {3.5, 12.0, 21.0, 35.0, 47.0}) {
        for (const double b : {3e-5, 1.1e-4, 2.3e-4, 1e-3, 1.1e-2}) {
            const ds::LossParams lp{g, b};
            std::vector<double> grid{0.0};
            for (int i = 1; i <= 40; ++i) grid.push_back(5.0 / g * i / 40.0);
            const auto ode = ds::integrate_ode(
                [&](double, double n) { return -g * n - b * n * n; }, 1e5, grid,
                {.rel_tol = 1e-11, .abs_tol = 1e-6});
            for (std::size_t i = 1; i < grid.size(); ++i) {
                const double closed = ds::loss_curve_closed_form(lp, 1e5, grid[i]);
                worst = std::max(worst, std::abs(closed - ode[i]) / closed);
            }
        }
    }
    std::snprintf(sbuf, sizeof sbuf,
                  "closed-form vs adaptive RK across the 5x5 parameter grid: max rel err "
                  "%.2e (want < 1e-6)",
                  worst);
    report(5, worst < 1e-6, sbuf);
}

// 6. escape-probability formula against the 1e6-sample Monte-Carlo overlap
void criterion_ballistic() {
    ds::BallisticParams bp;
    bp.temperature = 15e-6;
    bp.radial_freq = 275.0;
    bp.probe_waist = 20e-6;
    double worst = 0.0;
    for (int i = 1; i <= 20; ++i) {
        const double t = 4e-3 * i / 20.0;
        const double diff = std::abs(ds::ballistic_escape_probability(bp, t) -
                                     ds::ballistic_mc_oracle(bp, t, 1000000, 42 + i));
        worst = std::max(worst, diff);
    }
    std::snprintf(sbuf, sizeof sbuf,
                  "escape probability vs 1e6-sample Monte Carlo at 20 time points: max |dP| "
                  "%.4f (want < 0.005)",
                  worst);
    report(6, worst < 0.005, sbuf);
}

// 7. temperature fit coverage at the quoted pulse settings
void criterion_temperature() {
    const auto t0 = std::chrono::steady_clock::now();
    auto s = ds::default_scenario("time_of_flight");
    const int seeds = 200;
    int hits = 0;
    for (int seed = 0; seed < seeds; ++seed) {
        s.seed = 42000 + seed;
        const auto res = ds::run_scenario(s);
        const bool t_ok = std::abs(res.metrics.at("temperature_k") - 15e-6) <= 2e-6;
        const bool nu_ok = std::abs(res.metrics.at("radial_freq_hz") - 275.0) <= 4.0;
        if (t_ok && nu_ok) ++hits;
    }
    const double dt = seconds_since(t0);
    const bool ok = hits >= static_cast<int>(0.68 * seeds) && dt < 60.0;
    std::snprintf(sbuf, sizeof sbuf,
                  "time of flight: T within 15 +- 2 uK and nu_r within 275 +- 4 Hz in %d/%d "
                  "seeds (want >= %d), %.1f s (< 60 s)",
                  hits, seeds, static_cast<int>(0.68 * seeds), dt);
    report(7, ok, sbuf);
}

// 8. breathing frequency and the waist from the frequency-power sweep
void criterion_breathing() {
    auto s = ds::default_scenario("breathing");
    s.seed = 453;
    const auto res = ds::run_scenario(s);
    const double nu = res.metrics.at("radial_freq_hz");
    const bool nu_ok = std::abs(nu - 226.5) <= 1.5;

    auto fv = ds::default_scenario("frequency_vs_power");
    fv.seed = 90;
    const auto sweep = ds::run_scenario(fv);
    const double waist_um = sweep.metrics.at("waist_m") * 1e6;
    const bool w_ok = std::abs(waist_um - 90.0) / 90.0 <= 0.02;

    std::snprintf(sbuf, sizeof sbuf,
                  "breathing: nu_r = %.2f Hz (want 226.5 +- 1.5); sweep waist = %.2f um "
                  "(want 90 +- 2%%)",
                  nu, waist_um);
    report(8, nu_ok && w_ok, sbuf);
}

// 9. transition-strength sum rule and the exact Cs D2 values
void criterion_strengths() {
    const auto table = ds::transition_strengths(ds::cesium_d2());
    const bool sums = std::abs(table.sum_over_excited(6) - 1.0) < 1e-12 &&
                      std::abs(table.sum_over_excited(8) - 1.0) < 1e-12;
    const bool values = std::abs(table.strength(8, 10) - 11.0 / 18.0) < 1e-12 &&
                        std::abs(table.strength(8, 8) - 7.0 / 24.0) < 1e-12 &&
                        std::abs(table.strength(8, 6) - 7.0 / 72.0) < 1e-12 &&
                        table.strength(6, 10) == 0.0;
    std::snprintf(sbuf, sizeof sbuf,
                  "sum rule to 1e-12 per F; S(4->5') = 11/18, S(4->4') = 7/24, S(4->3') = "
                  "7/72; selection rule");
    report(9, sums && values, sbuf);
}

// 10. bit-identical artifacts for identical seeds
void criterion_determinism() {
    auto s = ds::default_scenario("time_of_flight");
    s.seed = 777;
    const auto a = ds::run_scenario(s);
    const auto b = ds::run_scenario(s);
    bool same = a.report_json == b.report_json && a.dataset.size() == b.dataset.size();
    if (same)
        for (std::size_t i = 0; i < a.dataset.size(); ++i)
            for (std::size_t c = 0; c < a.dataset[i].size(); ++c)
                same = same && a.dataset[i][c] == b.dataset[i][c];
    ds::write_scenario_artifacts(a, "/tmp/dipolescope_acc_det");
    ds::write_scenario_artifacts(b, "/tmp/dipolescope_acc_det2");
    std::snprintf(sbuf, sizeof sbuf, "re-running a scenario with the same seed is bit-identical");
    report(10, same, sbuf);
}

}  // namespace

int main() {
    criterion_noise_slopes();
    criterion_pe();
    criterion_depth();
    criterion_table_roundtrip();
    criterion_riccati();
    criterion_ballistic();
    criterion_temperature();
    criterion_breathing();
    criterion_strengths();
    criterion_determinism();
    if (failures == 0)
        std::printf("all acceptance criteria passed\n");
    else
        std::printf("%d acceptance criteria FAILED\n", failures);
    return failures == 0 ? 0 : 1;
}
