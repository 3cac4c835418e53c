#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dipolescope/estimation.hpp"
#include "dipolescope/interferometer.hpp"

// Scenario layer: wires the forward models, the interferometer and the fit
// drivers into end-to-end synthetic measurements with probe and reference
// pulse trains, multi-run averaging and machine-readable reports.

namespace dipolescope {

struct LossVsDetuningTruth {
    double one_body = 47.0;            // 1/s, held fixed across the sweep
    double dark_two_body = 2.3e-4;     // beta "in the dark", 1/(atom s)
    double light_two_body = 1.1e-2;    // beta at the reference detuning
    double reference_detuning = -16.0; // units of gamma
    double exponent = 2.0;             // beta ~ |ref/detuning|^exponent
};

struct Scenario {
    std::string name;  // noise_scaling | loading | losses | loss_vs_detuning |
                       // breathing | frequency_vs_power | time_of_flight | depumping
    ProbePulseConfig probe;
    double trap_power = 3.5;           // W
    double trap_waist = 40e-6;         // m
    double trap_wavelength = 1030e-9;  // m
    NoiseConfig noise;
    InterferometerConfig interferometer;
    int run_count = 20;
    std::uint64_t seed = 1;
    double atom_number = 1e5;  // effective F=4 atoms in the probe volume

    // truth parameters (used by the matching scenario only)
    LoadingParams loading_truth;
    LossParams loss_truth;
    double tof_temperature = 15e-6;     // K
    double tof_radial_freq = 275.0;     // Hz
    bool tof_include_depumping = true;
    double breathing_radial_freq = 226.5;  // Hz
    double breathing_damping_time = 4e-3;  // s
    double breathing_depth = 0.2;
    double depump_repump_return = 0.0;
    LossVsDetuningTruth loss_vs_detuning_truth;

    // grids
    std::vector<double> time_grid;      // s (loading / losses hold times)
    std::vector<double> photon_grid;    // photons per pulse (noise_scaling)
    std::vector<double> power_grid;     // W (frequency_vs_power, depumping)
    std::vector<double> detuning_grid;  // units of gamma (loss_vs_detuning)

    void validate() const;
};

Scenario default_scenario(const std::string& name);
Scenario scenario_from_json(const std::string& text);  // strict keys, unit-suffixed
std::string scenario_to_json(const Scenario& s);

struct ScenarioResult {
    std::string name;
    std::vector<std::string> dataset_columns;
    std::vector<std::vector<double>> dataset;
    std::vector<std::string> curve_columns;
    std::vector<std::vector<double>> curve;  // plot-ready fitted model
    std::map<std::string, double> metrics;
    std::string report_json;
    bool converged = true;
};

ScenarioResult run_scenario(const Scenario& scenario, const AtomicLine& line);
ScenarioResult run_scenario(const Scenario& scenario);  // default_line()

// Ratio correction of probe-light depumping: both trains are normalized to
// their first pulse and divided elementwise; returns remaining fractions.
std::vector<double> depump_correction(std::span<const double> probe_signal,
                                      std::span<const double> dipole_on_reference);

// Writes dataset.csv, fit_curve.csv and report.json into `directory`,
// staging in "<directory>.partial" and renaming once complete.
void write_scenario_artifacts(const ScenarioResult& result, const std::string& directory);

}  // namespace dipolescope
