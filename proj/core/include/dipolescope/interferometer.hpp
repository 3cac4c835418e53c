#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dipolescope/atomic_physics.hpp"
#include "dipolescope/constants.hpp"

// Forward model of the pulsed balanced-homodyne Mach-Zehnder detection and
// the estimators applied to recorded pulse trains.

namespace dipolescope {

struct NoiseConfig {
    bool shot_noise_enabled = true;
    double classical_amplitude_rms = 0.0;   // fractional power noise per pulse
    double classical_phase_rms = 0.0;       // rad per pulse
    double slow_phase_drift_rate = 0.0;     // rad/s, deterministic ramp
    double phase_random_walk_rms = 0.0;     // rad per pulse step
    std::uint64_t rng_seed = 0;
    void validate() const;
};

struct InterferometerConfig {
    double visibility = 0.98;
    double fringe_offset = constants::pi / 2;  // half fringe
    bool balanced = true;                      // false: single detector, no cancellation
};

struct PulseTrainRecord {
    std::vector<double> timestamps;  // s, spacing = probe period
    std::vector<double> areas;       // photon-equivalent counts
    double photon_number = 0.0;      // n per pulse
    double visibility = 1.0;
    double fringe_offset = 0.0;      // rad
    std::uint64_t seed = 0;

    std::size_t size() const { return areas.size(); }
    std::string to_csv() const;          // "timestamp,area" lines with header
    std::string to_json() const;         // envelope carrying n, V, phi0, seed
    static PulseTrainRecord from_json(const std::string& text);
};

using PhaseTrajectory = std::function<double(double)>;

// Pulse areas a_k = (n V / 2) cos(phi0 - phi(t_k) - phi_noise) plus shot
// noise of variance n; at the half fringe the mean is (n V / 2) sin(phi).
// Unbalanced mode records one output port including the common-mode term.
PulseTrainRecord simulate_pulse_train(const ProbePulseConfig& probe,
                                      const PhaseTrajectory& phase, const NoiseConfig& noise,
                                      const AtomicLine& line,
                                      const InterferometerConfig& ifo = {});

// sigma^2(tau0) = sum_k (a_{k+m} - a_k)^2 / (2 (K - m)), tau0 = m T
double two_point_variance(const PulseTrainRecord& record, int separation);

struct PhaseEstimates {
    std::vector<double> phase;          // rad, clamped to [-pi/2, pi/2]
    std::vector<std::uint8_t> clamped;  // 1 where |2(a-r)/(nV)| exceeded 1
};

// phi_k = asin(2 (a_k - r_k) / (n V)); requires equal lengths and photon numbers
PhaseEstimates phase_from_record(const PulseTrainRecord& record,
                                 const PulseTrainRecord& reference);

struct LogLogSlope {
    double slope = 0.0;
    double std_error = 0.0;
    double intercept = 0.0;
};

// ordinary least squares of log sigma^2 against log n; needs >= 3 positive points
LogLogSlope noise_scaling_exponent(std::span<const std::pair<double, double>> variance_vs_n);

}  // namespace dipolescope
