#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "dipolescope/atomic_physics.hpp"
#include "dipolescope/constants.hpp"

// Time-evolution models of the trapped atom number and cloud geometry:
// loading/loss rate equations, breathing oscillation, ballistic escape and
// pulse-train depumping.

namespace dipolescope {

struct LoadingParams {
    double load_rate = 0.0;    // R0, atoms/s
    double mot_decay = 0.0;    // gamma_MOT, 1/s
    double one_body = 0.0;     // Gamma_L, 1/s
    double two_body = 0.0;     // beta_L, 1/(atom s)
    void validate() const;
};

struct LossParams {
    double one_body = 0.0;  // Gamma, 1/s
    double two_body = 0.0;  // beta, 1/(atom s)
    void validate() const;
};

struct BallisticParams {
    double temperature = 0.0;  // K
    double radial_freq = 0.0;  // nu_r, Hz
    double probe_waist = 0.0;  // w0, m
    double gravity = constants::standard_gravity;
    double mass = constants::cesium_mass;

    double sigma_r0() const;  // sqrt(kB T / (M omega_r^2))
    double sigma_v() const;   // sqrt(kB T / M)
    void validate() const;
};

struct DepumpParams {
    std::map<int, double> excitation;              // 2F' -> p_e per pulse
    std::map<int, std::map<int, double>> branching;  // 2F' -> (2F -> b), rows sum to 1
    double repump_return = 0.0;                    // per pulse interval
    // excited manifold feeding the dark ground level; 0 = deduce as the
    // highest F' whose branching row reaches more than one ground level
    int leaky_two_fp = 0;
    void validate() const;
    int resolve_leaky() const;
};

// dN4/dt = R0 exp(-gamma_MOT t) - Gamma_L N4 - beta_L N4^2, integrated with
// the adaptive RK pair at rel_tol 1e-9.
std::vector<double> loading_curve(const LoadingParams& params, double n0,
                                  std::span<const double> t_grid);

// N(t) = Gamma N0 e^{-Gamma t} / (Gamma + beta N0 (1 - e^{-Gamma t})),
// with the Gamma -> 0 limit N0 / (1 + beta N0 t).
double loss_curve_closed_form(const LossParams& params, double n0, double t);

// fraction of atoms in the probe volume during a revived-trap breathing
// oscillation; the signal frequency is exactly 2 nu_r
double breathing_signal(double t, double radial_freq_hz, double damping_time, double depth,
                        double baseline);

std::vector<double> trap_frequency_vs_power(std::span<const double> powers, double waist,
                                            double trap_wavelength, const AtomicLine& line);

// Escape probability of a released cloud from the Gaussian probe volume
// (2-D radial overlap with gravity), P(0) = 0, nondecreasing, -> 1.
double ballistic_escape_probability(const BallisticParams& params, double t);

// Monte-Carlo evaluation of the same overlap: Gaussian positions and
// velocities, one axis translated by g t^2 / 2, atoms weighted by
// exp(-2 r^2 / w0^2).
double ballistic_mc_oracle(const BallisticParams& params, double t, std::size_t samples,
                           std::uint64_t seed);

// Per-pulse two-ground-level depumping map with excited states adiabatically
// eliminated. Returns N4 before each of the `pulse_count + 1` pulse slots
// (index 0 = initial value); N3 + N4 is conserved exactly.
std::vector<double> depump_decay(const DepumpParams& params, int pulse_count, double n4_initial,
                                 double n_total);

}  // namespace dipolescope
