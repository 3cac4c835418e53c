#pragma once

#include <complex>
#include <map>
#include <string>
#include <utility>
#include <vector>

// Dispersive and absorptive atom-light formulas for an alkali D line probed
// far below saturation. Detunings and linewidths are angular frequencies
// (rad/s) throughout; conversion to/from Hz happens at the I/O boundary.

namespace dipolescope {

// One hyperfine manifold: total angular momentum F (doubled) and its energy
// offset within the fine-structure level, as an angular frequency.
struct HyperfineLevel {
    int two_f = 0;
    double offset = 0.0;  // rad/s, common zero per fine-structure level
};

struct AtomicLine {
    double wavelength = 0.0;  // m
    double hwhm = 0.0;        // gamma, rad/s
    double mass = 0.0;        // kg
    int two_ground_j = 0;
    int two_excited_j = 0;
    int two_nuclear_i = 0;
    std::vector<HyperfineLevel> ground;   // ascending F
    std::vector<HyperfineLevel> excited;  // ascending F, offsets strictly increasing

    int cycling_ground_f2() const { return ground.back().two_f; }
    int cycling_excited_f2() const { return excited.back().two_f; }
    double wave_number() const;
    double transition_frequency() const;  // omega_0 = 2 pi c / lambda, rad/s

    // throws std::invalid_argument if the manifold structure is inconsistent
    void validate() const;
};

// Embedded Cs D2 defaults (Steck data tables; splittings 5'-4' = 251.0916 MHz,
// 4'-3' = 201.2871 MHz, ground 4-3 = 9.192631770 GHz).
AtomicLine cesium_d2();

// Key/value constants file with unit-suffixed keys (see README). Throws on
// unknown keys or inconsistent manifolds.
AtomicLine load_atomic_line(const std::string& path);

// cesium_d2() unless the DIPOLESCOPE_DATA environment variable names a file.
AtomicLine default_line();

struct ProbePulseConfig {
    double detuning = 0.0;     // from the cycling transition, rad/s
    double power = 0.0;        // W
    double waist = 0.0;        // m
    double duration = 0.0;     // s
    double period = 0.0;       // s, >= duration
    int pulse_count = 0;

    double photon_number(const AtomicLine& line) const;  // n = P tau lambda / (h c)
    void validate() const;
};

struct TrappedSample {
    // per-level column density N_F * l in atoms/m^2, keyed by 2F
    std::map<int, double> column_density;
    double temperature = 0.0;   // K
    double radial_freq = 0.0;   // omega_r, rad/s
    double axial_freq = 0.0;    // omega_z, rad/s (carried, unused)
};

class TransitionStrengthTable {
public:
    // S = 0 for pairs failing |F - F'| <= 1 or the triangle rules
    double strength(int two_f, int two_fp) const;
    // emission branching F' -> F, normalized per F'
    double branching(int two_fp, int two_f) const;
    double sum_over_excited(int two_f) const;

    const std::vector<std::tuple<int, int, double>>& entries() const { return entries_; }

private:
    friend TransitionStrengthTable transition_strengths(const AtomicLine&);
    std::vector<std::tuple<int, int, double>> entries_;  // (2F, 2F', S)
    std::map<std::pair<int, int>, double> branching_;    // (2F', 2F) -> b
};

// S_{JFF'J'} = (2F'+1)(2J+1) {J J' 1; F' F I}^2, satisfying sum_F' S = 1 per F.
TransitionStrengthTable transition_strengths(const AtomicLine& line);

// Detuning from each excited manifold for a probe at `detuning` relative to
// the cycling transition, for atoms in ground manifold F. (2F' -> rad/s)
std::map<int, double> manifold_detunings(const AtomicLine& line, double detuning, int two_f);

// Column-integrated complex index k0 l (n - 1): real part is the phase shift,
// imaginary part is half the optical depth (>= 0 at all detunings).
std::complex<double> refractive_index(const TrappedSample& sample, const AtomicLine& line,
                                      double detuning);

// phi = sum_F phi_F sum_F' S gamma Delta / (Delta^2 + gamma^2),
// phi_F = lambda^2 l N_F / (2 pi)
double phase_shift(const TrappedSample& sample, const AtomicLine& line, double detuning);

// L(Delta) = sum_F' S_FF' gamma^2 / (Delta_FF'^2 + gamma^2), in (0, 1]
double linewidth_function(const AtomicLine& line, double detuning, int two_f);

// dispersive analogue of L: sum_F' S gamma Delta / (Delta^2 + gamma^2)
double dispersive_sum(const AtomicLine& line, double detuning, int two_f);

// Pulse-integrated excitation probability per transition,
// p_{e,FF'} = (lambda^2 / 3 pi) S gamma^2/(Delta^2+gamma^2) n / (pi w0^2).
std::map<int, double> excitation_probabilities(const ProbePulseConfig& probe,
                                               const AtomicLine& line);
double excitation_probability(const ProbePulseConfig& probe, const AtomicLine& line);

// Phase shift of one atom in the probe volume; effective mode area pi w0^2 / 2.
double phase_per_atom(const AtomicLine& line, double detuning, double waist);
double effective_mode_area(double waist);

struct TrapProperties {
    double depth_kelvin = 0.0;  // U0 / kB
    double radial_freq_hz = 0.0;
};

// Gaussian-beam dipole trap from a single effective D line, counter-rotating
// term included. Rejects trap wavelengths blue of the line.
TrapProperties dipole_trap_properties(double power, double waist, double trap_wavelength,
                                      const AtomicLine& line);

}  // namespace dipolescope
