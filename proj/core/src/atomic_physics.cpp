#include "dipolescope/atomic_physics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dipolescope/constants.hpp"
#include "dipolescope/wigner.hpp"

namespace dipolescope {

namespace {
constexpr double pi = constants::pi;
constexpr double two_pi = constants::two_pi;

double lorentz_dispersive(double delta, double gamma) {
    return gamma * delta / (delta * delta + gamma * gamma);
}

double lorentz_absorptive(double delta, double gamma) {
    return gamma * gamma / (delta * delta + gamma * gamma);
}
}  // namespace

double AtomicLine::wave_number() const { return two_pi / wavelength; }

double AtomicLine::transition_frequency() const {
    return two_pi * constants::speed_of_light / wavelength;
}

void AtomicLine::validate() const {
    if (wavelength <= 0.0) throw std::invalid_argument("AtomicLine: wavelength must be > 0");
    if (hwhm <= 0.0) throw std::invalid_argument("AtomicLine: hwhm must be > 0");
    if (mass <= 0.0) throw std::invalid_argument("AtomicLine: mass must be > 0");
    auto check_manifolds = [this](const std::vector<HyperfineLevel>& levels, int two_j,
                                  const char* which) {
        const int lo = std::abs(two_j - two_nuclear_i);
        const int hi = two_j + two_nuclear_i;
        int expect = lo;
        if (levels.empty()) throw std::invalid_argument(std::string("AtomicLine: no ") + which +
                                                        " manifolds");
        for (const auto& lv : levels) {
            if (lv.two_f != expect)
                throw std::invalid_argument(std::string("AtomicLine: ") + which +
                                            " manifolds must cover |J-I|..J+I in unit steps");
            expect += 2;
        }
        if (expect != hi + 2)
            throw std::invalid_argument(std::string("AtomicLine: ") + which +
                                        " manifolds must cover |J-I|..J+I in unit steps");
    };
    check_manifolds(ground, two_ground_j, "ground");
    check_manifolds(excited, two_excited_j, "excited");
    for (std::size_t i = 1; i < excited.size(); ++i)
        if (excited[i].offset <= excited[i - 1].offset)
            throw std::invalid_argument("AtomicLine: excited offsets must increase with F'");
}

AtomicLine cesium_d2() {
    AtomicLine line;
    line.wavelength = 852.34727582e-9;
    line.hwhm = two_pi * 2.6e6;
    line.mass = constants::cesium_mass;
    line.two_ground_j = 1;   // J = 1/2
    line.two_excited_j = 3;  // J' = 3/2
    line.two_nuclear_i = 7;  // I = 7/2
    line.ground = {{6, 0.0}, {8, two_pi * 9.192631770e9}};
    line.excited = {{4, 0.0},
                    {6, two_pi * 151.2247e6},
                    {8, two_pi * (151.2247e6 + 201.2871e6)},
                    {10, two_pi * (151.2247e6 + 201.2871e6 + 251.0916e6)}};
    line.validate();
    return line;
}

namespace {

int parse_two_f(const std::string& key, const std::string& prefix) {
    // key looks like "<prefix>_f<k>_offset_<unit>"; k may end in ".5"
    const auto fpart = key.substr(prefix.size() + 2);  // skip "<prefix>_f"
    const std::string fstr = fpart.substr(0, fpart.find('_'));
    if (fstr.size() >= 2 && fstr.back() == '5' && fstr[fstr.size() - 2] == '.')
        return 2 * std::stoi(fstr.substr(0, fstr.size() - 2)) + 1;
    return 2 * std::stoi(fstr);
}

}  // namespace

AtomicLine load_atomic_line(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open constants file: " + path);
    AtomicLine line;
    std::map<int, double> ground, excited;
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        std::istringstream ss(raw);
        std::string key;
        double value;
        if (!(ss >> key)) continue;
        if (!(ss >> value))
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected '<key> <value>', got '" + raw + "'");
        if (key == "wavelength_nm") line.wavelength = value * 1e-9;
        else if (key == "hwhm_mhz") line.hwhm = two_pi * value * 1e6;
        else if (key == "mass_amu") line.mass = value * constants::atomic_mass_unit;
        else if (key == "ground_j") line.two_ground_j = static_cast<int>(std::lround(2 * value));
        else if (key == "excited_j") line.two_excited_j = static_cast<int>(std::lround(2 * value));
        else if (key == "nuclear_i") line.two_nuclear_i = static_cast<int>(std::lround(2 * value));
        else if (key.rfind("ground_f", 0) == 0 && key.find("_offset_ghz") != std::string::npos)
            ground[parse_two_f(key, "ground")] = two_pi * value * 1e9;
        else if (key.rfind("excited_f", 0) == 0 && key.find("_offset_mhz") != std::string::npos)
            excited[parse_two_f(key, "excited")] = two_pi * value * 1e6;
        else
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": unknown key '" +
                                     key + "'");
    }
    for (const auto& [two_f, off] : ground) line.ground.push_back({two_f, off});
    for (const auto& [two_f, off] : excited) line.excited.push_back({two_f, off});
    line.validate();
    return line;
}

AtomicLine default_line() {
    if (const char* path = std::getenv("DIPOLESCOPE_DATA")) return load_atomic_line(path);
    return cesium_d2();
}

double ProbePulseConfig::photon_number(const AtomicLine& line) const {
    return power * duration * line.wavelength / (constants::planck * constants::speed_of_light);
}

void ProbePulseConfig::validate() const {
    if (power < 0.0) throw std::invalid_argument("probe: power must be >= 0");
    if (duration <= 0.0) throw std::invalid_argument("probe: duration must be > 0");
    if (period < duration) throw std::invalid_argument("probe: period must be >= duration");
    if (waist <= 0.0) throw std::invalid_argument("probe: waist must be > 0");
    if (pulse_count < 1) throw std::invalid_argument("probe: pulse count must be >= 1");
}

double TransitionStrengthTable::strength(int two_f, int two_fp) const {
    for (const auto& [f, fp, s] : entries_)
        if (f == two_f && fp == two_fp) return s;
    return 0.0;
}

double TransitionStrengthTable::branching(int two_fp, int two_f) const {
    const auto it = branching_.find({two_fp, two_f});
    return it == branching_.end() ? 0.0 : it->second;
}

double TransitionStrengthTable::sum_over_excited(int two_f) const {
    double sum = 0.0;
    for (const auto& [f, fp, s] : entries_)
        if (f == two_f) sum += s;
    return sum;
}

TransitionStrengthTable transition_strengths(const AtomicLine& line) {
    line.validate();
    TransitionStrengthTable table;
    for (const auto& g : line.ground) {
        for (const auto& e : line.excited) {
            if (std::abs(g.two_f - e.two_f) > 2) continue;
            const double w = wigner_6j(line.two_ground_j, line.two_excited_j, 2,
                                       e.two_f, g.two_f, line.two_nuclear_i);
            const double s = (e.two_f + 1) * (line.two_ground_j + 1) * w * w;
            if (s > 0.0) table.entries_.emplace_back(g.two_f, e.two_f, s);
        }
    }
    // emission branching by reciprocity: b(F'->F) proportional to (2F+1)(2J'+1) {.}^2
    for (const auto& e : line.excited) {
        double norm = 0.0;
        std::map<int, double> row;
        for (const auto& g : line.ground) {
            const double s = table.strength(g.two_f, e.two_f);
            const double b = s * (g.two_f + 1) * (line.two_excited_j + 1) /
                             ((e.two_f + 1) * (line.two_ground_j + 1));
            row[g.two_f] = b;
            norm += b;
        }
        for (auto& [two_f, b] : row)
            if (norm > 0.0) table.branching_[{e.two_f, two_f}] = b / norm;
    }
    return table;
}

std::map<int, double> manifold_detunings(const AtomicLine& line, double detuning, int two_f) {
    // detuning is measured from the cycling transition (top F -> top F')
    const double e_top = line.excited.back().offset;
    const double g_top = line.ground.back().offset;
    double g_f = 0.0;
    for (const auto& g : line.ground)
        if (g.two_f == two_f) g_f = g.offset;
    std::map<int, double> out;
    for (const auto& e : line.excited)
        out[e.two_f] = detuning + (e_top - e.offset) - (g_top - g_f);
    return out;
}

std::complex<double> refractive_index(const TrappedSample& sample, const AtomicLine& line,
                                      double detuning) {
    if (!std::isfinite(detuning)) throw std::invalid_argument("refractive_index: detuning not finite");
    const auto table = transition_strengths(line);
    const double gamma = line.hwhm;
    std::complex<double> acc{0.0, 0.0};
    for (const auto& [two_f, nl] : sample.column_density) {
        if (nl == 0.0) continue;
        const double phi_f = line.wavelength * line.wavelength * nl / two_pi;
        const auto deltas = manifold_detunings(line, detuning, two_f);
        for (const auto& [two_fp, d] : deltas) {
            const double s = table.strength(two_f, two_fp);
            if (s == 0.0) continue;
            acc += phi_f * s * std::complex<double>(lorentz_dispersive(d, gamma),
                                                    lorentz_absorptive(d, gamma));
        }
    }
    return acc;
}

double phase_shift(const TrappedSample& sample, const AtomicLine& line, double detuning) {
    if (!std::isfinite(detuning)) throw std::invalid_argument("phase_shift: detuning not finite");
    const auto table = transition_strengths(line);
    const double gamma = line.hwhm;
    double phi = 0.0;
    for (const auto& [two_f, nl] : sample.column_density) {
        if (nl == 0.0) continue;
        const double phi_f = line.wavelength * line.wavelength * nl / two_pi;
        for (const auto& [two_fp, d] : manifold_detunings(line, detuning, two_f))
            phi += phi_f * table.strength(two_f, two_fp) * lorentz_dispersive(d, gamma);
    }
    return phi;
}

double linewidth_function(const AtomicLine& line, double detuning, int two_f) {
    const auto table = transition_strengths(line);
    double acc = 0.0;
    for (const auto& [two_fp, d] : manifold_detunings(line, detuning, two_f))
        acc += table.strength(two_f, two_fp) * lorentz_absorptive(d, line.hwhm);
    return acc;
}

double dispersive_sum(const AtomicLine& line, double detuning, int two_f) {
    const auto table = transition_strengths(line);
    double acc = 0.0;
    for (const auto& [two_fp, d] : manifold_detunings(line, detuning, two_f))
        acc += table.strength(two_f, two_fp) * lorentz_dispersive(d, line.hwhm);
    return acc;
}

std::map<int, double> excitation_probabilities(const ProbePulseConfig& probe,
                                               const AtomicLine& line) {
    probe.validate();
    const double n = probe.photon_number(line);
    const double area = pi * probe.waist * probe.waist;
    const double sigma0 = line.wavelength * line.wavelength / (3.0 * pi);
    const auto table = transition_strengths(line);
    const int two_f = line.cycling_ground_f2();
    std::map<int, double> out;
    for (const auto& [two_fp, d] : manifold_detunings(line, probe.detuning, two_f)) {
        const double s = table.strength(two_f, two_fp);
        if (s == 0.0) continue;
        out[two_fp] = sigma0 * s * lorentz_absorptive(d, line.hwhm) * n / area;
    }
    return out;
}

double excitation_probability(const ProbePulseConfig& probe, const AtomicLine& line) {
    double total = 0.0;
    for (const auto& [two_fp, p] : excitation_probabilities(probe, line)) total += p;
    return total;
}

double effective_mode_area(double waist) { return pi * waist * waist / 2.0; }

double phase_per_atom(const AtomicLine& line, double detuning, double waist) {
    const double col = 1.0 / effective_mode_area(waist);  // one atom in the mode
    return line.wavelength * line.wavelength * col / two_pi *
           dispersive_sum(line, detuning, line.cycling_ground_f2());
}

TrapProperties dipole_trap_properties(double power, double waist, double trap_wavelength,
                                      const AtomicLine& line) {
    if (power <= 0.0 || waist <= 0.0) throw std::invalid_argument("trap: power and waist must be > 0");
    if (trap_wavelength <= line.wavelength)
        throw std::invalid_argument("trap: wavelength must be red-detuned from the line");
    const double omega0 = line.transition_frequency();
    const double omega = two_pi * constants::speed_of_light / trap_wavelength;
    const double gamma_fwhm = 2.0 * line.hwhm;
    const double peak_intensity = 2.0 * power / (pi * waist * waist);
    const double depth = 3.0 * pi * constants::speed_of_light * constants::speed_of_light /
                         (2.0 * omega0 * omega0 * omega0) * gamma_fwhm *
                         (1.0 / (omega0 - omega) + 1.0 / (omega0 + omega)) * peak_intensity;
    TrapProperties props;
    props.depth_kelvin = depth / constants::boltzmann;
    // harmonic expansion of the Gaussian radial profile
    props.radial_freq_hz = std::sqrt(4.0 * depth / (line.mass * waist * waist)) / two_pi;
    return props;
}

}  // namespace dipolescope
