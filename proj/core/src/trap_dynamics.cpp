#include "dipolescope/trap_dynamics.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "dipolescope/ode.hpp"

namespace dipolescope {

namespace {
constexpr double two_pi = constants::two_pi;
}

void LoadingParams::validate() const {
    if (load_rate < 0 || mot_decay < 0 || one_body < 0 || two_body < 0)
        throw std::invalid_argument("LoadingParams: rates must be >= 0");
}

void LossParams::validate() const {
    if (one_body < 0 || two_body < 0)
        throw std::invalid_argument("LossParams: rates must be >= 0");
}

void BallisticParams::validate() const {
    if (temperature < 0) throw std::invalid_argument("BallisticParams: temperature must be >= 0");
    if (radial_freq <= 0) throw std::invalid_argument("BallisticParams: radial_freq must be > 0");
    if (probe_waist <= 0) throw std::invalid_argument("BallisticParams: probe_waist must be > 0");
}

double BallisticParams::sigma_r0() const {
    const double omega_r = two_pi * radial_freq;
    return std::sqrt(constants::boltzmann * temperature / mass) / omega_r;
}

double BallisticParams::sigma_v() const {
    return std::sqrt(constants::boltzmann * temperature / mass);
}

void DepumpParams::validate() const {
    for (const auto& [fp, p] : excitation)
        if (p < 0.0 || p > 1.0)
            throw std::invalid_argument("DepumpParams: excitation probabilities must be in [0,1]");
    if (repump_return < 0.0 || repump_return > 1.0)
        throw std::invalid_argument("DepumpParams: repump_return must be in [0,1]");
    for (const auto& [fp, row] : branching) {
        double sum = 0.0;
        for (const auto& [f, b] : row) sum += b;
        if (std::abs(sum - 1.0) > 1e-9)
            throw std::invalid_argument("DepumpParams: branching rows must sum to 1");
    }
}

std::vector<double> loading_curve(const LoadingParams& params, double n0,
                                  std::span<const double> t_grid) {
    params.validate();
    if (n0 < 0.0) throw std::invalid_argument("loading_curve: initial number must be >= 0");
    if (!t_grid.empty() && t_grid.front() < 0.0)
        throw std::invalid_argument("loading_curve: times must be >= 0");
    const auto rhs = [&params](double t, double n) {
        return params.load_rate * std::exp(-params.mot_decay * t) - params.one_body * n -
               params.two_body * n * n;
    };
    const OdeOptions opts{.rel_tol = 1e-9, .abs_tol = 1e-3};
    // the initial condition is pinned to t = 0, where the MOT reservoir term starts
    std::vector<double> out;
    if (!t_grid.empty() && t_grid.front() > 0.0) {
        std::vector<double> grid;
        grid.reserve(t_grid.size() + 1);
        grid.push_back(0.0);
        grid.insert(grid.end(), t_grid.begin(), t_grid.end());
        out = integrate_ode(rhs, n0, grid, opts);
        out.erase(out.begin());
    } else {
        out = integrate_ode(rhs, n0, t_grid, opts);
    }
    for (auto& n : out) n = std::max(n, 0.0);
    return out;
}

double loss_curve_closed_form(const LossParams& params, double n0, double t) {
    params.validate();
    if (t < 0.0) throw std::invalid_argument("loss_curve_closed_form: t must be >= 0");
    const double g = params.one_body, b = params.two_body;
    // expm1 keeps (1 - e^{-gt})/g accurate down to the g -> 0 algebraic limit
    const double q = g == 0.0 ? t : -std::expm1(-g * t) / g;
    return n0 * std::exp(-g * t) / (1.0 + b * n0 * q);
}

double breathing_signal(double t, double radial_freq_hz, double damping_time, double depth,
                        double baseline) {
    if (radial_freq_hz <= 0.0) throw std::invalid_argument("breathing_signal: nu_r must be > 0");
    if (damping_time <= 0.0) throw std::invalid_argument("breathing_signal: tau_d must be > 0");
    if (depth < 0.0 || depth >= 1.0)
        throw std::invalid_argument("breathing_signal: depth must be in [0,1)");
    return baseline *
           (1.0 + depth * std::exp(-t / damping_time) * std::cos(two_pi * 2.0 * radial_freq_hz * t));
}

std::vector<double> trap_frequency_vs_power(std::span<const double> powers, double waist,
                                            double trap_wavelength, const AtomicLine& line) {
    std::vector<double> out;
    out.reserve(powers.size());
    for (const double p : powers)
        out.push_back(dipole_trap_properties(p, waist, trap_wavelength, line).radial_freq_hz);
    return out;
}

double ballistic_escape_probability(const BallisticParams& params, double t) {
    params.validate();
    if (t < 0.0) throw std::invalid_argument("ballistic_escape_probability: t must be >= 0");
    const double w2 = params.probe_waist * params.probe_waist;
    const double sr02 = params.sigma_r0() * params.sigma_r0();
    const double sv2 = params.sigma_v() * params.sigma_v();
    const double srt2 = sr02 + sv2 * t * t;
    const double fall = params.gravity * t * t;
    return 1.0 - (w2 + 4.0 * sr02) / (w2 + 4.0 * srt2) *
                     std::exp(-fall * fall / (2.0 * (w2 + 4.0 * srt2)));
}

double ballistic_mc_oracle(const BallisticParams& params, double t, std::size_t samples,
                           std::uint64_t seed) {
    params.validate();
    if (samples == 0) throw std::invalid_argument("ballistic_mc_oracle: need samples >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> pos(0.0, params.sigma_r0());
    std::normal_distribution<double> vel(0.0, params.sigma_v());
    const double w2 = params.probe_waist * params.probe_waist;
    const double drop = 0.5 * params.gravity * t * t;
    double w_now = 0.0, w_start = 0.0;
    for (std::size_t i = 0; i < samples; ++i) {
        const double x0 = pos(rng), y0 = pos(rng);
        const double vx = vel(rng), vy = vel(rng);
        const double x = x0 + vx * t;
        const double y = y0 + vy * t - drop;
        w_start += std::exp(-2.0 * (x0 * x0 + y0 * y0) / w2);
        w_now += std::exp(-2.0 * (x * x + y * y) / w2);
    }
    return 1.0 - w_now / w_start;
}

int DepumpParams::resolve_leaky() const {
    if (leaky_two_fp != 0) return leaky_two_fp;
    int best = 0;
    for (const auto& [fp, row] : branching)
        if (row.size() > 1) best = std::max(best, fp);
    return best;
}

std::vector<double> depump_decay(const DepumpParams& params, int pulse_count, double n4_initial,
                                 double n_total) {
    params.validate();
    if (pulse_count < 0) throw std::invalid_argument("depump_decay: pulse_count must be >= 0");
    if (n4_initial < 0.0 || n4_initial > n_total)
        throw std::invalid_argument("depump_decay: need 0 <= N4(0) <= N_total");
    // only the leaky channel transfers atoms to the dark level; the cycling
    // manifold decays straight back and contributes nothing
    double p_depump = 0.0;
    const int fp_leaky = params.resolve_leaky();
    if (const auto it = params.excitation.find(fp_leaky); it != params.excitation.end()) {
        double b_dark = 0.0;
        const auto row = params.branching.find(fp_leaky);
        if (row != params.branching.end() && !row->second.empty())
            b_dark = row->second.begin()->second;  // lowest ground F is the dark level
        p_depump = it->second * b_dark;
    }
    std::vector<double> n4(static_cast<std::size_t>(pulse_count) + 1);
    n4[0] = n4_initial;
    for (int k = 0; k < pulse_count; ++k)
        n4[k + 1] = n4[k] * (1.0 - p_depump) + params.repump_return * (n_total - n4[k]);
    return n4;
}

}  // namespace dipolescope
