#include "dipolescope/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "dipolescope/rng.hpp"
#include "json.hpp"

namespace dipolescope {

namespace {

using nlohmann::json;
constexpr double two_pi = constants::two_pi;

std::vector<double> geom_grid(double lo, double hi, int points) {
    std::vector<double> out(points);
    for (int i = 0; i < points; ++i)
        out[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (points - 1));
    return out;
}

std::vector<double> linear_grid(double lo, double hi, int points) {
    std::vector<double> out(points);
    for (int i = 0; i < points; ++i)
        out[i] = lo + (hi - lo) * static_cast<double>(i) / (points - 1);
    return out;
}

// per-pulse shot-noise phase error after reference subtraction, for the mean
// over `runs` repetitions
double phase_sigma(const Scenario& s, double photon_number) {
    if (!s.noise.shot_noise_enabled) return 1e-9;
    return 2.0 * std::sqrt(2.0) /
           (s.interferometer.visibility * std::sqrt(photon_number) * std::sqrt(s.run_count));
}

struct PhaseMeasurement {
    std::vector<double> timestamps;
    std::vector<double> mean_phase;  // per pulse index, averaged over runs
    double sigma = 0.0;              // per entry of mean_phase
};

// probe + no-atom reference train pair per run; phases averaged per pulse slot
PhaseMeasurement measure_phases(const Scenario& s, const ProbePulseConfig& probe,
                                const PhaseTrajectory& trajectory, const AtomicLine& line,
                                std::uint64_t salt) {
    PhaseMeasurement out;
    out.mean_phase.assign(probe.pulse_count, 0.0);
    const PhaseTrajectory no_atoms = [](double) { return 0.0; };
    for (int r = 0; r < s.run_count; ++r) {
        NoiseConfig probe_noise = s.noise;
        probe_noise.rng_seed = derive_seed(s.seed, salt * 1000003ull + 2ull * r);
        NoiseConfig ref_noise = s.noise;
        ref_noise.rng_seed = derive_seed(s.seed, salt * 1000003ull + 2ull * r + 1ull);
        const auto rec = simulate_pulse_train(probe, trajectory, probe_noise, line,
                                              s.interferometer);
        const auto ref = simulate_pulse_train(probe, no_atoms, ref_noise, line,
                                              s.interferometer);
        if (out.timestamps.empty()) out.timestamps = rec.timestamps;
        const auto est = phase_from_record(rec, ref);
        for (int k = 0; k < probe.pulse_count; ++k) out.mean_phase[k] += est.phase[k];
    }
    for (auto& p : out.mean_phase) p /= s.run_count;
    out.sigma = phase_sigma(s, probe.photon_number(line));
    return out;
}

// single scalar point: additionally averaged over the pulses of the train
std::pair<double, double> measure_point(const Scenario& s, const ProbePulseConfig& probe,
                                        const PhaseTrajectory& trajectory,
                                        const AtomicLine& line, std::uint64_t salt) {
    const auto m = measure_phases(s, probe, trajectory, line, salt);
    double acc = 0.0;
    for (const double p : m.mean_phase) acc += p;
    acc /= static_cast<double>(m.mean_phase.size());
    return {acc, m.sigma / std::sqrt(static_cast<double>(m.mean_phase.size()))};
}

json fit_result_json(const FitResult& fr) { return json::parse(fr.to_json()); }

json scenario_json(const Scenario& s);  // forward (shared with scenario_to_json)

ScenarioResult finish(const Scenario& s, ScenarioResult&& result, const json& fit,
                      const std::string& fit_summary) {
    json report;
    report["scenario"] = scenario_json(s);
    report["fit"] = fit;
    report["fit_summary"] = fit_summary;
    report["metrics"] = result.metrics;
    report["converged"] = result.converged;
    report["dataset_columns"] = result.dataset_columns;
    report["n_points"] = result.dataset.size();
    result.report_json = report.dump(2);
    return std::move(result);
}

// ---- scenario implementations ---------------------------------------------

ScenarioResult run_noise_scaling(const Scenario& s, const AtomicLine& line) {
    ScenarioResult res;
    res.name = s.name;
    res.dataset_columns = {"photon_number", "two_point_variance", "sigma"};
    const double photon_energy =
        constants::planck * constants::speed_of_light / line.wavelength;
    const PhaseTrajectory flat = [](double) { return 0.0; };

    std::vector<std::pair<double, double>> pairs;
    for (std::size_t i = 0; i < s.photon_grid.size(); ++i) {
        const double n = s.photon_grid[i];
        ProbePulseConfig probe = s.probe;
        probe.power = n * photon_energy / probe.duration;
        double var = 0.0;
        for (int r = 0; r < s.run_count; ++r) {
            NoiseConfig noise = s.noise;
            noise.rng_seed = derive_seed(s.seed, i * 1009ull + r);
            const auto rec = simulate_pulse_train(probe, flat, noise, line, s.interferometer);
            var += two_point_variance(rec, 1);
        }
        var /= s.run_count;
        const double sigma =
            var * std::sqrt(2.0 / ((probe.pulse_count - 1.0) * s.run_count));
        pairs.emplace_back(n, var);
        res.dataset.push_back({n, var, sigma});
    }
    const auto slope = noise_scaling_exponent(pairs);
    res.metrics["slope"] = slope.slope;
    res.metrics["slope_std_error"] = slope.std_error;
    res.metrics["intercept"] = slope.intercept;

    res.curve_columns = {"photon_number", "model_variance"};
    for (const auto& [n, var] : pairs)
        res.curve.push_back({n, std::exp(slope.intercept + slope.slope * std::log(n))});

    json fit;
    fit["slope"] = slope.slope;
    fit["slope_std_error"] = slope.std_error;
    fit["intercept"] = slope.intercept;
    char buf[128];
    std::snprintf(buf, sizeof buf, "log-log slope = %s",
                  value_error_string(slope.slope, slope.std_error).c_str());
    return finish(s, std::move(res), fit, buf);
}

ScenarioResult run_loading(const Scenario& s, const AtomicLine& line) {
    ScenarioResult res;
    res.name = s.name;
    res.dataset_columns = {"time_s", "atoms", "sigma"};
    const double conv = phase_per_atom(line, s.probe.detuning, s.probe.waist);

    // trap occupation frozen across each short probe train
    const auto truth = loading_curve(s.loading_truth, 0.0, s.time_grid);
    FitData data;
    for (std::size_t i = 0; i < s.time_grid.size(); ++i) {
        const double phi_true = truth[i] * conv;
        const auto [phi, sig] =
            measure_point(s, s.probe, [phi_true](double) { return phi_true; }, line, i + 1);
        data.t.push_back(s.time_grid[i]);
        data.y.push_back(phi / conv);
        data.sigma.push_back(sig / conv);
        res.dataset.push_back({s.time_grid[i], phi / conv, sig / conv});
    }

    const auto fit = fit_loading(data);
    res.converged = fit.detail.converged;
    res.metrics["load_rate"] = fit.params.load_rate;
    res.metrics["load_rate_error"] = fit.errors.load_rate;
    res.metrics["mot_decay"] = fit.params.mot_decay;
    res.metrics["mot_decay_error"] = fit.errors.mot_decay;
    res.metrics["one_body"] = fit.params.one_body;
    res.metrics["one_body_error"] = fit.errors.one_body;
    res.metrics["two_body"] = fit.params.two_body;
    res.metrics["two_body_error"] = fit.errors.two_body;
    res.metrics["split_time"] = fit.split_time;

    res.curve_columns = {"time_s", "model_atoms"};
    const auto fine = geom_grid(std::max(s.time_grid.front(), 1e-6), s.time_grid.back(), 200);
    const auto model = loading_curve(fit.params, 0.0, fine);
    for (std::size_t i = 0; i < fine.size(); ++i) res.curve.push_back({fine[i], model[i]});

    const std::vector<std::string> names{"R0 (atoms/s)", "gamma_MOT (1/s)", "Gamma_L (1/s)",
                                         "beta_L (1/(atom s))"};
    return finish(s, std::move(res), fit_result_json(fit.detail), fit.detail.summary(names));
}

ScenarioResult run_losses(const Scenario& s, const AtomicLine& line) {
    ScenarioResult res;
    res.name = s.name;
    res.dataset_columns = {"time_s", "atoms", "sigma"};
    const double conv = phase_per_atom(line, s.probe.detuning, s.probe.waist);

    FitData data;
    for (std::size_t i = 0; i < s.time_grid.size(); ++i) {
        const double n_true = loss_curve_closed_form(s.loss_truth, s.atom_number, s.time_grid[i]);
        const double phi_true = n_true * conv;
        const auto [phi, sig] =
            measure_point(s, s.probe, [phi_true](double) { return phi_true; }, line, i + 1);
        data.t.push_back(s.time_grid[i]);
        data.y.push_back(phi / conv);
        data.sigma.push_back(sig / conv);
        res.dataset.push_back({s.time_grid[i], phi / conv, sig / conv});
    }

    const auto fit = fit_loss(data);
    res.converged = fit.detail.converged;
    res.metrics["one_body"] = fit.params.one_body;
    res.metrics["one_body_error"] = fit.errors.one_body;
    res.metrics["two_body"] = fit.params.two_body;
    res.metrics["two_body_error"] = fit.errors.two_body;
    res.metrics["initial_number"] = fit.initial_number;

    res.curve_columns = {"time_s", "model_atoms"};
    for (const double t : geom_grid(data.t.front(), data.t.back(), 200))
        res.curve.push_back({t, loss_curve_closed_form(fit.params, fit.initial_number,
                                                       t - data.t.front())});

    const std::vector<std::string> names{"N0 (atoms)", "Gamma (1/s)", "beta (1/(atom s))"};
    return finish(s, std::move(res), fit_result_json(fit.detail), fit.detail.summary(names));
}

ScenarioResult run_loss_vs_detuning(const Scenario& s, const AtomicLine& line) {
    ScenarioResult res;
    res.name = s.name;
    res.dataset_columns = {"detuning_gamma", "two_body_per_atom_s", "sigma"};
    const double conv = phase_per_atom(line, s.probe.detuning, s.probe.waist);
    const auto& truth = s.loss_vs_detuning_truth;

    bool monotone = true;
    double prev = -1.0;
    bool all_converged = true;
    for (std::size_t i = 0; i < s.detuning_grid.size(); ++i) {
        const double det = s.detuning_grid[i];  // units of gamma, negative
        LossParams lp;
        lp.one_body = truth.one_body;
        lp.two_body = truth.dark_two_body +
                      (truth.light_two_body - truth.dark_two_body) *
                          std::pow(std::abs(truth.reference_detuning / det), truth.exponent);
        FitData data;
        for (std::size_t j = 0; j < s.time_grid.size(); ++j) {
            const double phi_true =
                loss_curve_closed_form(lp, s.atom_number, s.time_grid[j]) * conv;
            const auto [phi, sig] = measure_point(
                s, s.probe, [phi_true](double) { return phi_true; }, line, i * 7919ull + j + 1);
            data.t.push_back(s.time_grid[j]);
            data.y.push_back(phi / conv);
            data.sigma.push_back(sig / conv);
        }
        const auto fit = fit_loss(data);
        all_converged = all_converged && fit.detail.converged;
        res.dataset.push_back({det, fit.params.two_body, fit.errors.two_body});
        if (prev > 0.0 && fit.params.two_body <= prev) monotone = false;
        prev = fit.params.two_body;
    }
    res.converged = all_converged;
    res.metrics["monotone_increasing"] = monotone ? 1.0 : 0.0;
    res.metrics["dark_two_body"] = truth.dark_two_body;

    json fit;
    fit["monotone_increasing"] = monotone;
    fit["dark_two_body"] = truth.dark_two_body;
    return finish(s, std::move(res), fit,
                  monotone ? "two-body loss increases monotonically toward resonance"
                           : "monotonicity violated");
}

ScenarioResult run_breathing(const Scenario& s, const AtomicLine& line) {
    ScenarioResult res;
    res.name = s.name;
    res.dataset_columns = {"time_s", "fraction", "sigma"};
    const double conv = phase_per_atom(line, s.probe.detuning, s.probe.waist);
    const double nu_r = s.breathing_radial_freq;
    const double scale = s.atom_number * conv;
    const PhaseTrajectory traj = [&](double t) {
        return scale * breathing_signal(t, nu_r, s.breathing_damping_time, s.breathing_depth, 1.0);
    };

    const auto m = measure_phases(s, s.probe, traj, line, 1);
    FitData data;
    for (std::size_t k = 0; k < m.mean_phase.size(); ++k) {
        data.t.push_back(m.timestamps[k]);
        data.y.push_back(m.mean_phase[k] / scale);
        data.sigma.push_back(m.sigma / scale);
        res.dataset.push_back({m.timestamps[k], data.y.back(), data.sigma.back()});
    }

    const auto fit = fit_breathing(data);
    res.converged = fit.detail.converged;
    res.metrics["radial_freq_hz"] = fit.radial_freq;
    res.metrics["radial_freq_error_hz"] = fit.radial_freq_error;
    res.metrics["signal_freq_hz"] = 2.0 * fit.radial_freq;
    res.metrics["damping_time_s"] = fit.damping_time;
    res.metrics["damping_time_error_s"] = fit.damping_time_error;
    res.metrics["near_nyquist"] = fit.near_nyquist ? 1.0 : 0.0;

    res.curve_columns = {"time_s", "model_fraction"};
    for (const double t : linear_grid(data.t.front(), data.t.back(), 400))
        res.curve.push_back({t, breathing_signal(t, fit.radial_freq, fit.damping_time, fit.depth,
                                                 fit.baseline)});

    char buf[160];
    std::snprintf(buf, sizeof buf, "nu_r = %s Hz (signal at twice that)",
                  value_error_string(fit.radial_freq, fit.radial_freq_error).c_str());
    return finish(s, std::move(res), fit_result_json(fit.detail), buf);
}

ScenarioResult run_frequency_vs_power(const Scenario& s, const AtomicLine& line) {
    ScenarioResult res;
    res.name = s.name;
    res.dataset_columns = {"power_w", "radial_freq_hz", "sigma"};
    const double conv = phase_per_atom(line, s.probe.detuning, s.probe.waist);
    const double scale = s.atom_number * conv;

    FitData points;
    bool all_converged = true;
    for (std::size_t i = 0; i < s.power_grid.size(); ++i) {
        const double p = s.power_grid[i];
        const double nu_true =
            dipole_trap_properties(p, s.trap_waist, s.trap_wavelength, line).radial_freq_hz;
        const PhaseTrajectory traj = [&](double t) {
            return scale *
                   breathing_signal(t, nu_true, s.breathing_damping_time, s.breathing_depth, 1.0);
        };
        const auto m = measure_phases(s, s.probe, traj, line, i + 1);
        FitData data;
        for (std::size_t k = 0; k < m.mean_phase.size(); ++k) {
            data.t.push_back(m.timestamps[k]);
            data.y.push_back(m.mean_phase[k] / scale);
            data.sigma.push_back(m.sigma / scale);
        }
        const auto fit = fit_breathing(data);
        all_converged = all_converged && fit.detail.converged;
        points.t.push_back(p);
        points.y.push_back(fit.radial_freq);
        points.sigma.push_back(std::max(fit.radial_freq_error, 1e-6));
        res.dataset.push_back({p, fit.radial_freq, points.sigma.back()});
    }

    // one-parameter waist fit against the sqrt(P) law; nu scales as 1/w^2 at
    // fixed power, so one point inverts exactly for the starting value
    const double w_ref = 50e-6;
    const double nu_ref = dipole_trap_properties(points.t.front(), w_ref, s.trap_wavelength, line)
                              .radial_freq_hz;
    const double w_init = w_ref * std::sqrt(nu_ref / points.y.front());
    FitProblem prob;
    prob.data = points;
    prob.initial = {std::log(w_init)};
    prob.model = [&](std::span<const double> q, std::span<const double> t) {
        const double w = std::exp(q[0]);
        std::vector<double> out(t.size());
        for (std::size_t i = 0; i < t.size(); ++i)
            out[i] = dipole_trap_properties(t[i], w, s.trap_wavelength, line).radial_freq_hz;
        return out;
    };
    const auto fr = lm_fit(prob);
    const double waist = std::exp(fr.params[0]);
    const double waist_err = waist * (fr.std_errors.empty() ? 0.0 : fr.std_errors[0]);
    res.converged = all_converged && fr.converged;
    res.metrics["waist_m"] = waist;
    res.metrics["waist_error_m"] = waist_err;

    res.curve_columns = {"power_w", "model_radial_freq_hz"};
    for (const double p : linear_grid(points.t.front(), points.t.back(), 100))
        res.curve.push_back(
            {p, dipole_trap_properties(p, waist, s.trap_wavelength, line).radial_freq_hz});

    json fit;
    fit["waist_m"] = waist;
    fit["waist_error_m"] = waist_err;
    fit["detail"] = fit_result_json(fr);
    char buf[128];
    std::snprintf(buf, sizeof buf, "trap beam waist = %s um",
                  value_error_string(waist * 1e6, waist_err * 1e6).c_str());
    return finish(s, std::move(res), fit, buf);
}

DepumpParams depump_params_for(const Scenario& s, const ProbePulseConfig& probe,
                               const AtomicLine& line) {
    const auto table = transition_strengths(line);
    const auto pe = excitation_probabilities(probe, line);
    const int leaky = line.cycling_excited_f2() - 2;
    DepumpParams dp;
    dp.leaky_two_fp = leaky;
    dp.repump_return = s.depump_repump_return;
    if (const auto it = pe.find(leaky); it != pe.end())
        dp.excitation[leaky] = std::min(it->second, 1.0);
    std::map<int, double> row;
    for (const auto& g : {line.ground.front().two_f, line.ground.back().two_f})
        row[g] = table.branching(leaky, g);
    dp.branching[leaky] = row;
    return dp;
}

ScenarioResult run_time_of_flight(const Scenario& s, const AtomicLine& line) {
    ScenarioResult res;
    res.name = s.name;
    res.dataset_columns = {"time_s", "escape_fraction", "sigma"};
    const double conv = phase_per_atom(line, s.probe.detuning, s.probe.waist);

    BallisticParams bp;
    bp.temperature = s.tof_temperature;
    bp.radial_freq = s.tof_radial_freq;
    bp.probe_waist = s.probe.waist;
    bp.mass = line.mass;

    std::vector<double> held(s.probe.pulse_count, s.atom_number);
    if (s.tof_include_depumping) {
        const auto dp = depump_params_for(s, s.probe, line);
        const auto decay = depump_decay(dp, s.probe.pulse_count - 1, s.atom_number, s.atom_number);
        held = decay;
    }
    const double period = s.probe.period;
    const PhaseTrajectory ballistic = [&](double t) {
        const int k = static_cast<int>(std::lround(t / period));
        return held[k] * (1.0 - ballistic_escape_probability(bp, t)) * conv;
    };
    const PhaseTrajectory dipole_on = [&](double t) {
        const int k = static_cast<int>(std::lround(t / period));
        return held[k] * conv;
    };

    const auto mb = measure_phases(s, s.probe, ballistic, line, 1);
    const auto mh = measure_phases(s, s.probe, dipole_on, line, 2);
    const auto fractions = depump_correction(mb.mean_phase, mh.mean_phase);

    FitData data;
    const double sigma_frac = mb.sigma * std::sqrt(2.0) / (s.atom_number * conv);
    for (std::size_t k = 0; k < fractions.size(); ++k) {
        data.t.push_back(mb.timestamps[k]);
        data.y.push_back(1.0 - fractions[k]);
        data.sigma.push_back(sigma_frac);
        res.dataset.push_back({mb.timestamps[k], data.y.back(), sigma_frac});
    }

    const auto fit = fit_temperature(data, s.probe.waist, constants::standard_gravity, line.mass);
    res.converged = fit.detail.converged;
    res.metrics["temperature_k"] = fit.temperature;
    res.metrics["temperature_error_k"] = fit.temperature_error;
    res.metrics["radial_freq_hz"] = fit.radial_freq;
    res.metrics["radial_freq_error_hz"] = fit.radial_freq_error;
    res.metrics["end_depump_fraction"] = 1.0 - held.back() / s.atom_number;

    res.curve_columns = {"time_s", "model_escape_fraction"};
    BallisticParams fitted = bp;
    fitted.temperature = fit.temperature;
    fitted.radial_freq = fit.radial_freq;
    for (const double t : linear_grid(data.t.front(), data.t.back(), 300))
        res.curve.push_back({t, ballistic_escape_probability(fitted, t)});

    char buf[160];
    std::snprintf(buf, sizeof buf, "T = %s uK, nu_r = %s Hz",
                  value_error_string(fit.temperature * 1e6, fit.temperature_error * 1e6).c_str(),
                  value_error_string(fit.radial_freq, fit.radial_freq_error).c_str());
    return finish(s, std::move(res), fit_result_json(fit.detail), buf);
}

ScenarioResult run_depumping(const Scenario& s, const AtomicLine& line) {
    ScenarioResult res;
    res.name = s.name;
    res.dataset_columns = {"power_w", "pulse_index", "normalized_phase", "sigma"};
    const double conv = phase_per_atom(line, s.probe.detuning, s.probe.waist);

    const auto table = transition_strengths(line);
    const int leaky = line.cycling_excited_f2() - 2;
    const int dark = line.ground.front().two_f;

    std::vector<DepumpSeries> series;
    bool all_converged = true;
    for (std::size_t i = 0; i < s.power_grid.size(); ++i) {
        ProbePulseConfig probe = s.probe;
        probe.power = s.power_grid[i];
        const auto dp = depump_params_for(s, probe, line);
        const auto n4 = depump_decay(dp, probe.pulse_count - 1, s.atom_number, s.atom_number);
        const double period = probe.period;
        const PhaseTrajectory traj = [&](double t) {
            return n4[static_cast<int>(std::lround(t / period))] * conv;
        };
        const auto m = measure_phases(s, probe, traj, line, i + 1);
        DepumpSeries ds;
        ds.power = probe.power;
        const double phi0 = m.mean_phase.front();
        for (std::size_t k = 0; k < m.mean_phase.size(); ++k) {
            ds.decay.t.push_back(static_cast<double>(k));
            ds.decay.y.push_back(m.mean_phase[k] / phi0);
            ds.decay.sigma.push_back(m.sigma * std::sqrt(2.0) / phi0);
            res.dataset.push_back({probe.power, static_cast<double>(k), ds.decay.y.back(),
                                   ds.decay.sigma.back()});
        }
        series.push_back(std::move(ds));
    }

    // calibration from the same transition table the generator uses
    DepumpCalibration cal;
    cal.branch_to_dark = table.branching(leaky, dark);
    {
        ProbePulseConfig probe = s.probe;
        probe.power = s.power_grid.front();
        const auto pe = excitation_probabilities(probe, line);
        cal.total_over_leaky = excitation_probability(probe, line) / pe.at(leaky);
    }
    const auto fit = fit_depumping(series, cal);
    for (const auto& d : fit.details) all_converged = all_converged && d.converged;
    res.converged = all_converged;

    res.curve_columns = {"power_w", "fitted_p_e", "fitted_p_e_sigma", "theory_p_e"};
    double max_rel_dev = 0.0;
    for (std::size_t i = 0; i < fit.powers.size(); ++i) {
        ProbePulseConfig probe = s.probe;
        probe.power = fit.powers[i];
        const double theory = excitation_probability(probe, line);
        res.curve.push_back({fit.powers[i], fit.p_e[i], fit.p_e_error[i], theory});
        max_rel_dev = std::max(max_rel_dev, std::abs(fit.p_e[i] - theory) / theory);
    }
    res.metrics["slope_per_w"] = fit.slope;
    res.metrics["slope_error_per_w"] = fit.slope_error;
    res.metrics["intercept"] = fit.intercept;
    res.metrics["intercept_error"] = fit.intercept_error;
    res.metrics["max_rel_deviation_from_theory"] = max_rel_dev;
    {
        ProbePulseConfig probe = s.probe;
        probe.power = 1.0;
        res.metrics["theory_slope_per_w"] = excitation_probability(probe, line);
    }

    json fj;
    fj["powers_w"] = fit.powers;
    fj["p_e"] = fit.p_e;
    fj["p_e_error"] = fit.p_e_error;
    fj["slope_per_w"] = fit.slope;
    fj["slope_error_per_w"] = fit.slope_error;
    fj["intercept"] = fit.intercept;
    char buf[128];
    std::snprintf(buf, sizeof buf, "p_e slope = %s /W (theory %.3g /W)",
                  value_error_string(fit.slope, fit.slope_error).c_str(),
                  res.metrics["theory_slope_per_w"]);
    return finish(s, std::move(res), fj, buf);
}

}  // namespace

std::vector<double> depump_correction(std::span<const double> probe_signal,
                                      std::span<const double> dipole_on_reference) {
    if (probe_signal.size() != dipole_on_reference.size())
        throw std::invalid_argument("depump_correction: train lengths differ");
    if (probe_signal.empty()) return {};
    const double p0 = probe_signal.front();
    const double r0 = dipole_on_reference.front();
    std::vector<double> out(probe_signal.size());
    for (std::size_t k = 0; k < out.size(); ++k)
        out[k] = (probe_signal[k] / p0) / (dipole_on_reference[k] / r0);
    return out;
}

void Scenario::validate() const {
    static const char* names[] = {"noise_scaling",  "loading",  "losses",
                                  "loss_vs_detuning", "breathing", "frequency_vs_power",
                                  "time_of_flight", "depumping"};
    if (std::find(std::begin(names), std::end(names), name) == std::end(names))
        throw std::invalid_argument("scenario: unknown name '" + name + "'");
    if (run_count < 1) throw std::invalid_argument("scenario: run_count must be >= 1");
    probe.validate();
    noise.validate();
    if (name == "noise_scaling" && photon_grid.size() < 3)
        throw std::invalid_argument("scenario: noise_scaling needs >= 3 photon grid points");
    if ((name == "loading" || name == "losses" || name == "loss_vs_detuning") &&
        time_grid.size() < 10)
        throw std::invalid_argument("scenario: need >= 10 time grid points");
    if ((name == "frequency_vs_power" || name == "depumping") && power_grid.size() < 3)
        throw std::invalid_argument("scenario: need >= 3 power grid points");
    if (name == "loss_vs_detuning" && detuning_grid.size() < 3)
        throw std::invalid_argument("scenario: need >= 3 detuning grid points");
}

ScenarioResult run_scenario(const Scenario& s, const AtomicLine& line) {
    s.validate();
    line.validate();
    if (s.name == "noise_scaling") return run_noise_scaling(s, line);
    if (s.name == "loading") return run_loading(s, line);
    if (s.name == "losses") return run_losses(s, line);
    if (s.name == "loss_vs_detuning") return run_loss_vs_detuning(s, line);
    if (s.name == "breathing") return run_breathing(s, line);
    if (s.name == "frequency_vs_power") return run_frequency_vs_power(s, line);
    if (s.name == "time_of_flight") return run_time_of_flight(s, line);
    return run_depumping(s, line);
}

ScenarioResult run_scenario(const Scenario& s) { return run_scenario(s, default_line()); }

// ---- defaults, JSON, artifacts ---------------------------------------------

Scenario default_scenario(const std::string& name) {
    Scenario s;
    s.name = name;
    s.probe.detuning = two_pi * 100e6;
    s.probe.power = 0.3e-6;
    s.probe.waist = 20e-6;
    s.probe.duration = 2e-6;
    s.probe.period = 40e-6;
    s.probe.pulse_count = 10;
    s.interferometer.visibility = 0.98;
    s.interferometer.fringe_offset = constants::pi / 2;
    s.loading_truth = {1.34e7, 831.0, 3.5, 1.1e-4};  // compression column
    s.loss_truth = {21.0, 2.3e-4};                   // no-light column

    if (name == "noise_scaling") {
        s.probe.period = 6e-6;
        s.probe.pulse_count = 1000;
        s.run_count = 4;
        s.photon_grid = geom_grid(2e6, 1.12e8, 6);
    } else if (name == "loading") {
        auto early = linear_grid(2e-4, 12e-3, 30);
        auto late = geom_grid(14e-3, 1.2, 30);
        s.time_grid = early;
        s.time_grid.insert(s.time_grid.end(), late.begin(), late.end());
    } else if (name == "losses") {
        s.time_grid = geom_grid(1e-3, 0.25, 40);
    } else if (name == "loss_vs_detuning") {
        s.run_count = 10;
        s.time_grid = geom_grid(2e-4, 0.06, 25);
        s.detuning_grid = linear_grid(-16.0, -6.0, 6);
        s.loss_vs_detuning_truth = {};
    } else if (name == "breathing" || name == "frequency_vs_power") {
        s.probe.power = 150e-9;
        s.probe.period = 100e-6;
        s.probe.pulse_count = 100;
        s.run_count = 50;
        if (name == "frequency_vs_power") {
            s.run_count = 20;
            s.trap_waist = 90e-6;
            s.power_grid = linear_grid(1.0, 6.0, 6);
        }
    } else if (name == "time_of_flight") {
        s.probe.power = 150e-9;
        s.probe.period = 100e-6;
        s.probe.pulse_count = 50;
        s.run_count = 20;
    } else if (name == "depumping") {
        s.probe.power = 1.2e-6;
        s.probe.waist = 21.2e-6;
        s.probe.duration = 10e-6;
        s.probe.period = 100e-6;
        s.probe.pulse_count = 40;
        s.power_grid = {0.3e-6, 0.6e-6, 1.2e-6, 2.4e-6};
    } else {
        throw std::invalid_argument("default_scenario: unknown name '" + name + "'");
    }
    return s;
}

namespace {

void check_keys(const json& obj, const char* where, std::initializer_list<const char*> allowed) {
    for (const auto& [key, _] : obj.items()) {
        if (std::find_if(allowed.begin(), allowed.end(),
                         [&key](const char* a) { return key == a; }) == allowed.end())
            throw std::invalid_argument(std::string("scenario: unknown key '") + key + "' in " +
                                        where);
    }
}

json scenario_json(const Scenario& s) {
    json j;
    j["name"] = s.name;
    j["seed"] = s.seed;
    j["run_count"] = s.run_count;
    j["atom_number"] = s.atom_number;
    j["probe"] = {{"detuning_mhz", s.probe.detuning / (two_pi * 1e6)},
                  {"power_uw", s.probe.power * 1e6},
                  {"waist_um", s.probe.waist * 1e6},
                  {"duration_us", s.probe.duration * 1e6},
                  {"period_us", s.probe.period * 1e6},
                  {"pulse_count", s.probe.pulse_count}};
    j["trap"] = {{"power_w", s.trap_power},
                 {"waist_um", s.trap_waist * 1e6},
                 {"wavelength_nm", s.trap_wavelength * 1e9}};
    j["interferometer"] = {{"visibility", s.interferometer.visibility},
                           {"fringe_offset_rad", s.interferometer.fringe_offset},
                           {"balanced", s.interferometer.balanced}};
    j["noise"] = {{"shot_noise", s.noise.shot_noise_enabled},
                  {"classical_amplitude_rms", s.noise.classical_amplitude_rms},
                  {"classical_phase_rms_rad", s.noise.classical_phase_rms},
                  {"slow_phase_drift_rate_rad_per_s", s.noise.slow_phase_drift_rate},
                  {"phase_random_walk_rms_rad", s.noise.phase_random_walk_rms}};
    json truth;
    if (s.name == "loading") {
        truth["load_rate_per_s"] = s.loading_truth.load_rate;
        truth["mot_decay_per_s"] = s.loading_truth.mot_decay;
        truth["one_body_per_s"] = s.loading_truth.one_body;
        truth["two_body_per_atom_s"] = s.loading_truth.two_body;
    } else if (s.name == "losses") {
        truth["one_body_per_s"] = s.loss_truth.one_body;
        truth["two_body_per_atom_s"] = s.loss_truth.two_body;
    } else if (s.name == "loss_vs_detuning") {
        truth["one_body_per_s"] = s.loss_vs_detuning_truth.one_body;
        truth["dark_two_body_per_atom_s"] = s.loss_vs_detuning_truth.dark_two_body;
        truth["light_two_body_per_atom_s"] = s.loss_vs_detuning_truth.light_two_body;
        truth["reference_detuning_gamma"] = s.loss_vs_detuning_truth.reference_detuning;
        truth["exponent"] = s.loss_vs_detuning_truth.exponent;
    } else if (s.name == "time_of_flight") {
        truth["temperature_uk"] = s.tof_temperature * 1e6;
        truth["radial_freq_hz"] = s.tof_radial_freq;
        truth["include_depumping"] = s.tof_include_depumping;
    } else if (s.name == "breathing" || s.name == "frequency_vs_power") {
        truth["radial_freq_hz"] = s.breathing_radial_freq;
        truth["damping_time_ms"] = s.breathing_damping_time * 1e3;
        truth["depth"] = s.breathing_depth;
    } else if (s.name == "depumping") {
        truth["repump_return"] = s.depump_repump_return;
    }
    json grid;
    if (!s.time_grid.empty()) grid["time_s"] = s.time_grid;
    if (!s.photon_grid.empty()) grid["photons"] = s.photon_grid;
    if (!s.power_grid.empty()) {
        std::vector<double> uw;
        for (const double p : s.power_grid) uw.push_back(p * 1e6);
        grid["power_uw"] = uw;
    }
    if (!s.detuning_grid.empty()) grid["detuning_gamma"] = s.detuning_grid;
    if (!truth.is_null()) j["truth"] = truth;
    if (!grid.is_null()) j["grid"] = grid;
    return j;
}

}  // namespace

std::string scenario_to_json(const Scenario& s) { return scenario_json(s).dump(2); }

Scenario scenario_from_json(const std::string& text) {
    const json j = json::parse(text);
    check_keys(j, "scenario",
               {"name", "seed", "run_count", "atom_number", "probe", "trap", "interferometer",
                "noise", "truth", "grid"});
    if (!j.contains("name")) throw std::invalid_argument("scenario: missing 'name'");
    Scenario s = default_scenario(j.at("name").get<std::string>());

    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("run_count")) s.run_count = j.at("run_count").get<int>();
    if (j.contains("atom_number")) s.atom_number = j.at("atom_number").get<double>();

    if (j.contains("probe")) {
        const auto& p = j.at("probe");
        check_keys(p, "probe", {"detuning_mhz", "power_uw", "waist_um", "duration_us",
                                "period_us", "pulse_count"});
        if (p.contains("detuning_mhz"))
            s.probe.detuning = two_pi * 1e6 * p.at("detuning_mhz").get<double>();
        if (p.contains("power_uw")) s.probe.power = 1e-6 * p.at("power_uw").get<double>();
        if (p.contains("waist_um")) s.probe.waist = 1e-6 * p.at("waist_um").get<double>();
        if (p.contains("duration_us")) s.probe.duration = 1e-6 * p.at("duration_us").get<double>();
        if (p.contains("period_us")) s.probe.period = 1e-6 * p.at("period_us").get<double>();
        if (p.contains("pulse_count")) s.probe.pulse_count = p.at("pulse_count").get<int>();
    }
    if (j.contains("trap")) {
        const auto& t = j.at("trap");
        check_keys(t, "trap", {"power_w", "waist_um", "wavelength_nm"});
        if (t.contains("power_w")) s.trap_power = t.at("power_w").get<double>();
        if (t.contains("waist_um")) s.trap_waist = 1e-6 * t.at("waist_um").get<double>();
        if (t.contains("wavelength_nm"))
            s.trap_wavelength = 1e-9 * t.at("wavelength_nm").get<double>();
    }
    if (j.contains("interferometer")) {
        const auto& f = j.at("interferometer");
        check_keys(f, "interferometer", {"visibility", "fringe_offset_rad", "balanced"});
        if (f.contains("visibility")) s.interferometer.visibility = f.at("visibility").get<double>();
        if (f.contains("fringe_offset_rad"))
            s.interferometer.fringe_offset = f.at("fringe_offset_rad").get<double>();
        if (f.contains("balanced")) s.interferometer.balanced = f.at("balanced").get<bool>();
    }
    if (j.contains("noise")) {
        const auto& n = j.at("noise");
        check_keys(n, "noise",
                   {"shot_noise", "classical_amplitude_rms", "classical_phase_rms_rad",
                    "slow_phase_drift_rate_rad_per_s", "phase_random_walk_rms_rad"});
        if (n.contains("shot_noise")) s.noise.shot_noise_enabled = n.at("shot_noise").get<bool>();
        if (n.contains("classical_amplitude_rms"))
            s.noise.classical_amplitude_rms = n.at("classical_amplitude_rms").get<double>();
        if (n.contains("classical_phase_rms_rad"))
            s.noise.classical_phase_rms = n.at("classical_phase_rms_rad").get<double>();
        if (n.contains("slow_phase_drift_rate_rad_per_s"))
            s.noise.slow_phase_drift_rate = n.at("slow_phase_drift_rate_rad_per_s").get<double>();
        if (n.contains("phase_random_walk_rms_rad"))
            s.noise.phase_random_walk_rms = n.at("phase_random_walk_rms_rad").get<double>();
    }
    if (j.contains("truth")) {
        const auto& t = j.at("truth");
        check_keys(t, "truth",
                   {"load_rate_per_s", "mot_decay_per_s", "one_body_per_s", "two_body_per_atom_s",
                    "temperature_uk", "radial_freq_hz", "include_depumping", "damping_time_ms",
                    "depth", "repump_return", "dark_two_body_per_atom_s",
                    "light_two_body_per_atom_s", "reference_detuning_gamma", "exponent"});
        if (t.contains("load_rate_per_s"))
            s.loading_truth.load_rate = t.at("load_rate_per_s").get<double>();
        if (t.contains("mot_decay_per_s"))
            s.loading_truth.mot_decay = t.at("mot_decay_per_s").get<double>();
        if (t.contains("one_body_per_s")) {
            s.loading_truth.one_body = t.at("one_body_per_s").get<double>();
            s.loss_truth.one_body = s.loading_truth.one_body;
            s.loss_vs_detuning_truth.one_body = s.loading_truth.one_body;
        }
        if (t.contains("two_body_per_atom_s")) {
            s.loading_truth.two_body = t.at("two_body_per_atom_s").get<double>();
            s.loss_truth.two_body = s.loading_truth.two_body;
        }
        if (t.contains("temperature_uk"))
            s.tof_temperature = 1e-6 * t.at("temperature_uk").get<double>();
        if (t.contains("radial_freq_hz")) {
            s.tof_radial_freq = t.at("radial_freq_hz").get<double>();
            s.breathing_radial_freq = s.tof_radial_freq;
        }
        if (t.contains("include_depumping"))
            s.tof_include_depumping = t.at("include_depumping").get<bool>();
        if (t.contains("damping_time_ms"))
            s.breathing_damping_time = 1e-3 * t.at("damping_time_ms").get<double>();
        if (t.contains("depth")) s.breathing_depth = t.at("depth").get<double>();
        if (t.contains("repump_return"))
            s.depump_repump_return = t.at("repump_return").get<double>();
        if (t.contains("dark_two_body_per_atom_s"))
            s.loss_vs_detuning_truth.dark_two_body =
                t.at("dark_two_body_per_atom_s").get<double>();
        if (t.contains("light_two_body_per_atom_s"))
            s.loss_vs_detuning_truth.light_two_body =
                t.at("light_two_body_per_atom_s").get<double>();
        if (t.contains("reference_detuning_gamma"))
            s.loss_vs_detuning_truth.reference_detuning =
                t.at("reference_detuning_gamma").get<double>();
        if (t.contains("exponent"))
            s.loss_vs_detuning_truth.exponent = t.at("exponent").get<double>();
    }
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        check_keys(g, "grid", {"time_s", "photons", "power_uw", "detuning_gamma"});
        if (g.contains("time_s")) s.time_grid = g.at("time_s").get<std::vector<double>>();
        if (g.contains("photons")) s.photon_grid = g.at("photons").get<std::vector<double>>();
        if (g.contains("power_uw")) {
            s.power_grid.clear();
            for (const double p : g.at("power_uw").get<std::vector<double>>())
                s.power_grid.push_back(1e-6 * p);
        }
        if (g.contains("detuning_gamma"))
            s.detuning_grid = g.at("detuning_gamma").get<std::vector<double>>();
    }
    s.validate();
    return s;
}

namespace {

std::string format_cell(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_table(const std::filesystem::path& path, const std::vector<std::string>& cols,
                 const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << cols[c];
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << format_cell(row[c]);
        out << '\n';
    }
}

}  // namespace

void write_scenario_artifacts(const ScenarioResult& result, const std::string& directory) {
    namespace fs = std::filesystem;
    const fs::path target(directory);
    const fs::path staging(directory + ".partial");
    fs::remove_all(staging);
    fs::create_directories(staging);
    try {
        write_table(staging / "dataset.csv", result.dataset_columns, result.dataset);
        write_table(staging / "fit_curve.csv", result.curve_columns, result.curve);
        std::ofstream rep(staging / "report.json");
        if (!rep) throw std::runtime_error("cannot write report.json");
        rep << result.report_json << '\n';
        rep.close();
        fs::remove_all(target);
        fs::rename(staging, target);
    } catch (...) {
        fs::remove_all(staging);
        throw;
    }
}

}  // namespace dipolescope
