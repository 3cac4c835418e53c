// dipolescope command line: run synthetic scenarios, fit external data files,
// print physics quantities, cross-check the numerical oracles.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "dipolescope/estimation.hpp"
#include "dipolescope/harness.hpp"
#include "dipolescope/ode.hpp"

namespace ds = dipolescope;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInputError = 1;
constexpr int kExitNotConverged = 2;

constexpr double two_pi = ds::constants::two_pi;

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// line/column of a byte offset, for JSON parse diagnostics
std::pair<int, int> line_column(const std::string& text, std::size_t byte) {
    int line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

ds::FitData read_csv_data(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    ds::FitData data;
    std::string lineText;
    while (std::getline(in, lineText)) {
        if (lineText.empty() || lineText[0] == '#') continue;
        std::replace(lineText.begin(), lineText.end(), ',', ' ');
        std::istringstream ss(lineText);
        double t, y, sigma;
        if (!(ss >> t >> y)) continue;  // header line
        if (!(ss >> sigma)) sigma = 1.0;
        data.t.push_back(t);
        data.y.push_back(y);
        data.sigma.push_back(sigma);
    }
    if (data.t.empty()) throw std::runtime_error(path + ": no data rows");
    return data;
}

std::string timestamp_dir(const std::string& name) {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    char buf[64];
    std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", std::localtime(&tt));
    return "out/" + name + "-" + buf;
}

int cmd_run(const std::string& scenario_arg, std::string out_dir, long long seed_override,
            const std::string& format) {
    ds::Scenario scenario;
    if (std::filesystem::exists(scenario_arg)) {
        const std::string text = read_file(scenario_arg);
        try {
            scenario = ds::scenario_from_json(text);
        } catch (const json::parse_error& e) {
            const auto [line, col] = line_column(text, e.byte);
            std::cerr << "error: " << scenario_arg << ":" << line << ":" << col
                      << ": malformed JSON: " << e.what() << "\n";
            return kExitInputError;
        }
    } else {
        // bare scenario names resolve to the built-in defaults
        scenario = ds::default_scenario(scenario_arg);
    }
    if (seed_override >= 0) scenario.seed = static_cast<std::uint64_t>(seed_override);

    const auto result = ds::run_scenario(scenario);
    if (out_dir.empty()) out_dir = timestamp_dir(result.name);
    ds::write_scenario_artifacts(result, out_dir);

    if (format == "json") {
        std::cout << result.report_json << "\n";
    } else {
        const json rep = json::parse(result.report_json);
        std::cout << result.name << ": " << rep.at("fit_summary").get<std::string>() << "\n";
        std::cout << "artifacts: " << out_dir << "\n";
    }
    return result.converged ? kExitOk : kExitNotConverged;
}

int cmd_fit(const std::string& driver, const std::string& data_path, double waist_um,
            const std::string& format) {
    const auto data = read_csv_data(data_path);
    ds::FitResult detail;
    std::string summary;
    if (driver == "loss") {
        const auto fit = ds::fit_loss(data);
        detail = fit.detail;
        summary = detail.summary(std::vector<std::string>{"N0 (atoms)", "Gamma (1/s)", "beta (1/(atom s))"});
    } else if (driver == "loading") {
        const auto fit = ds::fit_loading(data);
        detail = fit.detail;
        summary = detail.summary(std::vector<std::string>{"R0 (atoms/s)", "gamma_MOT (1/s)",
                                                          "Gamma_L (1/s)", "beta_L (1/(atom s))"});
    } else if (driver == "breathing") {
        const auto fit = ds::fit_breathing(data);
        detail = fit.detail;
        summary = detail.summary(std::vector<std::string>{"signal freq (Hz)", "tau_d (s)",
                                                          "depth", "baseline"});
        summary += "nu_r = " + ds::value_error_string(fit.radial_freq, fit.radial_freq_error) +
                   " Hz\n";
    } else if (driver == "temperature") {
        if (waist_um <= 0) {
            std::cerr << "error: --waist-um is required for the temperature driver\n";
            return kExitInputError;
        }
        const auto fit = ds::fit_temperature(data, waist_um * 1e-6);
        detail = fit.detail;
        summary = "T = " +
                  ds::value_error_string(fit.temperature * 1e6, fit.temperature_error * 1e6) +
                  " uK\nnu_r = " +
                  ds::value_error_string(fit.radial_freq, fit.radial_freq_error) + " Hz\n";
    } else {
        std::cerr << "error: unknown driver '" << driver << "'\n";
        return kExitInputError;
    }
    if (format == "json")
        std::cout << detail.to_json() << "\n";
    else
        std::cout << summary;
    return detail.converged ? kExitOk : kExitNotConverged;
}

int cmd_physics(const std::string& query, double power_uw, double duration_us, double waist_um,
                double detuning_mhz, double power_w, double wavelength_nm, double atoms,
                double ground_f, const std::string& format) {
    const auto line = ds::default_line();
    json out;
    std::ostringstream text;
    if (query == "pe") {
        ds::ProbePulseConfig probe;
        probe.detuning = two_pi * detuning_mhz * 1e6;
        probe.power = power_uw * 1e-6;
        probe.waist = waist_um * 1e-6;
        probe.duration = duration_us * 1e-6;
        probe.period = probe.duration;
        probe.pulse_count = 1;
        const double pe = ds::excitation_probability(probe, line);
        out["p_e"] = pe;
        out["photon_number"] = probe.photon_number(line);
        for (const auto& [two_fp, p] : ds::excitation_probabilities(probe, line))
            out["p_e_by_excited_f"][std::to_string(two_fp / 2)] = p;
        text << "p_e = " << pe << "  (n = " << probe.photon_number(line) << " photons)\n";
    } else if (query == "phase") {
        const double conv =
            ds::phase_per_atom(line, two_pi * detuning_mhz * 1e6, waist_um * 1e-6);
        out["phase_per_atom_rad"] = conv;
        out["phase_rad"] = conv * atoms;
        text << "phase = " << conv * atoms << " rad  (" << conv << " rad/atom)\n";
    } else if (query == "depth") {
        const auto props = ds::dipole_trap_properties(power_w, waist_um * 1e-6,
                                                      wavelength_nm * 1e-9, line);
        out["depth_uk"] = props.depth_kelvin * 1e6;
        out["radial_freq_hz"] = props.radial_freq_hz;
        text << "U/kB = " << props.depth_kelvin * 1e6 << " uK, nu_r = " << props.radial_freq_hz
             << " Hz\n";
    } else if (query == "strengths") {
        const auto table = ds::transition_strengths(line);
        const int two_f = static_cast<int>(std::lround(2 * ground_f));
        double sum = 0.0;
        for (const auto& [f, fp, s] : table.entries()) {
            if (f != two_f) continue;
            out["strengths"][std::to_string(fp / 2)] = s;
            text << "S(F=" << two_f / 2 << " -> F'=" << fp / 2 << ") = " << s << "\n";
            sum += s;
        }
        out["sum"] = sum;
        text << "sum = " << sum << "\n";
    } else {
        std::cerr << "error: unknown physics query '" << query << "'\n";
        return kExitInputError;
    }
    if (format == "json")
        std::cout << out.dump(2) << "\n";
    else
        std::cout << text.str();
    return kExitOk;
}

int cmd_oracle(const std::string& which, double temperature_uk, double radial_freq_hz,
               double waist_um, std::size_t samples, std::uint64_t seed) {
    if (which == "ballistic") {
        ds::BallisticParams bp;
        bp.temperature = temperature_uk * 1e-6;
        bp.radial_freq = radial_freq_hz;
        bp.probe_waist = waist_um * 1e-6;
        double worst = 0.0;
        std::printf("%12s %14s %14s %12s\n", "t (ms)", "closed form", "monte carlo", "|diff|");
        for (int i = 1; i <= 20; ++i) {
            const double t = 4e-3 * i / 20.0;
            const double closed = ds::ballistic_escape_probability(bp, t);
            const double mc = ds::ballistic_mc_oracle(bp, t, samples, seed + i);
            worst = std::max(worst, std::abs(closed - mc));
            std::printf("%12.3f %14.6f %14.6f %12.2e\n", t * 1e3, closed, mc,
                        std::abs(closed - mc));
        }
        std::printf("max |diff| = %.2e (tolerance 5e-3 at 1e6 samples)\n", worst);
        return worst < 5e-3 ? kExitOk : kExitNotConverged;
    }
    if (which == "riccati") {
        double worst = 0.0;
        for (const double g : {3.5, 12.0, 21.0, 35.0, 47.0}) {
            for (const double b : {3e-5, 1.1e-4, 2.3e-4, 1e-3, 1.1e-2}) {
                const ds::LossParams lp{g, b};
                std::vector<double> grid(41);
                for (std::size_t i = 0; i < grid.size(); ++i)
                    grid[i] = 5.0 / g * static_cast<double>(i) / (grid.size() - 1);
                const auto ode = ds::integrate_ode(
                    [&](double, double n) { return -g * n - b * n * n; }, 1e5, grid,
                    {.rel_tol = 1e-11, .abs_tol = 1e-6});
                for (std::size_t i = 1; i < grid.size(); ++i) {
                    const double closed = ds::loss_curve_closed_form(lp, 1e5, grid[i]);
                    worst = std::max(worst, std::abs(closed - ode[i]) / closed);
                }
            }
        }
        std::printf("max relative error closed form vs ODE: %.2e (tolerance 1e-6)\n", worst);
        return worst < 1e-6 ? kExitOk : kExitNotConverged;
    }
    std::cerr << "error: unknown oracle '" << which << "'\n";
    return kExitInputError;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dipolescope: interferometric dipole-trap characterization toolkit"};
    app.require_subcommand(1);

    // run
    std::string scenario_arg, out_dir, format = "text";
    long long seed_override = -1;
    auto* run = app.add_subcommand("run", "run a scenario and write artifacts");
    run->add_option("--scenario,scenario", scenario_arg,
                    "scenario JSON file or built-in name")->required();
    run->add_option("--out", out_dir, "output directory (default: out/<name>-<timestamp>)");
    run->add_option("--seed", seed_override, "override the scenario RNG seed");
    run->add_option("--format", format, "stdout format: text|json");

    // fit
    std::string driver, data_path;
    double fit_waist_um = -1.0;
    auto* fit = app.add_subcommand("fit", "fit an external data file (CSV: t,y[,sigma])");
    fit->add_option("--driver", driver, "loss|loading|breathing|temperature")->required();
    fit->add_option("--data", data_path, "CSV data file")->required();
    fit->add_option("--waist-um", fit_waist_um, "probe waist (temperature driver)");
    fit->add_option("--format", format, "stdout format: text|json");

    // physics
    std::string query;
    double power_uw = 0.1515, duration_us = 2.0, waist_um = 20.0, detuning_mhz = 100.0;
    double power_w = 3.5, wavelength_nm = 1030.0, atoms = 1e5, ground_f = 4.0;
    auto* physics = app.add_subcommand("physics", "print physics quantities");
    physics->add_option("query", query, "pe|phase|depth|strengths")->required();
    physics->add_option("--power-uw", power_uw, "probe power in uW");
    physics->add_option("--duration-us", duration_us, "pulse duration in us");
    physics->add_option("--waist-um", waist_um, "beam waist in um");
    physics->add_option("--detuning-mhz", detuning_mhz, "detuning from cycling line in MHz");
    physics->add_option("--power-w", power_w, "trap power in W");
    physics->add_option("--wavelength-nm", wavelength_nm, "trap wavelength in nm");
    physics->add_option("--atoms", atoms, "effective atom number in the probe volume");
    physics->add_option("--f", ground_f, "ground-state F");
    physics->add_option("--format", format, "stdout format: text|json");

    // oracle
    std::string which;
    double o_temperature_uk = 15.0, o_radial_freq_hz = 275.0, o_waist_um = 20.0;
    std::size_t o_samples = 1000000;
    std::uint64_t o_seed = 1;
    auto* oracle = app.add_subcommand("oracle", "cross-check numerical oracles");
    oracle->add_option("which", which, "ballistic|riccati")->required();
    oracle->add_option("--temperature-uk", o_temperature_uk, "cloud temperature in uK");
    oracle->add_option("--radial-freq-hz", o_radial_freq_hz, "trap radial frequency in Hz");
    oracle->add_option("--waist-um", o_waist_um, "probe waist in um");
    oracle->add_option("--samples", o_samples, "Monte-Carlo samples");
    oracle->add_option("--seed", o_seed, "Monte-Carlo seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(scenario_arg, out_dir, seed_override, format);
        if (fit->parsed()) return cmd_fit(driver, data_path, fit_waist_um, format);
        if (physics->parsed())
            return cmd_physics(query, power_uw, duration_us, waist_um, detuning_mhz, power_w,
                               wavelength_nm, atoms, ground_f, format);
        if (oracle->parsed())
            return cmd_oracle(which, o_temperature_uk, o_radial_freq_hz, o_waist_um, o_samples,
                              o_seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInputError;
    }
    return kExitInputError;
}
