#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dipolescope/trap_dynamics.hpp"

// Damped nonlinear least-squares engine (Levenberg-Marquardt with Marquardt
// scaling on the normal equations) and the per-experiment fit drivers.

namespace dipolescope {

struct FitData {
    std::vector<double> t;
    std::vector<double> y;
    std::vector<double> sigma;
    void validate() const;
};

// model(params, t) -> predictions at every t
using ModelFn =
    std::function<std::vector<double>(std::span<const double>, std::span<const double>)>;
// jacobian(params, t) -> row-major n_points x n_params
using JacobianFn =
    std::function<std::vector<double>(std::span<const double>, std::span<const double>)>;

struct FitProblem {
    ModelFn model;
    FitData data;
    std::vector<double> initial;
    std::vector<double> lower;  // empty = unbounded
    std::vector<double> upper;
    JacobianFn jacobian;        // optional; forward differences otherwise
};

struct LmOptions {
    int max_iterations = 200;
    double chi2_rel_tol = 1e-10;
    double step_tol = 1e-12;
    double fd_rel_step = 1e-6;
    double damping_init = 1e-3;
    double damping_max = 1e12;
    // per-iteration cap on the largest parameter step (internal coordinates);
    // keeps rough starting values from jumping across basins
    double max_step = std::numeric_limits<double>::infinity();
};

struct FitResult {
    std::vector<double> params;
    std::vector<double> std_errors;
    std::vector<double> covariance;  // row-major k x k
    double chi2 = 0.0;
    double reduced_chi2 = 0.0;
    bool converged = false;
    int iterations = 0;
    std::string message;

    std::string to_json() const;
    // paper-style "value(error)" summary, one line per parameter
    std::string summary(std::span<const std::string> names) const;
};

FitResult lm_fit(const FitProblem& problem, const LmOptions& options = {});

// finite-difference Jacobian used by lm_fit, exposed for cross-checks
std::vector<double> finite_difference_jacobian(const ModelFn& model,
                                               std::span<const double> params,
                                               std::span<const double> t, double rel_step = 1e-6);

std::string value_error_string(double value, double error);

// ---- fit drivers ----------------------------------------------------------

struct LoadingFit {
    LoadingParams params;
    LoadingParams errors;
    double split_time = 0.0;
    FitResult detail;
};

// Two-stage fit of the loading equation: the early/late piecewise strategy
// seeds a full rate-equation refinement over the whole curve. Loading data is
// assumed to start from an empty trap.
LoadingFit fit_loading(const FitData& data, std::optional<double> split_time = std::nullopt);

struct LossFit {
    LossParams params;
    LossParams errors;
    double initial_number = 0.0;
    FitResult detail;
};

LossFit fit_loss(const FitData& data);

struct BreathingFit {
    double radial_freq = 0.0;  // Hz, half the fitted signal frequency
    double radial_freq_error = 0.0;
    double damping_time = 0.0;
    double damping_time_error = 0.0;
    double depth = 0.0;
    double baseline = 0.0;
    bool near_nyquist = false;
    FitResult detail;
};

BreathingFit fit_breathing(const FitData& data);

struct TemperatureFit {
    double temperature = 0.0;  // K
    double temperature_error = 0.0;
    double radial_freq = 0.0;  // Hz
    double radial_freq_error = 0.0;
    FitResult detail;
};

TemperatureFit fit_temperature(const FitData& data, double probe_waist,
                               double gravity = constants::standard_gravity,
                               double mass = constants::cesium_mass);

struct DepumpSeries {
    double power = 0.0;  // W
    FitData decay;       // t = pulse index, y = phase normalized to first pulse
};

// converts a fitted per-pulse depump probability into a total excitation
// probability: p_e = q / branch_to_dark * total_over_leaky
struct DepumpCalibration {
    double branch_to_dark = 0.0;    // b(F'_leaky -> dark F)
    double total_over_leaky = 1.0;  // sum_F' p_e,F' / p_e,leaky at this detuning
};

struct DepumpingFit {
    std::vector<double> powers;
    std::vector<double> p_e;
    std::vector<double> p_e_error;
    double slope = 0.0;  // 1/W
    double slope_error = 0.0;
    double intercept = 0.0;
    double intercept_error = 0.0;
    std::vector<FitResult> details;
};

DepumpingFit fit_depumping(std::span<const DepumpSeries> series, const DepumpCalibration& cal);

}  // namespace dipolescope
