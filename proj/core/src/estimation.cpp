#include "dipolescope/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace dipolescope {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// dense symmetric solve / inverse by Cholesky; k stays tiny (<= 6)
bool cholesky(std::vector<double>& a, int k) {
    double diag_max = 0.0;
    for (int j = 0; j < k; ++j) diag_max = std::max(diag_max, a[j * k + j]);
    for (int j = 0; j < k; ++j) {
        double d = a[j * k + j];
        for (int p = 0; p < j; ++p) d -= a[j * k + p] * a[j * k + p];
        if (d <= 1e-15 * diag_max || !std::isfinite(d)) return false;
        const double l = std::sqrt(d);
        a[j * k + j] = l;
        for (int i = j + 1; i < k; ++i) {
            double s = a[i * k + j];
            for (int p = 0; p < j; ++p) s -= a[i * k + p] * a[j * k + p];
            a[i * k + j] = s / l;
        }
    }
    return true;
}

bool solve_spd(std::vector<double> a, std::vector<double> b, int k, std::vector<double>& x) {
    if (!cholesky(a, k)) return false;
    for (int i = 0; i < k; ++i) {
        double s = b[i];
        for (int p = 0; p < i; ++p) s -= a[i * k + p] * b[p];
        b[i] = s / a[i * k + i];
    }
    for (int i = k - 1; i >= 0; --i) {
        double s = b[i];
        for (int p = i + 1; p < k; ++p) s -= a[p * k + i] * b[p];
        b[i] = s / a[i * k + i];
    }
    x = std::move(b);
    return true;
}

bool invert_spd(std::vector<double> a, int k, std::vector<double>& inv) {
    inv.assign(static_cast<std::size_t>(k) * k, 0.0);
    std::vector<double> chol = a;
    if (!cholesky(chol, k)) return false;
    for (int col = 0; col < k; ++col) {
        std::vector<double> e(k, 0.0), x;
        e[col] = 1.0;
        // reuse the factor: forward then backward substitution
        for (int i = 0; i < k; ++i) {
            double s = e[i];
            for (int p = 0; p < i; ++p) s -= chol[i * k + p] * e[p];
            e[i] = s / chol[i * k + i];
        }
        for (int i = k - 1; i >= 0; --i) {
            double s = e[i];
            for (int p = i + 1; p < k; ++p) s -= chol[p * k + i] * e[p];
            e[i] = s / chol[i * k + i];
        }
        for (int i = 0; i < k; ++i) inv[i * k + col] = e[i];
    }
    return true;
}

double chi_square(const std::vector<double>& model, const FitData& d) {
    double acc = 0.0;
    for (std::size_t i = 0; i < d.y.size(); ++i) {
        const double r = (d.y[i] - model[i]) / d.sigma[i];
        acc += r * r;
    }
    return acc;
}

std::vector<double> safe_eval(const ModelFn& model, std::span<const double> p,
                              std::span<const double> t, bool& ok) {
    ok = true;
    std::vector<double> out;
    try {
        out = model(p, t);
    } catch (const std::exception&) {
        ok = false;
        return {};
    }
    if (out.size() != t.size()) {
        ok = false;
        return {};
    }
    for (const double v : out)
        if (!std::isfinite(v)) {
            ok = false;
            return {};
        }
    return out;
}

void clamp_params(std::vector<double>& p, const FitProblem& prob) {
    for (std::size_t j = 0; j < p.size(); ++j) {
        if (!prob.lower.empty()) p[j] = std::max(p[j], prob.lower[j]);
        if (!prob.upper.empty()) p[j] = std::min(p[j], prob.upper[j]);
    }
}

}  // namespace

void FitData::validate() const {
    if (t.size() != y.size() || t.size() != sigma.size())
        throw std::invalid_argument("FitData: t/y/sigma lengths differ");
    for (const double s : sigma)
        if (!(s > 0.0)) throw std::invalid_argument("FitData: sigma must be > 0");
}

std::vector<double> finite_difference_jacobian(const ModelFn& model,
                                               std::span<const double> params,
                                               std::span<const double> t, double rel_step) {
    const std::size_t k = params.size(), n = t.size();
    std::vector<double> base = model(params, t);
    std::vector<double> jac(n * k);
    std::vector<double> p(params.begin(), params.end());
    for (std::size_t j = 0; j < k; ++j) {
        const double h = rel_step * std::max(std::abs(p[j]), 1.0);
        const double saved = p[j];
        p[j] = saved + h;
        const std::vector<double> bumped = model(p, t);
        p[j] = saved;
        for (std::size_t i = 0; i < n; ++i) jac[i * k + j] = (bumped[i] - base[i]) / h;
    }
    return jac;
}

FitResult lm_fit(const FitProblem& problem, const LmOptions& options) {
    problem.data.validate();
    const std::size_t n = problem.data.t.size();
    const std::size_t k = problem.initial.size();
    if (k == 0) throw std::invalid_argument("lm_fit: no parameters");
    if (n < k) throw std::invalid_argument("lm_fit: need at least as many points as parameters");
    if (!problem.lower.empty() && problem.lower.size() != k)
        throw std::invalid_argument("lm_fit: bounds size mismatch");
    if (!problem.upper.empty() && problem.upper.size() != k)
        throw std::invalid_argument("lm_fit: bounds size mismatch");

    FitResult res;
    std::vector<double> p = problem.initial;
    clamp_params(p, problem);

    bool ok = false;
    std::vector<double> model = safe_eval(problem.model, p, problem.data.t, ok);
    if (!ok) throw std::invalid_argument("lm_fit: model not finite at initial parameters");
    double chi2 = chi_square(model, problem.data);

    double damping = options.damping_init;
    bool converged = false;
    std::string message;
    int iter = 0;

    for (; iter < options.max_iterations && !converged; ++iter) {
        // weighted Jacobian and gradient
        std::vector<double> jac =
            problem.jacobian ? problem.jacobian(p, problem.data.t)
                             : finite_difference_jacobian(problem.model, p, problem.data.t,
                                                          options.fd_rel_step);
        std::vector<double> jtj(k * k, 0.0), jtr(k, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double w = 1.0 / problem.data.sigma[i];
            const double r = (problem.data.y[i] - model[i]) * w;
            for (std::size_t a = 0; a < k; ++a) {
                const double ja = jac[i * k + a] * w;
                jtr[a] += ja * r;
                for (std::size_t b = a; b < k; ++b) jtj[a * k + b] += ja * jac[i * k + b] * w;
            }
        }
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = 0; b < a; ++b) jtj[a * k + b] = jtj[b * k + a];

        bool stepped = false;
        while (!stepped) {
            // Marquardt scaling: damp by the diagonal of J^T J
            std::vector<double> a = jtj;
            for (std::size_t j = 0; j < k; ++j) {
                const double d = jtj[j * k + j] > 0.0 ? jtj[j * k + j] : 1.0;
                a[j * k + j] += damping * d;
            }
            std::vector<double> delta;
            if (!solve_spd(a, jtr, static_cast<int>(k), delta)) {
                damping *= 10.0;
                if (damping > options.damping_max) {
                    message = "damping exceeded 1e12 (singular normal equations)";
                    goto done;
                }
                continue;
            }
            double biggest = 0.0;
            for (const double dj : delta) biggest = std::max(biggest, std::abs(dj));
            if (biggest > options.max_step)
                for (auto& dj : delta) dj *= options.max_step / biggest;
            std::vector<double> trial = p;
            for (std::size_t j = 0; j < k; ++j) trial[j] += delta[j];
            clamp_params(trial, problem);

            bool trial_ok = false;
            std::vector<double> trial_model =
                safe_eval(problem.model, trial, problem.data.t, trial_ok);
            const double trial_chi2 = trial_ok ? chi_square(trial_model, problem.data) : kInf;

            if (trial_chi2 <= chi2) {
                double step2 = 0.0, norm2 = 0.0;
                for (std::size_t j = 0; j < k; ++j) {
                    const double dj = trial[j] - p[j];
                    step2 += dj * dj;
                    norm2 += p[j] * p[j];
                }
                const double rel_drop = (chi2 - trial_chi2) / std::max(chi2, 1e-300);
                p = std::move(trial);
                model = std::move(trial_model);
                chi2 = trial_chi2;
                damping = std::max(damping / 3.0, 1e-14);
                stepped = true;
                // the chi2 criterion only counts with a healthy trust region;
                // heavily damped micro-steps also shrink chi2 slowly
                if ((rel_drop < options.chi2_rel_tol && damping <= options.damping_init) ||
                    std::sqrt(step2) < options.step_tol * (1.0 + std::sqrt(norm2))) {
                    converged = true;
                    message = "converged";
                }
            } else {
                damping *= 10.0;
                if (damping > options.damping_max) {
                    message = "damping exceeded 1e12 without chi2 improvement";
                    goto done;
                }
            }
        }
    }
    if (!converged && message.empty())
        message = "max iterations reached without convergence";

done:
    res.params = p;
    res.chi2 = chi2;
    res.reduced_chi2 = n > k ? chi2 / static_cast<double>(n - k) : kNaN;
    res.converged = converged;
    res.iterations = iter;
    res.message = message;

    // covariance from the unscaled normal equations at the optimum
    {
        std::vector<double> jac =
            problem.jacobian ? problem.jacobian(p, problem.data.t)
                             : finite_difference_jacobian(problem.model, p, problem.data.t,
                                                          options.fd_rel_step);
        std::vector<double> jtj(k * k, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double w = 1.0 / problem.data.sigma[i];
            for (std::size_t a = 0; a < k; ++a)
                for (std::size_t b = a; b < k; ++b)
                    jtj[a * k + b] += jac[i * k + a] * jac[i * k + b] * w * w;
        }
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = 0; b < a; ++b) jtj[a * k + b] = jtj[b * k + a];
        if (invert_spd(jtj, static_cast<int>(k), res.covariance)) {
            res.std_errors.resize(k);
            for (std::size_t j = 0; j < k; ++j)
                res.std_errors[j] = std::sqrt(std::max(res.covariance[j * k + j], 0.0));
            for (std::size_t a = 0; a < k; ++a)
                for (std::size_t b = a + 1; b < k; ++b) {
                    const double denom = res.std_errors[a] * res.std_errors[b];
                    if (denom > 0.0 &&
                        std::abs(res.covariance[a * k + b]) / denom > 0.99999) {
                        if (!res.message.empty()) res.message += "; ";
                        res.message += "parameters nearly degenerate at the optimum";
                        a = k;
                        break;
                    }
                }
        } else {
            res.covariance.assign(k * k, kNaN);
            res.std_errors.assign(k, kNaN);
            if (!res.message.empty()) res.message += "; ";
            res.message += "covariance singular at optimum";
        }
    }
    return res;
}

std::string value_error_string(double value, double error) {
    char buf[64];
    if (!(error > 0.0) || !std::isfinite(error)) {
        std::snprintf(buf, sizeof buf, "%g", value);
        return buf;
    }
    int err_exp = static_cast<int>(std::floor(std::log10(error)));
    // two significant error digits when the leading digit is 1
    int digits = error / std::pow(10.0, err_exp) < 2.0 ? 2 : 1;
    int place = err_exp - (digits - 1);
    const double scale = std::pow(10.0, place);
    long err_scaled = std::lround(error / scale);
    if (err_scaled == 100) {  // rounding bumped 0.99x up to the next decade
        err_scaled = 10;
        ++place;
    }
    const double v_rounded = std::round(value / scale) * scale;
    if (place >= 0) {
        std::snprintf(buf, sizeof buf, "%.0f(%ld)", v_rounded,
                      err_scaled * static_cast<long>(std::pow(10.0, place)));
    } else {
        std::snprintf(buf, sizeof buf, "%.*f(%ld)", -place, v_rounded, err_scaled);
    }
    return buf;
}

std::string FitResult::to_json() const {
    nlohmann::json j;
    j["params"] = params;
    j["std_errors"] = std_errors;
    j["covariance"] = covariance;
    j["chi2"] = chi2;
    j["reduced_chi2"] = reduced_chi2;
    j["converged"] = converged;
    j["iterations"] = iterations;
    j["message"] = message;
    return j.dump(2);
}

std::string FitResult::summary(std::span<const std::string> names) const {
    std::ostringstream out;
    for (std::size_t j = 0; j < params.size(); ++j) {
        const std::string name = j < names.size() ? names[j] : "p" + std::to_string(j);
        out << name << " = "
            << value_error_string(params[j], j < std_errors.size() ? std_errors[j] : 0.0) << '\n';
    }
    out << "reduced chi2 = " << reduced_chi2 << (converged ? "" : "  [NOT CONVERGED]") << '\n';
    return out.str();
}

// ---- transformed (log-scale) fitting helpers -------------------------------

namespace {

enum class Scale { Linear, Log };

struct ScaledFit {
    FitResult raw;                  // result in internal coordinates
    std::vector<double> params;     // natural coordinates
    std::vector<double> errors;     // delta-method
};

ScaledFit lm_fit_scaled(const ModelFn& natural_model, const FitData& data,
                        std::vector<double> initial, const std::vector<Scale>& scales,
                        std::vector<double> lower = {}, std::vector<double> upper = {},
                        const LmOptions& options = {}) {
    const std::size_t k = initial.size();
    std::vector<double> theta(k);
    for (std::size_t j = 0; j < k; ++j)
        theta[j] = scales[j] == Scale::Log ? std::log(initial[j]) : initial[j];

    // box the log-scale parameters around their starting values: rates that
    // the data cannot resolve would otherwise run to -inf and flatten the
    // Jacobian column
    if (lower.empty()) lower.assign(k, -kInf);
    if (upper.empty()) upper.assign(k, kInf);
    for (std::size_t j = 0; j < k; ++j) {
        if (scales[j] != Scale::Log) continue;
        lower[j] = std::max(lower[j], theta[j] - 13.0);
        upper[j] = std::min(upper[j], theta[j] + 13.0);
    }

    FitProblem prob;
    prob.data = data;
    prob.initial = std::move(theta);
    prob.lower = std::move(lower);
    prob.upper = std::move(upper);
    prob.model = [&natural_model, scales, k](std::span<const double> q,
                                             std::span<const double> t) {
        std::vector<double> p(k);
        for (std::size_t j = 0; j < k; ++j)
            p[j] = scales[j] == Scale::Log ? std::exp(std::min(q[j], 700.0)) : q[j];
        return natural_model(p, t);
    };

    LmOptions opts = options;
    opts.max_step = std::min(opts.max_step, 2.5);

    ScaledFit out;
    out.raw = lm_fit(prob, opts);
    out.params.resize(k);
    out.errors.resize(k);
    for (std::size_t j = 0; j < k; ++j) {
        if (scales[j] == Scale::Log) {
            out.params[j] = std::exp(out.raw.params[j]);
            out.errors[j] = out.params[j] * out.raw.std_errors[j];
        } else {
            out.params[j] = out.raw.params[j];
            out.errors[j] = out.raw.std_errors[j];
        }
    }
    return out;
}

std::vector<double> moving_average(const std::vector<double>& y, int window) {
    std::vector<double> out(y.size());
    const int half = window / 2;
    for (int i = 0; i < static_cast<int>(y.size()); ++i) {
        const int lo = std::max(0, i - half);
        const int hi = std::min<int>(static_cast<int>(y.size()) - 1, i + half);
        double acc = 0.0;
        for (int j = lo; j <= hi; ++j) acc += y[j];
        out[i] = acc / (hi - lo + 1);
    }
    return out;
}

FitData slice(const FitData& d, std::size_t lo, std::size_t hi) {  // [lo, hi)
    FitData out;
    out.t.assign(d.t.begin() + lo, d.t.begin() + hi);
    out.y.assign(d.y.begin() + lo, d.y.begin() + hi);
    out.sigma.assign(d.sigma.begin() + lo, d.sigma.begin() + hi);
    return out;
}

}  // namespace

// ---- loss ------------------------------------------------------------------

LossFit fit_loss(const FitData& data) {
    data.validate();
    if (data.t.size() < 5) throw std::invalid_argument("fit_loss: need >= 5 points");

    const double t0 = data.t.front();
    const double n0_guess = std::max(data.y.front(), 1.0);
    const double span = std::max(data.t.back() - t0, 1e-9);
    const double y_end = std::max(data.y.back(), n0_guess * 1e-6);
    const double g_guess = std::clamp(std::log(n0_guess / y_end) / span, 1e-6, 1e9);

    const ModelFn model = [t0](std::span<const double> p, std::span<const double> t) {
        const LossParams lp{p[1], p[2]};
        std::vector<double> out(t.size());
        for (std::size_t i = 0; i < t.size(); ++i)
            out[i] = loss_curve_closed_form(lp, p[0], t[i] - t0);
        return out;
    };

    auto fit = lm_fit_scaled(model, data, {n0_guess, g_guess, g_guess / n0_guess},
                             {Scale::Log, Scale::Log, Scale::Log});
    LossFit out;
    out.initial_number = fit.params[0];
    out.params = {fit.params[1], fit.params[2]};
    out.errors = {fit.errors[1], fit.errors[2]};
    out.detail = fit.raw;
    out.detail.params = fit.params;
    out.detail.std_errors = fit.errors;
    return out;
}

// ---- loading ----------------------------------------------------------------

LoadingFit fit_loading(const FitData& data, std::optional<double> split_time) {
    data.validate();
    const std::size_t n = data.t.size();
    if (n < 10) throw std::invalid_argument("fit_loading: need >= 10 points");

    const auto smooth = moving_average(data.y, 5);
    const std::size_t peak_idx =
        std::distance(smooth.begin(), std::max_element(smooth.begin(), smooth.end()));
    const double t_star = split_time.value_or(data.t[peak_idx]);
    const double n_peak = std::max(smooth[peak_idx], 1.0);

    auto count_until = [&](double tmax) {
        std::size_t c = 0;
        while (c < n && data.t[c] <= tmax) ++c;
        return c;
    };
    auto first_at_least = [&](double tmin) {
        std::size_t c = 0;
        while (c < n && data.t[c] < tmin) ++c;
        return c;
    };

    // stage 1a: loss-free loading on a window trimmed to ~2 MOT decay times
    const ModelFn early_model = [](std::span<const double> p, std::span<const double> t) {
        std::vector<double> out(t.size());
        for (std::size_t i = 0; i < t.size(); ++i)
            out[i] = p[0] * -std::expm1(-p[1] * t[i]) / p[1];
        return out;
    };
    std::size_t n_early = count_until(t_star);
    if (n_early < 6) throw std::invalid_argument("fit_loading: insufficient points before t*");
    double r0 = std::max((data.y[1] - data.y[0]) / std::max(data.t[1] - data.t[0], 1e-12), 1.0);
    double g_mot = std::max(r0 / n_peak, 1e-6);
    for (int pass = 0; pass < 3; ++pass) {
        auto fit = lm_fit_scaled(early_model, slice(data, 0, n_early), {r0, g_mot},
                                 {Scale::Log, Scale::Log});
        r0 = fit.params[0];
        g_mot = fit.params[1];
        const std::size_t trimmed = count_until(std::min(t_star, 2.0 / g_mot));
        if (trimmed < 6 || trimmed == n_early) break;
        n_early = trimmed;
    }

    // stage 1b: pure-loss decay past the split, guarded until loading has died out
    const double t_late = t_star + 2.5 / g_mot;
    const std::size_t late_begin = first_at_least(t_late);
    if (n - late_begin < 5) throw std::invalid_argument("fit_loading: insufficient points after t*");
    const FitData late = slice(data, late_begin, n);
    const double late_t0 = late.t.front();
    const ModelFn late_model = [late_t0](std::span<const double> p, std::span<const double> t) {
        const LossParams lp{p[1], p[2]};
        std::vector<double> out(t.size());
        for (std::size_t i = 0; i < t.size(); ++i)
            out[i] = loss_curve_closed_form(lp, p[0], t[i] - late_t0);
        return out;
    };
    const double n_star = std::max(smooth[std::min(late_begin, n - 1)], 1.0);
    const double span_late = std::max(late.t.back() - late_t0, 1e-9);
    const double gl_guess =
        std::clamp(std::log(n_star / std::max(late.y.back(), 1e-3 * n_star)) / span_late, 1e-6, 1e9);
    auto late_fit = lm_fit_scaled(late_model, late, {n_star, gl_guess, gl_guess / n_star},
                                  {Scale::Log, Scale::Log, Scale::Log});
    double gamma_l = late_fit.params[1];
    double beta_l = late_fit.params[2];

    // stage 2: refine all four parameters against the full rate equation
    const ModelFn full_model = [](std::span<const double> p, std::span<const double> t) {
        const LoadingParams lp{p[0], p[1], p[2], p[3]};
        return loading_curve(lp, 0.0, t);
    };
    if (beta_l < 1e-3 * gamma_l / n_peak) beta_l = gamma_l / n_peak;  // avoid the flat zero axis
    auto fit = lm_fit_scaled(full_model, data, {r0, g_mot, gamma_l, beta_l},
                             {Scale::Log, Scale::Log, Scale::Log, Scale::Log});

    LoadingFit out;
    out.params = {fit.params[0], fit.params[1], fit.params[2], fit.params[3]};
    out.errors = {fit.errors[0], fit.errors[1], fit.errors[2], fit.errors[3]};
    out.split_time = t_star;
    out.detail = fit.raw;
    out.detail.params = fit.params;
    out.detail.std_errors = fit.errors;
    return out;
}

// ---- breathing ---------------------------------------------------------------

BreathingFit fit_breathing(const FitData& data) {
    data.validate();
    const std::size_t n = data.t.size();
    if (n < 8) throw std::invalid_argument("fit_breathing: need >= 8 points");
    const double dt = (data.t.back() - data.t.front()) / static_cast<double>(n - 1);
    const double nyquist = 0.5 / dt;
    const double span = data.t.back() - data.t.front();

    double baseline = 0.0;
    for (const double v : data.y) baseline += v;
    baseline /= static_cast<double>(n);
    double ymax = -kInf, ymin = kInf;
    for (const double v : data.y) {
        ymax = std::max(ymax, v);
        ymin = std::min(ymin, v);
    }
    const double depth0 = std::clamp((ymax - ymin) / (2.0 * std::max(baseline, 1e-12)), 0.01, 0.9);

    // coarse frequency scan with a linear sinusoid fit at each trial frequency
    double best_f = nyquist * 0.25, best_ssr = kInf;
    for (int i = 1; i <= 400; ++i) {
        const double f = nyquist * i / 402.0;
        double cc = 0, cs = 0, ss = 0, yc = 0, ys = 0;
        for (std::size_t j = 0; j < n; ++j) {
            const double c = std::cos(constants::two_pi * f * data.t[j]);
            const double s = std::sin(constants::two_pi * f * data.t[j]);
            const double r = data.y[j] - baseline;
            cc += c * c;
            cs += c * s;
            ss += s * s;
            yc += r * c;
            ys += r * s;
        }
        const double det = cc * ss - cs * cs;
        if (std::abs(det) < 1e-12) continue;
        const double a = (yc * ss - ys * cs) / det;
        const double b = (ys * cc - yc * cs) / det;
        double ssr = 0;
        for (std::size_t j = 0; j < n; ++j) {
            const double r = data.y[j] - baseline -
                             a * std::cos(constants::two_pi * f * data.t[j]) -
                             b * std::sin(constants::two_pi * f * data.t[j]);
            ssr += r * r;
        }
        if (ssr < best_ssr) {
            best_ssr = ssr;
            best_f = f;
        }
    }

    const ModelFn model = [](std::span<const double> p, std::span<const double> t) {
        std::vector<double> out(t.size());
        for (std::size_t i = 0; i < t.size(); ++i)
            out[i] = p[3] * (1.0 + p[2] * std::exp(-t[i] / p[1]) *
                                       std::cos(constants::two_pi * p[0] * t[i]));
        return out;
    };
    auto fit = lm_fit_scaled(model, data, {best_f, span / 2.0, depth0, baseline},
                             {Scale::Log, Scale::Log, Scale::Log, Scale::Log});

    BreathingFit out;
    out.radial_freq = fit.params[0] / 2.0;
    out.radial_freq_error = fit.errors[0] / 2.0;
    out.damping_time = fit.params[1];
    out.damping_time_error = fit.errors[1];
    out.depth = fit.params[2];
    out.baseline = fit.params[3];
    out.near_nyquist = fit.params[0] > nyquist - 2.0 / span;
    out.detail = fit.raw;
    out.detail.params = fit.params;
    out.detail.std_errors = fit.errors;
    if (out.near_nyquist) out.detail.message += "; fitted frequency within 2 bins of Nyquist";
    return out;
}

// ---- temperature --------------------------------------------------------------

TemperatureFit fit_temperature(const FitData& data, double probe_waist, double gravity,
                               double mass) {
    data.validate();
    if (data.t.size() < 4) throw std::invalid_argument("fit_temperature: need >= 4 points");

    // T guess from the half-escape time: sigma_v * t_half ~ w0 / 2
    double t_half = data.t.back();
    for (std::size_t i = 0; i < data.t.size(); ++i)
        if (data.y[i] > 0.5) {
            t_half = std::max(data.t[i], (data.t.back() - data.t.front()) / 50.0);
            break;
        }
    const double sv = probe_waist / (2.0 * t_half);
    const double temp0 = std::clamp(mass * sv * sv / constants::boltzmann, 1e-7, 1e-3);

    const ModelFn model = [probe_waist, gravity, mass](std::span<const double> p,
                                                       std::span<const double> t) {
        BallisticParams bp;
        bp.temperature = p[0];
        bp.radial_freq = p[1];
        bp.probe_waist = probe_waist;
        bp.gravity = gravity;
        bp.mass = mass;
        std::vector<double> out(t.size());
        for (std::size_t i = 0; i < t.size(); ++i)
            out[i] = ballistic_escape_probability(bp, t[i]);
        return out;
    };
    auto fit = lm_fit_scaled(model, data, {temp0, 200.0}, {Scale::Log, Scale::Log});

    TemperatureFit out;
    out.temperature = fit.params[0];
    out.temperature_error = fit.errors[0];
    out.radial_freq = fit.params[1];
    out.radial_freq_error = fit.errors[1];
    out.detail = fit.raw;
    out.detail.params = fit.params;
    out.detail.std_errors = fit.errors;
    return out;
}

// ---- depumping -----------------------------------------------------------------

DepumpingFit fit_depumping(std::span<const DepumpSeries> series, const DepumpCalibration& cal) {
    if (series.size() < 3) throw std::invalid_argument("fit_depumping: need >= 3 powers");
    if (!(cal.branch_to_dark > 0.0))
        throw std::invalid_argument("fit_depumping: branch_to_dark must be > 0");

    DepumpingFit out;
    const ModelFn model = [](std::span<const double> p, std::span<const double> t) {
        std::vector<double> outv(t.size());
        for (std::size_t i = 0; i < t.size(); ++i)
            outv[i] = p[0] * std::pow(1.0 - std::min(p[1], 0.999999), t[i]);
        return outv;
    };
    for (const auto& s : series) {
        s.decay.validate();
        const double amp0 = std::max(s.decay.y.front(), 1e-9);
        const double yend = std::clamp(s.decay.y.back() / amp0, 1e-6, 1.0 - 1e-12);
        // per-pulse decay below ~sigma/(K y) is unresolvable; floor q there so
        // flat trains report "consistent with zero" instead of running off
        double sigma_mean = 0.0;
        for (const double sg : s.decay.sigma) sigma_mean += sg;
        sigma_mean /= static_cast<double>(s.decay.sigma.size());
        const double q_floor = std::max(
            1e-12, 1e-3 * sigma_mean / (amp0 * std::max(s.decay.t.back(), 1.0)));
        const double q0 =
            std::clamp(-std::log(yend) / std::max(s.decay.t.back(), 1.0), 10.0 * q_floor, 0.5);
        auto fit = lm_fit_scaled(model, s.decay, {amp0, q0}, {Scale::Log, Scale::Log},
                                 {-kInf, std::log(q_floor)});
        const double scale = cal.total_over_leaky / cal.branch_to_dark;
        out.powers.push_back(s.power);
        out.p_e.push_back(fit.params[1] * scale);
        out.p_e_error.push_back(fit.errors[1] * scale);
        out.details.push_back(fit.raw);
    }

    // weighted straight line through the (power, p_e) points
    double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
    for (std::size_t i = 0; i < out.powers.size(); ++i) {
        const double w = 1.0 / std::max(out.p_e_error[i] * out.p_e_error[i], 1e-30);
        sw += w;
        swx += w * out.powers[i];
        swy += w * out.p_e[i];
        swxx += w * out.powers[i] * out.powers[i];
        swxy += w * out.powers[i] * out.p_e[i];
    }
    const double det = sw * swxx - swx * swx;
    out.slope = (sw * swxy - swx * swy) / det;
    out.intercept = (swxx * swy - swx * swxy) / det;
    out.slope_error = std::sqrt(sw / det);
    out.intercept_error = std::sqrt(swxx / det);
    return out;
}

}  // namespace dipolescope
