#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

// Adaptive embedded Runge-Kutta integrator (Dormand-Prince 5(4)) for the
// scalar rate equations used here. Coefficients from Dormand & Prince (1980).

namespace dipolescope {

struct OdeOptions {
    double rel_tol = 1e-9;
    double abs_tol = 1e-3;
    double min_step = 1e-15;
    long max_steps = 2'000'000;
};

struct OdeFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Integrates dy/dt = rhs(t, y) from t = t_grid.front() with y(t0) = y0 and
// returns y at every grid point. The grid must be nondecreasing.
template <class Rhs>
std::vector<double> integrate_ode(Rhs&& rhs, double y0, std::span<const double> t_grid,
                                  const OdeOptions& opts = {}) {
    if (t_grid.empty()) return {};
    for (std::size_t i = 1; i < t_grid.size(); ++i)
        if (t_grid[i] < t_grid[i - 1])
            throw std::invalid_argument("integrate_ode: time grid must be nondecreasing");

    constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    constexpr double a21 = 1.0 / 5;
    constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                     a54 = -212.0 / 729;
    constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                     a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                     b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    constexpr double e1 = 35.0 / 384 - 5179.0 / 57600, e3 = 500.0 / 1113 - 7571.0 / 16695,
                     e4 = 125.0 / 192 - 393.0 / 640, e5 = -2187.0 / 6784 + 92097.0 / 339200,
                     e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;

    std::vector<double> out;
    out.reserve(t_grid.size());

    double t = t_grid.front();
    double y = y0;
    out.push_back(y);
    std::size_t next = 1;
    while (next < t_grid.size() && t_grid[next] <= t) out.push_back(y), ++next;
    if (next == t_grid.size()) return out;

    double k1 = rhs(t, y);
    double h = 1e-3 * (t_grid.back() - t);
    if (std::abs(k1) > 0.0)
        h = std::min(h, (opts.abs_tol + opts.rel_tol * std::abs(y)) / std::abs(k1));
    h = std::max(h, opts.min_step);

    long steps = 0;
    while (next < t_grid.size()) {
        if (++steps > opts.max_steps) throw OdeFailure("integrate_ode: step budget exhausted");
        bool hit_grid = false;
        if (t + h >= t_grid[next]) {
            h = t_grid[next] - t;
            hit_grid = true;
        }
        if (h <= 0.0) {  // repeated grid point
            out.push_back(y);
            ++next;
            h = opts.min_step;
            continue;
        }

        const double k2 = rhs(t + c2 * h, y + h * a21 * k1);
        const double k3 = rhs(t + c3 * h, y + h * (a31 * k1 + a32 * k2));
        const double k4 = rhs(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
        const double k5 = rhs(t + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        const double k6 =
            rhs(t + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        const double y5 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        const double k7 = rhs(t + h, y5);
        const double err =
            std::abs(h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7));
        const double tol =
            opts.abs_tol + opts.rel_tol * std::max(std::abs(y), std::abs(y5));

        if (!std::isfinite(y5)) throw OdeFailure("integrate_ode: solution diverged");

        if (err <= tol) {
            t += h;
            y = y5;
            k1 = k7;  // FSAL
            if (hit_grid) {
                out.push_back(y);
                ++next;
                while (next < t_grid.size() && t_grid[next] <= t) out.push_back(y), ++next;
            }
        }
        const double scale =
            err > 0.0 ? 0.9 * std::pow(tol / err, 0.2) : 5.0;
        h *= std::clamp(scale, 0.2, 5.0);
        if (h < opts.min_step) {
            if (err > tol) throw OdeFailure("integrate_ode: step size underflow");
            h = opts.min_step;
        }
    }
    return out;
}

}  // namespace dipolescope
