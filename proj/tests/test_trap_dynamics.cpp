#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "dipolescope/ode.hpp"
#include "dipolescope/trap_dynamics.hpp"

using namespace dipolescope;
namespace k = dipolescope::constants;

TEST_CASE("loading curve limiting cases") {
    std::vector<double> grid;
    for (int i = 0; i <= 50; ++i) grid.push_back(0.02 * i);

    SUBCASE("pure exponential decay when loading is off") {
        const LoadingParams p{0.0, 1.0, 3.5, 0.0};
        const auto n = loading_curve(p, 1e4, grid);
        for (std::size_t i = 0; i < grid.size(); ++i)
            CHECK(n[i] == doctest::Approx(1e4 * std::exp(-3.5 * grid[i])).epsilon(1e-8));
    }
    SUBCASE("pure loading integral when losses are off") {
        const LoadingParams p{3.2e4, 5.0, 0.0, 0.0};
        const auto n = loading_curve(p, 100.0, grid);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double expect = 100.0 + 3.2e4 * -std::expm1(-5.0 * grid[i]) / 5.0;
            CHECK(n[i] == doctest::Approx(expect).epsilon(1e-8));
        }
    }
    SUBCASE("rejects negative initial number") {
        CHECK_THROWS_AS(loading_curve({1.0, 1.0, 1.0, 0.0}, -1.0, grid), std::invalid_argument);
    }
}

TEST_CASE("compression-column curve peaks and anchors") {
    const LoadingParams comp{1.34e7, 831.0, 3.5, 1.1e-4};
    // regression anchor near the peak, cross-checked at tightened tolerance
    const std::vector<double> t{6.5e-3};
    const auto n = loading_curve(comp, 0.0, t);
    CHECK(n[0] == doctest::Approx(15626.5).epsilon(2e-4));

    const auto rhs = [&comp](double tt, double nn) {
        return comp.load_rate * std::exp(-comp.mot_decay * tt) - comp.one_body * nn -
               comp.two_body * nn * nn;
    };
    const auto tight = integrate_ode(rhs, 0.0, std::vector<double>{0.0, 6.5e-3},
                                     {.rel_tol = 1e-12, .abs_tol = 1e-6});
    CHECK(n[0] == doctest::Approx(tight[1]).epsilon(1e-7));

    // peaks then decays: value at 0.3 s is below the peak region
    const std::vector<double> t2{4e-3, 6.3e-3, 0.3};
    const auto n2 = loading_curve(comp, 0.0, t2);
    CHECK(n2[1] > n2[0]);
    CHECK(n2[2] < n2[1]);
}

TEST_CASE("closed-form loss solution") {
    SUBCASE("pure exponential at beta = 0") {
        const LossParams p{21.0, 0.0};
        for (const double t : {0.0, 0.01, 0.1, 0.4})
            CHECK(loss_curve_closed_form(p, 1e5, t) ==
                  doctest::Approx(1e5 * std::exp(-21.0 * t)).epsilon(1e-12));
    }
    SUBCASE("algebraic decay in the Gamma -> 0 limit") {
        const LossParams p{0.0, 2.3e-4};
        for (const double t : {0.0, 0.01, 0.1, 1.0})
            CHECK(loss_curve_closed_form(p, 1e5, t) ==
                  doctest::Approx(1e5 / (1.0 + 2.3e-4 * 1e5 * t)).epsilon(1e-12));
        // continuity of the limit
        const LossParams tiny{1e-13, 2.3e-4};
        CHECK(loss_curve_closed_form(tiny, 1e5, 0.05) ==
              doctest::Approx(loss_curve_closed_form(p, 1e5, 0.05)).epsilon(1e-9));
    }
    SUBCASE("no-light column value, checked against the RK route") {
        const LossParams p{21.0, 2.3e-4};
        const double closed = loss_curve_closed_form(p, 1e5, 0.05);
        CHECK(closed == doctest::Approx(20440.612).epsilon(1e-6));
        const auto ode = integrate_ode(
            [&p](double, double n) { return -p.one_body * n - p.two_body * n * n; }, 1e5,
            std::vector<double>{0.0, 0.05}, {.rel_tol = 1e-11, .abs_tol = 1e-6});
        CHECK(closed == doctest::Approx(ode[1]).epsilon(1e-8));
    }
}

TEST_CASE("closed form vs adaptive integration across the parameter grid") {
    // dual-route consistency over one-body/two-body ranges spanning the
    // fitted-value table
    for (const double g : {3.5, 12.0, 21.0, 35.0, 47.0}) {
        for (const double b : {3e-5, 1.1e-4, 2.3e-4, 1e-3, 1.1e-2}) {
            const LossParams p{g, b};
            std::vector<double> grid{0.0};
            for (int i = 1; i <= 25; ++i) grid.push_back(5.0 / g * i / 25.0);
            const auto ode = integrate_ode(
                [&p](double, double n) { return -p.one_body * n - p.two_body * n * n; }, 1e5,
                grid, {.rel_tol = 1e-11, .abs_tol = 1e-6});
            for (std::size_t i = 1; i < grid.size(); ++i) {
                const double closed = loss_curve_closed_form(p, 1e5, grid[i]);
                CHECK(std::abs(closed - ode[i]) / closed < 1e-6);
            }
        }
    }
}

TEST_CASE("piecewise consistency: loading with the source switched off") {
    // integrating the loss terms from the value at t* matches the closed form
    const LoadingParams comp{1.34e7, 831.0, 3.5, 1.1e-4};
    const double t_star = 8e-3;
    const auto n_star = loading_curve(comp, 0.0, std::vector<double>{t_star})[0];
    const LossParams tail{comp.one_body, comp.two_body};
    const auto rhs = [&tail](double, double n) {
        return -tail.one_body * n - tail.two_body * n * n;
    };
    std::vector<double> rel{0.0, 0.05, 0.2, 0.5};
    const auto ode = integrate_ode(rhs, n_star, rel, {.rel_tol = 1e-11, .abs_tol = 1e-6});
    for (std::size_t i = 0; i < rel.size(); ++i)
        CHECK(ode[i] == doctest::Approx(loss_curve_closed_form(tail, n_star, rel[i]))
                            .epsilon(1e-7));
}

TEST_CASE("breathing signal") {
    SUBCASE("zero depth is constant") {
        for (const double t : {0.0, 1e-3, 5e-3})
            CHECK(breathing_signal(t, 226.5, 4e-3, 0.0, 0.7) == doctest::Approx(0.7));
    }
    SUBCASE("oscillates at twice the radial frequency") {
        const double period = 1.0 / 453.0;
        const double a = breathing_signal(0.0, 226.5, 1e9, 0.2, 1.0);
        const double b = breathing_signal(period, 226.5, 1e9, 0.2, 1.0);
        const double half = breathing_signal(period / 2.0, 226.5, 1e9, 0.2, 1.0);
        CHECK(a == doctest::Approx(b).epsilon(1e-9));
        CHECK(half == doctest::Approx(1.0 - 0.2).epsilon(1e-9));
    }
    SUBCASE("damps to the baseline") {
        const double tau = 2e-3;
        const double t = 20e-3;
        CHECK(std::abs(breathing_signal(t, 226.5, tau, 0.3, 1.0) - 1.0) <=
              0.3 * std::exp(-t / tau) + 1e-12);
    }
}

TEST_CASE("trap frequency vs power") {
    const auto line = cesium_d2();
    const std::vector<double> powers{1.0, 2.0, 4.0};
    const auto nus = trap_frequency_vs_power(powers, 90e-6, 1030e-9, line);
    CHECK(nus[2] == doctest::Approx(2.0 * nus[0]).epsilon(1e-12));
    CHECK(nus[1] == doctest::Approx(std::sqrt(2.0) * nus[0]).epsilon(1e-12));
    const auto small = trap_frequency_vs_power(std::vector<double>{1e-9}, 90e-6, 1030e-9, line);
    CHECK(small[0] < 0.1);  // -> 0 with vanishing power
}

TEST_CASE("ballistic escape probability") {
    BallisticParams bp;
    bp.temperature = 15e-6;
    bp.radial_freq = 275.0;
    bp.probe_waist = 20e-6;

    SUBCASE("identities and monotonicity") {
        CHECK(ballistic_escape_probability(bp, 0.0) == 0.0);
        double prev = 0.0;
        for (int i = 1; i <= 100; ++i) {
            const double p = ballistic_escape_probability(bp, 8e-3 * i / 100.0);
            CHECK(p >= prev - 1e-15);
            CHECK(p <= 1.0);
            prev = p;
        }
        CHECK(prev > 0.99);  // has left the probe volume within ~8 ms
    }
    SUBCASE("frozen cloud without gravity never escapes") {
        BallisticParams frozen = bp;
        frozen.temperature = 0.0;
        frozen.gravity = 0.0;
        for (const double t : {1e-3, 0.1, 10.0})
            CHECK(ballistic_escape_probability(frozen, t) == doctest::Approx(0.0));
    }
    SUBCASE("point-source limit matches the analytic overlap ratio") {
        BallisticParams point = bp;
        point.radial_freq = 1e9;  // sigma_r0 -> 0
        point.gravity = 0.0;
        const double sv2 = k::boltzmann * point.temperature / point.mass;
        for (const double t : {0.5e-3, 1e-3, 2e-3}) {
            const double w2 = point.probe_waist * point.probe_waist;
            const double expect = 1.0 - w2 / (w2 + 4.0 * sv2 * t * t);
            CHECK(ballistic_escape_probability(point, t) == doctest::Approx(expect).epsilon(1e-9));
        }
    }
    SUBCASE("working-point values, frozen from the overlap formula") {
        CHECK(ballistic_escape_probability(bp, 1e-3) == doctest::Approx(0.696428).epsilon(1e-5));
        CHECK(ballistic_escape_probability(bp, 4e-3) == doctest::Approx(0.978005).epsilon(1e-5));
    }
}

TEST_CASE("ballistic Monte-Carlo oracle agrees with the closed form") {
    BallisticParams bp;
    bp.temperature = 15e-6;
    bp.radial_freq = 275.0;
    bp.probe_waist = 20e-6;

    SUBCASE("zero gravity, three sigma of the sampling error") {
        BallisticParams nog = bp;
        nog.gravity = 0.0;
        for (const double t : {0.5e-3, 2e-3}) {
            const double closed = ballistic_escape_probability(nog, t);
            // empirical MC sigma from repeated draws
            std::vector<double> draws;
            for (int s = 0; s < 8; ++s)
                draws.push_back(ballistic_mc_oracle(nog, t, 50000, 100 + s));
            double mean = 0.0;
            for (const double d : draws) mean += d;
            mean /= draws.size();
            double var = 0.0;
            for (const double d : draws) var += (d - mean) * (d - mean);
            var /= (draws.size() - 1);
            const double sigma_mean = std::sqrt(var / draws.size());
            CHECK(std::abs(mean - closed) < 3.0 * sigma_mean + 1e-6);
        }
    }
    SUBCASE("with gravity at the working point") {
        for (const double t : {1e-3, 3e-3})
            CHECK(std::abs(ballistic_mc_oracle(bp, t, 200000, 7) -
                           ballistic_escape_probability(bp, t)) < 5e-3);
    }
}

TEST_CASE("depump decay") {
    DepumpParams dp;
    dp.excitation = {{8, 0.01}};
    dp.branching = {{8, {{6, 5.0 / 12.0}, {8, 7.0 / 12.0}}}};
    dp.leaky_two_fp = 8;

    SUBCASE("no excitation keeps the population") {
        DepumpParams off = dp;
        off.excitation[8] = 0.0;
        const auto n = depump_decay(off, 40, 1e5, 1e5);
        for (const double v : n) CHECK(v == doctest::Approx(1e5));
    }
    SUBCASE("per-pulse ratio is 1 - p b") {
        const auto n = depump_decay(dp, 10, 1e5, 1e5);
        const double ratio = 1.0 - 0.01 * 5.0 / 12.0;
        CHECK(ratio == doctest::Approx(1.0 - 0.0041666667).epsilon(1e-8));
        for (int kdx = 0; kdx < 10; ++kdx)
            CHECK(n[kdx + 1] / n[kdx] == doctest::Approx(ratio).epsilon(1e-12));
    }
    SUBCASE("total population is conserved exactly") {
        DepumpParams rp = dp;
        rp.repump_return = 0.002;
        double n4 = 8e4;
        const double total = 1e5;
        const auto seq = depump_decay(rp, 100, n4, total);
        // N3 + N4 = total at every step by construction of the two-level map
        double n3 = total - n4;
        for (int kdx = 0; kdx < 100; ++kdx) {
            const double next4 = seq[kdx] * (1.0 - 0.01 * 5.0 / 12.0) + 0.002 * n3;
            n3 = total - next4;
            CHECK(seq[kdx + 1] == doctest::Approx(next4).epsilon(1e-12));
            CHECK(n3 + next4 == doctest::Approx(total).epsilon(1e-12));
        }
    }
    SUBCASE("validation") {
        DepumpParams bad = dp;
        bad.excitation[8] = 1.5;
        CHECK_THROWS_AS(depump_decay(bad, 1, 1.0, 1.0), std::invalid_argument);
        DepumpParams badrow = dp;
        badrow.branching[8][6] = 0.9;
        CHECK_THROWS_AS(depump_decay(badrow, 1, 1.0, 1.0), std::invalid_argument);
    }
}

TEST_CASE("ode grid handling") {
    const auto rhs = [](double, double y) { return -y; };
    SUBCASE("repeated and unsorted grids") {
        const std::vector<double> rep{0.0, 0.5, 0.5, 1.0};
        const auto out = integrate_ode(rhs, 1.0, rep);
        CHECK(out[1] == doctest::Approx(out[2]).epsilon(1e-14));
        CHECK_THROWS_AS(integrate_ode(rhs, 1.0, std::vector<double>{0.0, 1.0, 0.5}),
                        std::invalid_argument);
    }
    SUBCASE("accuracy on the exponential") {
        std::vector<double> grid;
        for (int i = 0; i <= 20; ++i) grid.push_back(0.5 * i);
        const auto out = integrate_ode(rhs, 1.0, grid, {.rel_tol = 1e-10, .abs_tol = 1e-14});
        for (std::size_t i = 0; i < grid.size(); ++i)
            CHECK(out[i] == doctest::Approx(std::exp(-grid[i])).epsilon(1e-8));
    }
}
