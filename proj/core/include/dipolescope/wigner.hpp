#pragma once

#include <array>
#include <cmath>

// Wigner 6-j symbols via the Racah closed form. Angular momenta are passed
// doubled (two_j = 2j) so half-integers stay exact.

namespace dipolescope {

namespace detail {

// factorials up to 34! fit a double exactly up to 22!, beyond that the
// relative error stays < 1e-15 which is plenty for the small momenta here
inline double factorial_half(int two_x) {
    // two_x must be an even, nonnegative doubled integer
    static const auto table = [] {
        std::array<double, 64> t{};
        t[0] = 1.0;
        for (std::size_t i = 1; i < t.size(); ++i) t[i] = t[i - 1] * static_cast<double>(i);
        return t;
    }();
    return table[static_cast<std::size_t>(two_x / 2)];
}

inline bool triangle_ok(int two_a, int two_b, int two_c) {
    return two_c >= std::abs(two_a - two_b) && two_c <= two_a + two_b &&
           (two_a + two_b + two_c) % 2 == 0;
}

inline double triangle_coeff(int two_a, int two_b, int two_c) {
    return std::sqrt(factorial_half(two_a + two_b - two_c) *
                     factorial_half(two_a - two_b + two_c) *
                     factorial_half(-two_a + two_b + two_c) /
                     factorial_half(two_a + two_b + two_c + 2));
}

}  // namespace detail

inline double wigner_6j(int two_j1, int two_j2, int two_j3,
                        int two_j4, int two_j5, int two_j6) {
    using namespace detail;
    if (!triangle_ok(two_j1, two_j2, two_j3) || !triangle_ok(two_j1, two_j5, two_j6) ||
        !triangle_ok(two_j4, two_j2, two_j6) || !triangle_ok(two_j4, two_j5, two_j3))
        return 0.0;

    const double pref = triangle_coeff(two_j1, two_j2, two_j3) *
                        triangle_coeff(two_j1, two_j5, two_j6) *
                        triangle_coeff(two_j4, two_j2, two_j6) *
                        triangle_coeff(two_j4, two_j5, two_j3);

    const int a1 = two_j1 + two_j2 + two_j3;
    const int a2 = two_j1 + two_j5 + two_j6;
    const int a3 = two_j4 + two_j2 + two_j6;
    const int a4 = two_j4 + two_j5 + two_j3;
    const int b1 = two_j1 + two_j2 + two_j4 + two_j5;
    const int b2 = two_j2 + two_j3 + two_j5 + two_j6;
    const int b3 = two_j3 + two_j1 + two_j6 + two_j4;

    const int tmin = std::max(std::max(a1, a2), std::max(a3, a4));
    const int tmax = std::min(b1, std::min(b2, b3));

    double sum = 0.0;
    for (int two_t = tmin; two_t <= tmax; two_t += 2) {
        const double term = factorial_half(two_t + 2) /
                            (factorial_half(two_t - a1) * factorial_half(two_t - a2) *
                             factorial_half(two_t - a3) * factorial_half(two_t - a4) *
                             factorial_half(b1 - two_t) * factorial_half(b2 - two_t) *
                             factorial_half(b3 - two_t));
        sum += (two_t / 2) % 2 == 0 ? term : -term;
    }
    return pref * sum;
}

}  // namespace dipolescope
