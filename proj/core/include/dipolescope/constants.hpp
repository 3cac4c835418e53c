#pragma once

#include <numbers>

namespace dipolescope::constants {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * pi;

// CODATA 2018, SI units
inline constexpr double planck = 6.62607015e-34;          // J s
inline constexpr double hbar = planck / two_pi;           // J s
inline constexpr double speed_of_light = 299792458.0;     // m/s
inline constexpr double boltzmann = 1.380649e-23;         // J/K
inline constexpr double atomic_mass_unit = 1.66053906660e-27;  // kg
inline constexpr double standard_gravity = 9.81;          // m/s^2

inline constexpr double cesium_mass = 132.905451931 * atomic_mass_unit;  // kg

}  // namespace dipolescope::constants
