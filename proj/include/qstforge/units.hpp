#pragma once

#include <numbers>

namespace qstforge {

// Couplings are stored as J/2pi in MHz; the propagators work in angular
// frequency with time in nanoseconds.  1 MHz = 2pi * 1e-3 rad/ns.
inline constexpr double mhz_to_rad_ns = 2.0 * std::numbers::pi * 1e-3;

inline constexpr double rad_ns_to_mhz = 1.0 / mhz_to_rad_ns;

// Dimensionless time t*J for a coupling scale given in MHz.
inline double dimensionless_time(double t_ns, double j_mhz) {
  return t_ns * j_mhz * mhz_to_rad_ns;
}

}  // namespace qstforge
