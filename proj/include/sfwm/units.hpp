#pragma once

#include <numbers>

// Internal unit system: angular frequencies in units of the excited-state
// decay rate Gamma = 2*pi * 6 MHz, times in units of 1/Gamma. Conversions
// happen only at I/O boundaries.
namespace sfwm::units {

inline constexpr double kGammaHz = 6.0e6;
inline constexpr double kGammaAngular = 2.0 * std::numbers::pi * kGammaHz;

// x (Gamma units, angular) -> ordinary frequency in Hz
constexpr double to_hz(double x) { return x * kGammaHz; }
constexpr double from_hz(double f_hz) { return f_hz / kGammaHz; }

constexpr double to_mhz(double x) { return x * (kGammaHz / 1.0e6); }
constexpr double from_mhz(double f_mhz) { return f_mhz / (kGammaHz / 1.0e6); }

// x (units of 1/Gamma) -> nanoseconds
constexpr double to_ns(double x) { return x / kGammaAngular * 1.0e9; }
constexpr double from_ns(double t_ns) { return t_ns * 1.0e-9 * kGammaAngular; }

}  // namespace sfwm::units
