#pragma once

#include <numbers>

// Conventions used throughout molcav:
//   every rate and linewidth is an ordinary frequency in Hz (omega / 2 pi),
//   times are in s, lengths in m, angles in degrees unless a name says otherwise.
// Conversion to angular units happens only inside the ODE right-hand sides.
namespace molcav {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kSpeedOfLight = 299792458.0;  // m/s
inline constexpr double kLn2 = std::numbers::ln2;

inline constexpr double kHz = 1.0;
inline constexpr double kKHz = 1e3;
inline constexpr double kMHz = 1e6;
inline constexpr double kGHz = 1e9;
inline constexpr double kTHz = 1e12;

inline constexpr double kSecond = 1.0;
inline constexpr double kMillisecond = 1e-3;
inline constexpr double kMicrosecond = 1e-6;
inline constexpr double kNanosecond = 1e-9;
inline constexpr double kPicosecond = 1e-12;

inline constexpr double kMeter = 1.0;
inline constexpr double kMicrometer = 1e-6;
inline constexpr double kNanometer = 1e-9;

inline constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }

/// Frequency of light with vacuum wavelength `wavelength` (m).
inline constexpr double optical_frequency(double wavelength) { return kSpeedOfLight / wavelength; }

/// Gaussian sigma from a full width at half maximum.
inline double fwhm_to_sigma(double fwhm) { return fwhm / (2.0 * std::numbers::sqrt2 * 0.8325546111576977); }

} // namespace molcav
