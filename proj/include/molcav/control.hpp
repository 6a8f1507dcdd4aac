#pragma once

// Polarization optics of the birefringent cavity, the Hansch-Couillaud lock and
// mechanical length modulation.
//
// Lab frame: x is horizontal, angles are measured from x. The cavity b axis lies
// along x and the a axis at `axis_angle_deg`; the two need not be orthogonal.

#include <complex>
#include <cstdint>

#include "molcav/params.hpp"
#include "molcav/trace.hpp"

namespace molcav::control {

struct JonesVector {
    std::complex<double> x;
    std::complex<double> y;

    /// Linear polarization at `angle_deg` carrying flux amplitude^2.
    static JonesVector linear(double angle_deg, double amplitude = 1.0);
    double flux() const { return std::norm(x) + std::norm(y); }
    bool finite() const;
};

/// |u . v|^2 for a linear analyzer at `angle_deg`.
double analyzer_flux(const JonesVector& field, double angle_deg);

struct CrossPolarizedDetection {
    JonesVector cavity_field;     ///< field leaving the cavity (E'_cav)
    double throughput;            ///< analyzer flux / cavity output flux
    double incident_fraction;     ///< analyzer flux / incident flux
};

/// Decomposes the input polarization on the (possibly oblique) cavity axes, applies
/// the complex per-axis responses and projects onto the analyzer.
CrossPolarizedDetection cross_polarized_detection(double input_angle_deg, double analyzer_angle_deg,
                                                  double axis_angle_deg, std::complex<double> response_a,
                                                  std::complex<double> response_b);

/// Analyzer flux as a fraction of the flux leaving the cavity (0 when nothing leaves).
double cross_polarized_throughput(double input_angle_deg, double analyzer_angle_deg, double axis_angle_deg,
                                  std::complex<double> response_a, std::complex<double> response_b);

// ---- Hansch-Couillaud lock ------------------------------------------------------------

/// Complex one-port reflection 1 - eta kappa / (kappa/2 - i delta) (delta, kappa in Hz).
std::complex<double> cavity_reflection(double detuning, const CavityParams& cavity, double coupling_efficiency);

/// Dispersive error Im r(delta) = -eta kappa delta / ((kappa/2)^2 + delta^2). The
/// sign convention makes the slope at the lock point negative (restoring):
/// a positive detuning yields a negative error. Extrema sit at +-kappa/2.
double hc_error_signal(double detuning, const CavityParams& cavity, double coupling_efficiency);

struct LockConfig {
    double kp = 0.0;                       ///< proportional loop gain (dimensionless)
    double ki = 0.5;                       ///< integral loop gain per sample (dimensionless)
    double sample_interval = 100e-6;       ///< s
    double actuator_range = 100e-9;        ///< full travel (m), centered on the lock point
    double noise_sigma = 0.0;              ///< displacement increment per sample (m)
    double drift_rate = 0.0;               ///< m/s
    double coupling_efficiency = 0.5;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Throws DomainError naming the violated Jury bound of the linearized loop
/// x[k+1] = (1 - kp - ki) x[k] + kp x[k-1] + w[k]: |kp| < 1, ki > 0, 2 kp + ki < 2.
/// kp = ki = 0 (open loop) is accepted.
void check_lock_stability(double kp, double ki);

/// Stationary residual RMS of the linearized loop driven by white increments of
/// standard deviation `sigma`.
double predicted_lock_rms(double kp, double ki, double sigma);

struct LockResult {
    Trace residual;  ///< residual cavity displacement (m) versus time
    double rms;      ///< m
};

/// Displacement disturbance d[k] = d[k-1] + sigma n[k] + drift dt acting on the
/// cavity length; the PI loop reads the full nonlinear HC error (normalized to
/// -x near lock) and drives the actuator, clamped to +-range/2. Deterministic per seed.
LockResult lock_simulate(const LockConfig& config, const CavityParams& cavity, double duration);

// ---- length modulation ----------------------------------------------------------------

struct ModulationConfig {
    double center = 0.0;       ///< x0, displacement from resonance (m)
    double amplitude = 0.0;    ///< A (m)
    double frequency = 10.0;   ///< Hz
    double duration = 1.0;     ///< s
    double sample_rate = 1e4;  ///< Hz

    /// sample rate > 2f, at least ten whole modulation periods.
    void validate() const;
};

enum class FlankPoint { max_slope, half_maximum };

/// Displacement of the flank operating point: kappa/(2 sqrt 3) detuning for the
/// steepest slope of the Lorentzian, kappa/2 for half maximum.
double flank_displacement(const CavityParams& cavity, FlankPoint point);

/// Emission rate * bare-cavity transmission at x(t) = x0 + A sin(2 pi f t).
Trace modulated_emission(const ModulationConfig& mod, const CavityParams& cavity, double emitter_rate);

/// One-sided RMS amplitude spectrum of the mean-removed trace (rectangular window).
/// Bin k at k fs / N; the squared magnitudes sum to the variance of the input.
Trace harmonic_spectrum(const Trace& trace);

/// Magnitude of the bin nearest `frequency`.
double harmonic_magnitude(const Trace& spectrum, double frequency);

/// 20 log10(m / reference), floored at -400 dB.
Trace to_decibels(const Trace& spectrum, double reference);

} // namespace molcav::control
