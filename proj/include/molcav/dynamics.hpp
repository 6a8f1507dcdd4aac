#pragma once

// Pump-dependent and time-domain physics of the molecule: optical Bloch
// equations of the effective two-level system, CW amplification, pulsed
// stimulated emission seen through a finite instrument response, and photon
// statistics.
//
// The vibrational levels |e,v!=0> and |g,v!=0> relax in picoseconds and are
// eliminated: the pump k_p moves population |g,0> -> |e,0> incoherently and the
// excited state decays back at gamma. Populations therefore sum to one.

#include <complex>
#include <span>
#include <vector>

#include "molcav/params.hpp"
#include "molcav/trace.hpp"

namespace molcav::dynamics {

struct BlochState {
    double rho_ee = 0.0;
    double rho_gg = 1.0;
    std::complex<double> coherence{};  ///< rho_eg in the probe frame

    double inversion() const { return rho_ee - rho_gg; }
};

struct BlochDrive {
    double pump_rate = 0.0;       ///< k_p (Hz)
    double probe_rabi = 0.0;      ///< Rabi frequency / 2pi (Hz)
    double probe_detuning = 0.0;  ///< probe minus zero-phonon line (Hz)
};

/// gamma2 = (gamma + k_p)/2 + gamma*, the pump-broadened coherence decay (Hz).
double coherence_decay(double pump_rate, const EmitterParams& emitter);

/// Analytic steady state. With probe_rabi -> 0: rho_ee = k_p / (k_p + gamma).
BlochState bloch_steady_state(double pump_rate, double probe_rabi, double probe_detuning,
                              const EmitterParams& emitter);

/// d(state)/dt in 1/s.
BlochState bloch_derivative(const BlochState& s, const BlochDrive& drive, const EmitterParams& emitter);

BlochState rk4_step(const BlochState& s, const BlochDrive& drive, const EmitterParams& emitter, double dt);

struct Integration {
    BlochState state;
    double step;              ///< fixed step used (s)
    std::size_t steps;
    double richardson_error;  ///< max component difference between step and step/2 runs
};

/// Fixed-step RK4 over `duration`. The step is at most lifetime/200 and small
/// enough to resolve the probe Rabi and detuning frequencies; the run is
/// repeated at half the step to report a Richardson error estimate.
Integration integrate_bloch(const BlochState& initial, const BlochDrive& drive, const EmitterParams& emitter,
                            double duration);

/// States at t = 0, dt, ..., steps*dt.
std::vector<BlochState> bloch_trajectory(const BlochState& initial, const BlochDrive& drive,
                                         const EmitterParams& emitter, double dt, std::size_t steps);

// ---- CW pump-probe ----------------------------------------------------------------

/// Gain factor (rho_ee - rho_gg) (gamma/2) / gamma2 of the resonant weak-probe
/// response, normalised so an unpumped lifetime-limited molecule gives -1.
double resonant_response(double pump_rate, const EmitterParams& emitter);

/// T(probe) = [1 - beta alpha (rho_gg - rho_ee) (gamma/2)/gamma2 L(probe)]^2, L a
/// unit-peak Lorentzian of HWHM gamma2 centered on the zero-phonon line.
double probe_transmission(double probe_detuning, double pump_rate, const System& sys);
Trace probe_transmission_with_pump(std::span<const double> probe_sweep, double pump_rate, const System& sys);

/// Resonant probe gain T - 1 in percent versus pump rate.
Trace amplification_curve(std::span<const double> pump_rates, const System& sys);

/// Same quantity in reduced units: pump rate and gamma* in units of gamma.
double gain_percent(double pump_over_gamma, double dephasing_over_gamma, double beta_alpha);

/// Pump rate of maximum gain, gamma (1 + 2 sqrt(1 + gamma*/gamma)); 3 gamma at gamma* = 0.
double peak_gain_pump_rate(const EmitterParams& emitter);
double peak_gain_percent(const System& sys);

/// gamma* (Hz) for which the maximum CW gain equals `target_percent`.
/// Throws DomainError when the target exceeds the gamma* = 0 maximum.
double dephasing_for_peak_gain(const System& sys, double target_percent);

// ---- pulsed excitation --------------------------------------------------------------

struct PulseConfig {
    double arrival_time = 0.0;                ///< s
    double initial_excited_population = 1.0;  ///< deposited instantaneously by the pump pulse

    void validate() const;
};

/// Gaussian detector response. fwhm == 0 denotes an ideal (delta) response.
struct InstrumentResponse {
    double fwhm = 0.0;

    bool ideal() const { return fwhm == 0.0; }
    double sigma() const;
    double kernel(double t) const;
    void validate() const;
};

enum class ProbeMode {
    none,          ///< spontaneous emission only
    on_resonance,  ///< probe on the zero-phonon line: background + stimulated term
    detuned,       ///< probe far off resonance: background only
};

struct PulsedSignal {
    double emission_scale = 1.0;    ///< counts per unit excited population
    double probe_background = 0.0;  ///< detected probe level without molecular interaction
    double stimulated_scale = 0.0;  ///< probe change per unit inversion rho_ee - rho_gg
};

/// Detected zero-phonon-line signal after a pump pulse, convolved with the
/// instrument response and sampled on `grid` (which must start no later than
/// the pulse and extend at least five lifetimes beyond it).
Trace pulsed_response(const PulseConfig& pulse, ProbeMode probe, const System& sys, const InstrumentResponse& irf,
                      std::span<const double> grid, const PulsedSignal& signal);

/// pulsed_response(on_resonance) - pulsed_response(detuned).
Trace stimulated_difference(const PulseConfig& pulse, const System& sys, const InstrumentResponse& irf,
                            std::span<const double> grid, const PulsedSignal& signal);

/// First time after `after` where the trace changes sign (linear interpolation).
/// Returns NaN if it never does.
double first_zero_crossing(const Trace& trace, double after);

// ---- photon statistics ---------------------------------------------------------------

/// g2 measured with a Poissonian background: 1 + f^2 (g2_ideal - 1).
double g2_background(double signal_fraction, double g2_ideal);

/// Weak-drive two-level antibunching [1 - exp(-pi gamma tau)]^2 (gamma is a FWHM in Hz).
double g2_weak_drive(double tau, double gamma);

/// g2 over delays (symmetric in tau) including the background.
Trace g2_trace(std::span<const double> delays, double gamma, double signal_fraction);

} // namespace molcav::dynamics
