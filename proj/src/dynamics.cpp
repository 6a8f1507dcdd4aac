#include "molcav/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "molcav/errors.hpp"
#include "molcav/kernels.hpp"
#include "molcav/units.hpp"

namespace molcav::dynamics {
namespace {

BlochState axpy(const BlochState& s, double a, const BlochState& d) {
    return {s.rho_ee + a * d.rho_ee, s.rho_gg + a * d.rho_gg, s.coherence + a * d.coherence};
}

double max_difference(const BlochState& a, const BlochState& b) {
    return std::max({std::abs(a.rho_ee - b.rho_ee), std::abs(a.rho_gg - b.rho_gg),
                     std::abs(a.coherence - b.coherence)});
}

void check_emitter(const EmitterParams& emitter) {
    if (!(emitter.gamma_fwhm > 0.0)) throw DomainError("gamma_fwhm must be > 0");
    if (!(emitter.pure_dephasing >= 0.0)) throw DomainError("pure_dephasing must be >= 0");
}

double standard_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

} // namespace

double coherence_decay(double pump_rate, const EmitterParams& emitter) {
    return 0.5 * (emitter.gamma_fwhm + pump_rate) + emitter.pure_dephasing;
}

BlochState bloch_steady_state(double pump_rate, double probe_rabi, double probe_detuning,
                              const EmitterParams& emitter) {
    check_emitter(emitter);
    if (!(pump_rate >= 0.0)) throw DomainError("pump rate must be >= 0");
    // Angular rates.
    const double decay = kTwoPi * emitter.gamma_fwhm;
    const double pump = kTwoPi * pump_rate;
    const double g2 = kTwoPi * coherence_decay(pump_rate, emitter);
    const double rabi = kTwoPi * probe_rabi;
    const double det = kTwoPi * probe_detuning;

    const double r = 0.5 * rabi * rabi * g2 / (g2 * g2 + det * det);
    const double rho_ee = (pump + r) / (decay + pump + 2.0 * r);
    const double rho_gg = 1.0 - rho_ee;
    const std::complex<double> coherence =
        std::complex<double>(0.0, 0.5 * rabi * (rho_ee - rho_gg)) / std::complex<double>(g2, -det);
    return {rho_ee, rho_gg, coherence};
}

BlochState bloch_derivative(const BlochState& s, const BlochDrive& drive, const EmitterParams& emitter) {
    const double decay = kTwoPi * emitter.gamma_fwhm;
    const double pump = kTwoPi * drive.pump_rate;
    const double g2 = kTwoPi * coherence_decay(drive.pump_rate, emitter);
    const double rabi = kTwoPi * drive.probe_rabi;
    const double det = kTwoPi * drive.probe_detuning;

    const double transfer = rabi * s.coherence.imag();
    const double d_ee = -decay * s.rho_ee + pump * s.rho_gg - transfer;
    const std::complex<double> d_coh = std::complex<double>(-g2, det) * s.coherence +
                                       std::complex<double>(0.0, 0.5 * rabi * (s.rho_ee - s.rho_gg));
    return {d_ee, -d_ee, d_coh};
}

BlochState rk4_step(const BlochState& s, const BlochDrive& drive, const EmitterParams& emitter, double dt) {
    const BlochState k1 = bloch_derivative(s, drive, emitter);
    const BlochState k2 = bloch_derivative(axpy(s, 0.5 * dt, k1), drive, emitter);
    const BlochState k3 = bloch_derivative(axpy(s, 0.5 * dt, k2), drive, emitter);
    const BlochState k4 = bloch_derivative(axpy(s, dt, k3), drive, emitter);
    BlochState out = s;
    out.rho_ee += dt / 6.0 * (k1.rho_ee + 2.0 * k2.rho_ee + 2.0 * k3.rho_ee + k4.rho_ee);
    out.rho_gg += dt / 6.0 * (k1.rho_gg + 2.0 * k2.rho_gg + 2.0 * k3.rho_gg + k4.rho_gg);
    out.coherence += dt / 6.0 * (k1.coherence + 2.0 * k2.coherence + 2.0 * k3.coherence + k4.coherence);
    return out;
}

std::vector<BlochState> bloch_trajectory(const BlochState& initial, const BlochDrive& drive,
                                         const EmitterParams& emitter, double dt, std::size_t steps) {
    std::vector<BlochState> out;
    out.reserve(steps + 1);
    out.push_back(initial);
    for (std::size_t i = 0; i < steps; ++i) out.push_back(rk4_step(out.back(), drive, emitter, dt));
    return out;
}

Integration integrate_bloch(const BlochState& initial, const BlochDrive& drive, const EmitterParams& emitter,
                            double duration) {
    check_emitter(emitter);
    if (!(duration > 0.0)) throw DomainError("integration duration must be > 0");
    const double fastest = kTwoPi * std::max({std::abs(drive.probe_rabi), std::abs(drive.probe_detuning),
                                              coherence_decay(drive.pump_rate, emitter), emitter.gamma_fwhm,
                                              drive.pump_rate});
    const double max_step = std::min(emitter.lifetime() / 200.0, 0.05 / fastest);
    const auto steps = static_cast<std::size_t>(std::ceil(duration / max_step));
    const double dt = duration / static_cast<double>(steps);

    BlochState coarse = initial;
    for (std::size_t i = 0; i < steps; ++i) coarse = rk4_step(coarse, drive, emitter, dt);
    BlochState fine = initial;
    for (std::size_t i = 0; i < 2 * steps; ++i) fine = rk4_step(fine, drive, emitter, 0.5 * dt);
    return {fine, dt, steps, max_difference(coarse, fine)};
}

// ---- CW pump-probe ----------------------------------------------------------------------

double resonant_response(double pump_rate, const EmitterParams& emitter) {
    const auto s = bloch_steady_state(pump_rate, 0.0, 0.0, emitter);
    return s.inversion() * 0.5 * emitter.gamma_fwhm / coherence_decay(pump_rate, emitter);
}

double probe_transmission(double probe_detuning, double pump_rate, const System& sys) {
    const double response = resonant_response(pump_rate, sys.emitter);
    const double u = probe_detuning / coherence_decay(pump_rate, sys.emitter);
    const double a = 1.0 + sys.beta_alpha() * response / (1.0 + u * u);
    return a * a;
}

Trace probe_transmission_with_pump(std::span<const double> probe_sweep, double pump_rate, const System& sys) {
    const double response = resonant_response(pump_rate, sys.emitter);
    std::vector<double> y(probe_sweep.size());
    kernels::lorentzian(probe_sweep, 0.0, coherence_decay(pump_rate, sys.emitter), sys.beta_alpha() * response, y);
    for (double& v : y) v = (1.0 + v) * (1.0 + v);
    return Trace({probe_sweep.begin(), probe_sweep.end()}, std::move(y), {"probe_detuning", "Hz"},
                 {"transmission", "1"});
}

Trace amplification_curve(std::span<const double> pump_rates, const System& sys) {
    std::vector<double> y;
    y.reserve(pump_rates.size());
    for (double k : pump_rates) {
        if (!(k >= 0.0)) throw DomainError("pump rates must be >= 0");
        y.push_back(100.0 * (probe_transmission(0.0, k, sys) - 1.0));
    }
    return Trace({pump_rates.begin(), pump_rates.end()}, std::move(y), {"pump_rate", "Hz"}, {"gain", "%"});
}

double gain_percent(double pump_over_gamma, double dephasing_over_gamma, double beta_alpha) {
    const double x = pump_over_gamma;
    const double response = (x - 1.0) / ((x + 1.0) * (x + 1.0 + 2.0 * dephasing_over_gamma));
    const double a = 1.0 + beta_alpha * response;
    return 100.0 * (a * a - 1.0);
}

double peak_gain_pump_rate(const EmitterParams& emitter) {
    check_emitter(emitter);
    // d/dx of (x-1)/((x+1)(x+1+d)) vanishes at x = 1 + sqrt(4 + 2d), d = 2 gamma*/gamma.
    return emitter.gamma_fwhm * (1.0 + 2.0 * std::sqrt(1.0 + emitter.pure_dephasing / emitter.gamma_fwhm));
}

double peak_gain_percent(const System& sys) {
    return 100.0 * (probe_transmission(0.0, peak_gain_pump_rate(sys.emitter), sys) - 1.0);
}

double dephasing_for_peak_gain(const System& sys, double target_percent) {
    System trial = sys;
    trial.emitter.pure_dephasing = 0.0;
    const double best = peak_gain_percent(trial);
    if (!(target_percent > 0.0) || target_percent > best)
        throw DomainError("target peak gain must lie in (0, " + std::to_string(best) + "] percent");
    // Peak gain decreases monotonically in gamma*; bracket then bisect.
    double lo = 0.0;
    double hi = sys.emitter.gamma_fwhm;
    auto gain_at = [&](double dephasing) {
        trial.emitter.pure_dephasing = dephasing;
        return peak_gain_percent(trial);
    };
    while (gain_at(hi) > target_percent) {
        lo = hi;
        hi *= 2.0;
    }
    for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        (gain_at(mid) > target_percent ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// ---- pulsed excitation -----------------------------------------------------------------

void PulseConfig::validate() const {
    if (!(initial_excited_population >= 0.0 && initial_excited_population <= 1.0))
        throw DomainError("initial excited population must lie in [0, 1]");
    if (!std::isfinite(arrival_time)) throw DomainError("pulse arrival time must be finite");
}

double InstrumentResponse::sigma() const { return fwhm_to_sigma(fwhm); }

double InstrumentResponse::kernel(double t) const {
    const double s = sigma();
    return std::exp(-0.5 * t * t / (s * s)) / (s * std::sqrt(kTwoPi));
}

void InstrumentResponse::validate() const {
    if (!(fwhm >= 0.0) || !std::isfinite(fwhm)) throw DomainError("IRF fwhm must be >= 0 (0 = ideal detector)");
}

namespace {

struct SignalModel {
    double pre;         // level before the pulse (ground state)
    double post_jump;   // x(t0+) - pre
    double emission;
    double stimulated;  // coefficient of rho_ee - rho_gg
};

SignalModel signal_model(const PulseConfig& pulse, ProbeMode probe, const PulsedSignal& signal) {
    const double bg = probe == ProbeMode::none ? 0.0 : signal.probe_background;
    const double k = probe == ProbeMode::on_resonance ? signal.stimulated_scale : 0.0;
    const double p0 = pulse.initial_excited_population;
    const double pre = bg - k;
    const double post = signal.emission_scale * p0 + bg + k * (2.0 * p0 - 1.0);
    return {pre, post - pre, signal.emission_scale, k};
}

// Second antiderivative of a unit-area Gaussian of width sigma.
double psi(double u, double sigma) {
    const double z = u / sigma;
    return u * standard_normal_cdf(z) + sigma * std::exp(-0.5 * z * z) / std::sqrt(kTwoPi);
}

} // namespace

Trace pulsed_response(const PulseConfig& pulse, ProbeMode probe, const System& sys, const InstrumentResponse& irf,
                      std::span<const double> grid, const PulsedSignal& signal) {
    pulse.validate();
    irf.validate();
    check_emitter(sys.emitter);
    if (grid.size() < 2) throw DomainError("time grid needs at least two samples");
    const double tau = sys.emitter.lifetime();
    const double t0 = pulse.arrival_time;
    if (grid.front() > t0 || grid.back() < t0 + 5.0 * tau)
        throw DomainError("time grid must start at or before the pulse and extend >= 5 lifetimes after it");

    const auto model = signal_model(pulse, probe, signal);
    const double sigma = irf.ideal() ? 0.0 : irf.sigma();
    const double reach = 8.0 * sigma;
    double h = tau / 1000.0;
    if (sigma > 0.0) h = std::min(h, sigma / 10.0);

    // Post-pulse part p(t) = x(t) - x(t0+) on nodes t0 + j h; continuous with p(t0) = 0.
    const auto n_steps = static_cast<std::size_t>(std::ceil((grid.back() + reach - t0) / h)) + 2;
    const BlochState start{pulse.initial_excited_population, 1.0 - pulse.initial_excited_population, {}};
    const auto states = bloch_trajectory(start, BlochDrive{}, sys.emitter, h, n_steps);
    std::vector<double> p(states.size());
    const double x0 = model.emission * start.rho_ee + model.stimulated * start.inversion();
    for (std::size_t j = 0; j < states.size(); ++j)
        p[j] = model.emission * states[j].rho_ee + model.stimulated * states[j].inversion() - x0;

    std::vector<double> y(grid.size());
    std::vector<double> weights;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double t = grid[i] - t0;
        if (sigma == 0.0) {
            if (t < 0.0) {
                y[i] = model.pre;
                continue;
            }
            const double pos = t / h;
            const auto j = std::min(static_cast<std::size_t>(pos), p.size() - 2);
            const double frac = pos - static_cast<double>(j);
            y[i] = model.pre + model.post_jump + p[j] + frac * (p[j + 1] - p[j]);
            continue;
        }
        // Exact convolution of the piecewise-linear p with the Gaussian, plus the step.
        const double lo = std::max(1.0, std::floor((t - reach) / h));
        const double hi = std::min(static_cast<double>(p.size() - 1), std::ceil((t + reach) / h));
        double conv = 0.0;
        if (hi >= lo) {
            const auto j_lo = static_cast<std::size_t>(lo);
            const auto j_hi = static_cast<std::size_t>(hi);
            const std::size_t count = j_hi - j_lo + 1;
            std::vector<double> psi_vals(count + 2);
            for (std::size_t k = 0; k < count + 2; ++k) {
                const double node = static_cast<double>(j_lo + k) - 1.0;
                psi_vals[k] = psi(t - node * h, sigma);
            }
            weights.resize(count);
            // hat at node j: (psi(d + h) - 2 psi(d) + psi(d - h)) / h with d = t - t_j
            for (std::size_t k = 0; k < count; ++k)
                weights[k] = (psi_vals[k] - 2.0 * psi_vals[k + 1] + psi_vals[k + 2]) / h;
            conv = kernels::dot(std::span<const double>(p).subspan(j_lo, count), weights);
        }
        y[i] = model.pre + model.post_jump * standard_normal_cdf(t / sigma) + conv;
    }
    return Trace({grid.begin(), grid.end()}, std::move(y), {"time", "s"}, {"counts", "arb"});
}

Trace stimulated_difference(const PulseConfig& pulse, const System& sys, const InstrumentResponse& irf,
                            std::span<const double> grid, const PulsedSignal& signal) {
    const auto on = pulsed_response(pulse, ProbeMode::on_resonance, sys, irf, grid, signal);
    const auto off = pulsed_response(pulse, ProbeMode::detuned, sys, irf, grid, signal);
    std::vector<double> y(grid.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = on.y()[i] - off.y()[i];
    return Trace({grid.begin(), grid.end()}, std::move(y), {"time", "s"}, {"stimulated_change", "arb"});
}

double first_zero_crossing(const Trace& trace, double after) {
    const auto x = trace.x();
    const auto y = trace.y();
    for (std::size_t i = 1; i < x.size(); ++i) {
        if (x[i] <= after) continue;
        if (y[i - 1] == 0.0 && x[i - 1] > after) return x[i - 1];
        if ((y[i - 1] < 0.0) != (y[i] < 0.0) && y[i] != 0.0) {
            return x[i - 1] + (x[i] - x[i - 1]) * y[i - 1] / (y[i - 1] - y[i]);
        }
    }
    return std::numeric_limits<double>::quiet_NaN();
}

// ---- photon statistics ---------------------------------------------------------------

double g2_background(double signal_fraction, double g2_ideal) {
    if (!(signal_fraction >= 0.0 && signal_fraction <= 1.0))
        throw DomainError("signal fraction must lie in [0, 1]");
    if (!(g2_ideal >= 0.0)) throw DomainError("ideal g2 must be >= 0");
    return 1.0 + signal_fraction * signal_fraction * (g2_ideal - 1.0);
}

double g2_weak_drive(double tau, double gamma) {
    if (!(gamma > 0.0)) throw DomainError("gamma must be > 0");
    if (!(tau >= 0.0)) throw DomainError("delay must be >= 0");
    const double a = -std::expm1(-kPi * gamma * tau);
    return a * a;
}

Trace g2_trace(std::span<const double> delays, double gamma, double signal_fraction) {
    std::vector<double> y;
    y.reserve(delays.size());
    for (double t : delays) y.push_back(g2_background(signal_fraction, g2_weak_drive(std::abs(t), gamma)));
    return Trace({delays.begin(), delays.end()}, std::move(y), {"delay", "s"}, {"g2", "1"});
}

} // namespace molcav::dynamics
