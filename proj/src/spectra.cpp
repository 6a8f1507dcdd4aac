#include "molcav/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "molcav/errors.hpp"
#include "molcav/fitting.hpp"
#include "molcav/kernels.hpp"
#include "molcav/units.hpp"

namespace molcav::spectra {
namespace {

const Axis kDetuningAxis{"probe_detuning", "Hz"};
const Axis kTransmissionAxis{"transmission", "1"};

kernels::CoupledArgs coupled_args(double cavity_detuning, const System& sys, double saturation) {
    if (!(saturation >= 0.0)) throw DomainError("saturation parameter must be >= 0");
    sys.cavity.validate();
    const double gamma2 = sys.emitter.coherence_decay();
    if (!(gamma2 > 0.0)) throw DomainError("coherence decay gamma/2 + gamma* must be > 0");
    const double g = sys.coupling.g();
    return {0.5 * sys.cavity.kappa_fwhm, cavity_detuning, g * g / (1.0 + saturation), gamma2};
}

} // namespace

double bare_cavity_transmission(double detuning, const CavityParams& cavity) {
    const double hw = 0.5 * cavity.kappa_fwhm;
    return hw * hw / (detuning * detuning + hw * hw);
}

Trace bare_cavity_sweep(std::span<const double> detunings, const CavityParams& cavity) {
    if (!(cavity.kappa_fwhm > 0.0)) throw DomainError("kappa_fwhm must be > 0");
    std::vector<double> y(detunings.size());
    kernels::lorentzian(detunings, 0.0, 0.5 * cavity.kappa_fwhm, 1.0, y);
    return Trace({detunings.begin(), detunings.end()}, std::move(y), {"cavity_detuning", "Hz"}, kTransmissionAxis);
}

double coupled_response(double probe_detuning, double cavity_detuning, const System& sys, double saturation) {
    const auto args = coupled_args(cavity_detuning, sys, saturation);
    double out = 0.0;
    kernels::scalar::coupled_transmission({&probe_detuning, 1}, args, {&out, 1});
    return out;
}

Trace coupled_response_sweep(std::span<const double> probe_detunings, double cavity_detuning, const System& sys,
                             double saturation) {
    const auto args = coupled_args(cavity_detuning, sys, saturation);
    std::vector<double> y(probe_detunings.size());
    kernels::coupled_transmission(probe_detunings, args, y);
    return Trace({probe_detunings.begin(), probe_detunings.end()}, std::move(y), kDetuningAxis, kTransmissionAxis);
}

std::vector<Trace> fano_series(std::span<const double> probe_sweep, std::span<const double> cavity_detunings,
                               const System& sys) {
    std::vector<Trace> out;
    out.reserve(cavity_detunings.size());
    for (double delta : cavity_detunings) {
        if (std::abs(delta) > 3.0 * sys.cavity.kappa_fwhm)
            throw DomainError("cavity detuning outside +-3 kappa");
        out.push_back(coupled_response_sweep(probe_sweep, delta, sys, 0.0));
    }
    return out;
}

double asymmetry_metric(const Trace& trace) {
    const auto x = trace.x();
    const auto y = trace.y();
    const std::size_t n = x.size();
    const double span = x[n - 1] - x[0];
    double worst = 0.0;
    for (std::size_t i = 0; i < n / 2; ++i) {
        const std::size_t j = n - 1 - i;
        if (std::abs(x[i] + x[j]) > 1e-9 * span) throw DomainError("asymmetry metric needs a grid symmetric about 0");
        worst = std::max(worst, 0.5 * std::abs(y[i] - y[j]));
    }
    return worst;
}

Excursions excursions(const Trace& trace, double edge_fraction) {
    const auto y = trace.y();
    const std::size_t edge = std::max<std::size_t>(1, static_cast<std::size_t>(edge_fraction * y.size()));
    double sum = 0.0;
    for (std::size_t i = 0; i < edge; ++i) sum += y[i] + y[y.size() - 1 - i];
    const double baseline = sum / static_cast<double>(2 * edge);
    return {baseline, trace.max_y() - baseline, baseline - trace.min_y()};
}

double saturation_transmission(double saturation, double beta, double alpha_cav) {
    if (!(saturation >= 0.0)) throw DomainError("saturation parameter must be >= 0");
    const double ba = beta * alpha_cav;
    if (!(ba >= 0.0 && ba <= 1.0)) throw DomainError("beta * alpha_cav must lie in [0, 1]");
    if (std::isinf(saturation)) return 1.0;
    const double a = 1.0 - ba / (1.0 + saturation);
    return a * a;
}

Trace saturation_curve(std::span<const double> photon_flux, double n_crit, double beta, double alpha_cav) {
    std::vector<double> y;
    y.reserve(photon_flux.size());
    for (double flux : photon_flux)
        y.push_back(saturation_transmission(saturation_parameter(flux, n_crit), beta, alpha_cav));
    return Trace({photon_flux.begin(), photon_flux.end()}, std::move(y), {"photon_flux", "photons/lifetime"},
                 kTransmissionAxis);
}

Trace saturation_lineshape(std::span<const double> probe_detunings, const System& sys, double saturation) {
    const double depth = 1.0 - std::sqrt(saturation_transmission(saturation, sys.coupling.beta(),
                                                                  sys.emitter.branching_alpha));
    const double hwhm = sys.emitter.coherence_decay() * std::sqrt(1.0 + saturation);
    std::vector<double> y(probe_detunings.size());
    kernels::lorentzian(probe_detunings, 0.0, hwhm, depth, y);
    for (double& v : y) v = (1.0 - v) * (1.0 - v);
    return Trace({probe_detunings.begin(), probe_detunings.end()}, std::move(y), kDetuningAxis, kTransmissionAxis);
}

void MoleculeEnsemble::validate() const {
    if (!(inhomogeneous_fwhm > 0.0)) throw DomainError("inhomogeneous_fwhm must be > 0");
    for (const auto& m : molecules) {
        if (!std::isfinite(m.x) || !std::isfinite(m.y) || !std::isfinite(m.detuning))
            throw DomainError("molecule positions and detunings must be finite");
        if (m.gamma_fwhm && !(*m.gamma_fwhm > 0.0)) throw DomainError("molecule gamma_fwhm override must be > 0");
    }
}

MoleculeEnsemble sample_ensemble(std::size_t count, double inhomogeneous_fwhm, double lateral_radius,
                                 std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    MoleculeEnsemble ens;
    ens.inhomogeneous_fwhm = inhomogeneous_fwhm;
    ens.seed = seed;
    ens.molecules.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double detuning = (unit(rng) - 0.5) * inhomogeneous_fwhm;
        const double r = lateral_radius * std::sqrt(unit(rng));
        const double phi = kTwoPi * unit(rng);
        ens.molecules.push_back({detuning, r * std::cos(phi), r * std::sin(phi), std::nullopt});
    }
    ens.validate();
    return ens;
}

std::vector<double> local_saturation(const MoleculeEnsemble& ensemble, const CavityParams& cavity,
                                     const DriveParams& excitation, bool cavity_present) {
    ensemble.validate();
    excitation.validate();
    if (!(cavity.mode_waist_fwhm > 0.0)) throw DomainError("mode_waist_fwhm must be > 0");
    const double s = excitation.saturation();
    // 1/e^2 intensity radius from the intensity FWHM
    const double w = cavity.mode_waist_fwhm / std::sqrt(2.0 * kLn2);
    std::vector<double> out;
    out.reserve(ensemble.molecules.size());
    for (const auto& m : ensemble.molecules) {
        const double r2 = m.x * m.x + m.y * m.y;
        const double overlap = std::exp(-2.0 * r2 / (w * w));
        const double spectral = cavity_present ? bare_cavity_transmission(m.detuning, cavity) : 1.0;
        out.push_back(s * spectral * overlap);
    }
    return out;
}

std::vector<double> line_heights(const MoleculeEnsemble& ensemble, const CavityParams& cavity,
                                 const DriveParams& excitation, const EnsembleOptions& options) {
    auto heights = local_saturation(ensemble, cavity, excitation, options.cavity_present);
    for (double& h : heights) h = options.line_amplitude * h / (1.0 + h);
    return heights;
}

Trace ensemble_spectrum(const MoleculeEnsemble& ensemble, const CavityParams& cavity, const EmitterParams& emitter,
                        const DriveParams& excitation, std::span<const double> laser_detunings,
                        const EnsembleOptions& options) {
    if (ensemble.molecules.empty()) throw DomainError("ensemble is empty");
    emitter.validate();
    const auto s_loc = local_saturation(ensemble, cavity, excitation, options.cavity_present);

    std::vector<double> centers, hwhm, peaks;
    centers.reserve(s_loc.size());
    hwhm.reserve(s_loc.size());
    peaks.reserve(s_loc.size());
    for (std::size_t i = 0; i < s_loc.size(); ++i) {
        const auto& m = ensemble.molecules[i];
        const double gamma = m.gamma_fwhm.value_or(emitter.gamma_fwhm);
        centers.push_back(m.detuning);
        hwhm.push_back(0.5 * gamma * std::sqrt(1.0 + s_loc[i]));
        peaks.push_back(options.line_amplitude * s_loc[i] / (1.0 + s_loc[i]));
    }

    std::vector<double> y(laser_detunings.size(), 0.0);
    if (options.cavity_present && options.pedestal_amplitude != 0.0)
        kernels::lorentzian(laser_detunings, 0.0, 0.5 * cavity.kappa_fwhm, options.pedestal_amplitude, y);
    kernels::lorentzian_accumulate(laser_detunings, centers, hwhm, peaks, y);
    return Trace({laser_detunings.begin(), laser_detunings.end()}, std::move(y), {"laser_detuning", "Hz"},
                 {"fluorescence", "arb"});
}

ModeMap mode_map(std::span<const double> scan_positions, double waist_fwhm, double s0) {
    if (!(waist_fwhm > 0.0)) throw DomainError("waist_fwhm must be > 0");
    if (!(s0 >= 0.0)) throw DomainError("S0 must be >= 0");
    std::vector<double> y;
    y.reserve(scan_positions.size());
    for (double x : scan_positions) {
        const double s = s0 * std::exp(-4.0 * kLn2 * x * x / (waist_fwhm * waist_fwhm));
        y.push_back(s / (1.0 + s));
    }
    Trace trace({scan_positions.begin(), scan_positions.end()}, std::move(y), {"lateral_position", "m"},
                {"fluorescence", "1"});
    if (s0 == 0.0) return {std::move(trace), 0.0};
    auto model = fitting::initial_model(fitting::ModelKind::gaussian, trace);
    const auto result = fitting::fit(model, trace);
    return {std::move(trace), std::abs(result.value("fwhm"))};
}

double mode_map_half_max_width(double waist_fwhm, double s0) {
    if (!(waist_fwhm > 0.0) || !(s0 >= 0.0)) throw DomainError("waist must be > 0 and S0 >= 0");
    return waist_fwhm * std::sqrt(std::log2(2.0 + s0));
}

} // namespace molcav::spectra
