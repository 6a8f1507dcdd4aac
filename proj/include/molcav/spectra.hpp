#pragma once

// Steady-state frequency-domain forward models.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "molcav/params.hpp"
#include "molcav/trace.hpp"

namespace molcav::spectra {

/// Normalized bare-cavity Lorentzian (kappa/2)^2 / (d^2 + (kappa/2)^2).
double bare_cavity_transmission(double detuning, const CavityParams& cavity);
Trace bare_cavity_sweep(std::span<const double> detunings, const CavityParams& cavity);

/// Relative transmission |t_coupled / t_bare|^2 of the coupled system.
///
/// `probe_detuning` is the probe frequency minus the zero-phonon line and
/// `cavity_detuning` the cavity center minus the zero-phonon line. Saturation
/// weakens the coupling as g^2 -> g^2 / (1 + S).
double coupled_response(double probe_detuning, double cavity_detuning, const System& sys, double saturation);
Trace coupled_response_sweep(std::span<const double> probe_detunings, double cavity_detuning, const System& sys,
                             double saturation);

/// One coupled_response trace per cavity detuning (each within +-3 kappa).
std::vector<Trace> fano_series(std::span<const double> probe_sweep, std::span<const double> cavity_detunings,
                               const System& sys);

/// Odd-part amplitude max |y(x) - y(-x)| / 2 over a grid symmetric about zero.
/// Zero for an even lineshape, positive for a dispersive one.
double asymmetry_metric(const Trace& trace);

struct Excursions {
    double baseline;  ///< mean of the outermost samples on both sides
    double above;     ///< max(y) - baseline
    double below;     ///< baseline - min(y)
    double balance() const { return above - below; }
};

/// Peak/dip excursions relative to the far-detuned baseline. The baseline is
/// the mean of the first and last `edge_fraction` of the samples.
Excursions excursions(const Trace& trace, double edge_fraction = 0.02);

/// Phenomenological resonant transmission [1 - beta alpha / (1 + S)]^2.
double saturation_transmission(double saturation, double beta, double alpha_cav);

/// saturation_transmission over photon fluxes (photons per lifetime).
Trace saturation_curve(std::span<const double> photon_flux, double n_crit, double beta, double alpha_cav);

/// Lineshape carrying the saturation formula on resonance: a power-broadened
/// Lorentzian dip [1 - beta alpha / (1 + S) L(d)]^2, L of HWHM gamma2 sqrt(1 + S).
Trace saturation_lineshape(std::span<const double> probe_detunings, const System& sys, double saturation);

// ---- molecule ensembles --------------------------------------------------------

struct Molecule {
    double detuning;  ///< zero-phonon line minus cavity resonance (Hz)
    double x;         ///< lateral position (m) relative to the mode axis
    double y;
    std::optional<double> gamma_fwhm;  ///< overrides the ensemble emitter linewidth
};

struct MoleculeEnsemble {
    std::vector<Molecule> molecules;
    double inhomogeneous_fwhm = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Uniform over the inhomogeneous band (centered on the cavity) and uniform over
/// a disk of `lateral_radius`. Deterministic for a given seed.
MoleculeEnsemble sample_ensemble(std::size_t count, double inhomogeneous_fwhm, double lateral_radius,
                                 std::uint64_t seed);

struct EnsembleOptions {
    bool cavity_present = true;      ///< false: micromirror retracted, flat spectral weighting
    double line_amplitude = 1.0;     ///< fluorescence of a fully saturated molecule
    double pedestal_amplitude = 0.0; ///< background fluorescence following the cavity Lorentzian
};

/// Local saturation S * cavity_Lorentzian(detuning) * exp(-2 r^2 / w^2) per molecule.
std::vector<double> local_saturation(const MoleculeEnsemble& ensemble, const CavityParams& cavity,
                                     const DriveParams& excitation, bool cavity_present);

/// Peak heights line_amplitude * S_loc / (1 + S_loc).
std::vector<double> line_heights(const MoleculeEnsemble& ensemble, const CavityParams& cavity,
                                 const DriveParams& excitation, const EnsembleOptions& options);

/// Stokes-fluorescence excitation spectrum over laser detunings from the cavity
/// resonance. Each molecule contributes a power-broadened Lorentzian of FWHM
/// gamma sqrt(1 + S_loc); the pedestal follows the bare cavity Lorentzian.
Trace ensemble_spectrum(const MoleculeEnsemble& ensemble, const CavityParams& cavity, const EmitterParams& emitter,
                        const DriveParams& excitation, std::span<const double> laser_detunings,
                        const EnsembleOptions& options = {});

// ---- lateral mode map -----------------------------------------------------------

struct ModeMap {
    Trace trace;
    double fitted_fwhm;  ///< FWHM of a Gaussian fit to the map
};

/// Fluorescence S(x)/(1+S(x)) with S(x) = S0 exp(-4 ln2 x^2 / waist_fwhm^2).
ModeMap mode_map(std::span<const double> scan_positions, double waist_fwhm, double s0);

/// Exact FWHM of the saturated map, waist * sqrt(log2(2 + S0)).
double mode_map_half_max_width(double waist_fwhm, double s0);

} // namespace molcav::spectra
