#pragma once

// Physical parameter sets and the closed-form parameter algebra shared by all
// forward models. Frequencies are ordinary frequencies in Hz (see units.hpp).

namespace molcav {

struct CavityParams {
    double kappa_fwhm = 0.0;        ///< intensity FWHM of the resonance (Hz)
    double finesse = 0.0;
    double resonance_freq = 0.0;    ///< Hz
    double mode_volume_lambda3 = 0.0;  ///< descriptive only, in units of lambda^3
    double mode_waist_fwhm = 0.0;   ///< lateral intensity FWHM of the mode (m)
    double axis_angle_deg = 90.0;   ///< angle between the projected crystal axes a and b
    double per_axis_offset = 0.0;   ///< splitting of a- and b-polarized resonances (Hz)

    double free_spectral_range() const { return finesse * kappa_fwhm; }
    /// Field-penetration-inclusive length, c / (2 FSR).
    double effective_length() const;
    double quality_factor() const;

    /// Throws DomainError when an invariant is violated.
    void validate() const;
};

struct EmitterParams {
    double zpl_freq = 0.0;          ///< Hz
    double gamma_fwhm = 0.0;        ///< total excited-state decay rate / 2pi (Hz)
    double branching_alpha = 1.0;   ///< fraction of decay on the zero-phonon line
    double pure_dephasing = 0.0;    ///< gamma* / 2pi (Hz), adds to the coherence HWHM
    double dipole_angle_deg = 0.0;

    double lifetime() const;
    /// Coherence decay rate gamma/2 + gamma* (HWHM of the homogeneous line, Hz).
    double coherence_decay() const { return 0.5 * gamma_fwhm + pure_dephasing; }

    static EmitterParams from_lifetime(double zpl_freq, double lifetime, double branching_alpha,
                                       double pure_dephasing = 0.0);
    void validate() const;
};

/// Emitter-cavity coupling. The cooperativity is cached at construction.
class CouplingParams {
public:
    CouplingParams() = default;
    CouplingParams(double g, double beta, double kappa_fwhm, double gamma_fwhm);

    double g() const { return g_; }
    double beta() const { return beta_; }
    double cooperativity() const { return cooperativity_; }

    /// True when the cached cooperativity matches 4g^2/(kappa gamma) to 1e-12.
    bool consistent_with(double kappa_fwhm, double gamma_fwhm) const;

private:
    double g_ = 0.0;
    double beta_ = 0.0;
    double cooperativity_ = 0.0;
};

struct DriveParams {
    double probe_detuning = 0.0;     ///< probe minus zero-phonon line (Hz)
    double cavity_detuning = 0.0;    ///< cavity center minus zero-phonon line (Hz)
    double photon_flux = 0.0;        ///< photons per emitter lifetime entering the cavity
    double critical_photon_number = 1.0;
    double pump_rate = 0.0;          ///< incoherent pump k_p (Hz)

    double saturation() const;
    void validate() const;
};

/// Everything a coupled forward model needs.
struct System {
    CavityParams cavity;
    EmitterParams emitter;
    CouplingParams coupling;

    double beta_alpha() const { return coupling.beta() * emitter.branching_alpha; }
};

// ---- parameter algebra ---------------------------------------------------

/// C = 4 g^2 / (kappa gamma). g may be zero; kappa and gamma must be positive.
double cooperativity(double g, double kappa, double gamma);

/// FWHM linewidth 1 / (2 pi tau) of a lifetime-limited transition.
double linewidth_from_lifetime(double tau);

double quality_factor(double resonance_freq, double kappa);

struct PurcellBranching {
    double zpl_enhancement;  ///< factor F on the zero-phonon decay rate
    double alpha_cav;        ///< branching ratio inside the cavity
};

/// Solves (1 - a + a F) / tau_ref = 1 / tau_cav for F. Requires
/// tau_cav <= tau_ref / (1 - alpha_ref), otherwise no F >= 0 exists.
PurcellBranching purcell_branching(double tau_cav, double tau_ref, double alpha_ref);

/// Inverts T = (1 - beta alpha)^2 at S << 1.
double beta_from_extinction(double t_dip, double alpha_cav);

double saturation_parameter(double photon_flux, double n_crit);

/// First-order resonance shift nu * dx / L_eff for a mirror displacement dx (m).
double length_to_detuning(double displacement, const CavityParams& cavity);

/// Inverse of length_to_detuning.
double detuning_to_length(double detuning, const CavityParams& cavity);

} // namespace molcav
