#include "molcav/params.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "molcav/errors.hpp"
#include "molcav/units.hpp"

namespace molcav {
namespace {

[[noreturn]] void fail(const std::string& what, double value) {
    std::ostringstream os;
    os.precision(17);
    os << what << " (got " << value << ")";
    throw DomainError(os.str());
}

void require_positive(const char* name, double value) {
    if (!(value > 0.0) || !std::isfinite(value)) fail(std::string(name) + " must be > 0", value);
}

void require_nonnegative(const char* name, double value) {
    if (!(value >= 0.0) || !std::isfinite(value)) fail(std::string(name) + " must be >= 0", value);
}

} // namespace

double CavityParams::effective_length() const {
    return kSpeedOfLight / (2.0 * free_spectral_range());
}

double CavityParams::quality_factor() const { return molcav::quality_factor(resonance_freq, kappa_fwhm); }

void CavityParams::validate() const {
    require_positive("kappa_fwhm", kappa_fwhm);
    require_positive("finesse", finesse);
    require_positive("resonance_freq", resonance_freq);
    require_nonnegative("mode_waist_fwhm", mode_waist_fwhm);
    require_nonnegative("mode_volume", mode_volume_lambda3);
    if (!(free_spectral_range() > kappa_fwhm))
        fail("free spectral range must exceed kappa_fwhm (finesse > 1)", finesse);
    if (!std::isfinite(axis_angle_deg)) fail("axis_angle_deg must be finite", axis_angle_deg);
    if (!std::isfinite(per_axis_offset)) fail("per_axis_offset must be finite", per_axis_offset);
}

double EmitterParams::lifetime() const { return 1.0 / (kTwoPi * gamma_fwhm); }

EmitterParams EmitterParams::from_lifetime(double zpl_freq, double lifetime, double branching_alpha,
                                           double pure_dephasing) {
    EmitterParams e;
    e.zpl_freq = zpl_freq;
    e.gamma_fwhm = linewidth_from_lifetime(lifetime);
    e.branching_alpha = branching_alpha;
    e.pure_dephasing = pure_dephasing;
    e.validate();
    return e;
}

void EmitterParams::validate() const {
    require_positive("gamma_fwhm", gamma_fwhm);
    require_nonnegative("zpl_freq", zpl_freq);
    if (!(branching_alpha > 0.0 && branching_alpha <= 1.0))
        fail("branching_alpha must lie in (0, 1]", branching_alpha);
    require_nonnegative("pure_dephasing", pure_dephasing);
}

CouplingParams::CouplingParams(double g, double beta, double kappa_fwhm, double gamma_fwhm)
    : g_(g), beta_(beta), cooperativity_(molcav::cooperativity(g, kappa_fwhm, gamma_fwhm)) {
    require_nonnegative("g", g);
    if (!(beta >= 0.0 && beta <= 1.0)) fail("beta must lie in [0, 1]", beta);
}

bool CouplingParams::consistent_with(double kappa_fwhm, double gamma_fwhm) const {
    const double fresh = molcav::cooperativity(g_, kappa_fwhm, gamma_fwhm);
    return std::abs(fresh - cooperativity_) <= 1e-12 * std::max(std::abs(fresh), 1e-300) ||
           fresh == cooperativity_;
}

double DriveParams::saturation() const { return saturation_parameter(photon_flux, critical_photon_number); }

void DriveParams::validate() const {
    require_nonnegative("photon_flux", photon_flux);
    require_positive("critical_photon_number", critical_photon_number);
    require_nonnegative("pump_rate", pump_rate);
}

double cooperativity(double g, double kappa, double gamma) {
    require_nonnegative("g", g);
    require_positive("kappa", kappa);
    require_positive("gamma", gamma);
    return 4.0 * g * g / (kappa * gamma);
}

double linewidth_from_lifetime(double tau) {
    require_positive("tau", tau);
    return 1.0 / (kTwoPi * tau);
}

double quality_factor(double resonance_freq, double kappa) {
    require_positive("resonance_freq", resonance_freq);
    require_positive("kappa", kappa);
    return resonance_freq / kappa;
}

PurcellBranching purcell_branching(double tau_cav, double tau_ref, double alpha_ref) {
    require_positive("tau_cav", tau_cav);
    require_positive("tau_ref", tau_ref);
    if (!(alpha_ref > 0.0 && alpha_ref <= 1.0)) fail("alpha_ref must lie in (0, 1]", alpha_ref);
    const double rate_ratio = tau_ref / tau_cav;  // total decay rate enhancement
    if (rate_ratio < 1.0 - alpha_ref) {
        std::ostringstream os;
        os.precision(17);
        os << "infeasible lifetime pair: tau_cav must be <= tau_ref / (1 - alpha_ref) = "
           << tau_ref / (1.0 - alpha_ref) << " s";
        fail(os.str(), tau_cav);
    }
    const double f = (rate_ratio - 1.0 + alpha_ref) / alpha_ref;
    return {f, alpha_ref * f / rate_ratio};
}

double beta_from_extinction(double t_dip, double alpha_cav) {
    if (!(t_dip > 0.0 && t_dip <= 1.0)) fail("t_dip must lie in (0, 1]", t_dip);
    if (!(alpha_cav > 0.0 && alpha_cav <= 1.0)) fail("alpha_cav must lie in (0, 1]", alpha_cav);
    const double beta = (1.0 - std::sqrt(t_dip)) / alpha_cav;
    if (beta > 1.0) {
        std::ostringstream os;
        os.precision(17);
        os << "extinction implies beta = " << beta << " > 1 for alpha_cav = " << alpha_cav;
        throw InconsistencyError(os.str());
    }
    return beta;
}

double saturation_parameter(double photon_flux, double n_crit) {
    require_positive("n_crit", n_crit);
    require_nonnegative("photon_flux", photon_flux);
    return photon_flux / n_crit;
}

double length_to_detuning(double displacement, const CavityParams& cavity) {
    const double length = cavity.effective_length();
    require_positive("effective_length", length);
    return cavity.resonance_freq * displacement / length;
}

double detuning_to_length(double detuning, const CavityParams& cavity) {
    const double length = cavity.effective_length();
    require_positive("effective_length", length);
    return detuning * length / cavity.resonance_freq;
}

} // namespace molcav
