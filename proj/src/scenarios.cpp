#include "molcav/scenarios.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <functional>

#include "molcav/control.hpp"
#include "molcav/dynamics.hpp"
#include "molcav/errors.hpp"
#include "molcav/fitting.hpp"
#include "molcav/spectra.hpp"
#include "molcav/units.hpp"

#ifndef MOLCAV_VERSION
#define MOLCAV_VERSION "0.0.0"
#endif

namespace molcav::scenarios {
namespace {

using config::Config;

constexpr std::array<std::string_view, 20> kNames{
    "params", "fig3a", "fig3b", "fig3c", "fig3d", "fig3e", "fig4a", "fig4b", "fig4c", "fig4d", "fig4e",
    "fig5a",  "fig5b", "fig5c", "fig5d", "fig5e", "fig5f", "fig6a", "fig6b", "lock",
};

std::vector<double> symmetric_grid(double half_span, std::int64_t points) {
    return linspace(-half_span, half_span, static_cast<std::size_t>(points));
}

std::vector<double> scaled(std::span<const double> v, double factor) {
    std::vector<double> out(v.begin(), v.end());
    for (double& x : out) x *= factor;
    return out;
}

Trace rescale(const Trace& t, double x_factor, Axis x_axis, double y_factor, Axis y_axis) {
    auto out = Trace(scaled(t.x(), x_factor), scaled(t.y(), y_factor), std::move(x_axis), std::move(y_axis));
    for (const auto& [k, v] : t.tags()) out.tag(k, v);
    return out;
}

bool wants(const Config& cfg, std::string_view model) {
    const auto m = cfg.text("model");
    return m == "both" || m == model;
}

// ---- individual scenarios ------------------------------------------------------------

ScenarioOutput run_params(const Config& cfg) {
    const auto sys = system_from(cfg);
    const double alpha_ref = cfg.number("branching_alpha");
    const auto pb = purcell_branching(cfg.number("tau_cav"), cfg.number("tau_ref"), alpha_ref);
    const double c = sys.coupling.cooperativity();
    ScenarioOutput out;
    auto& r = out.results;
    r.add("cooperativity", c);
    r.add("zpl_enhancement", pb.zpl_enhancement);
    r.add("alpha_cav", pb.alpha_cav);
    r.add("beta", sys.coupling.beta());
    r.add("beta_alpha", sys.beta_alpha());
    r.add("quality_factor", sys.cavity.quality_factor());
    r.add("tau_cav_upper_bound_ns", cfg.number("tau_ref") / (1.0 - alpha_ref) / kNanosecond);
    r.add("linewidth_cav_mhz", linewidth_from_lifetime(cfg.number("tau_cav")) / kMHz);
    r.add("linewidth_ref_mhz", linewidth_from_lifetime(cfg.number("tau_ref")) / kMHz);
    r.add("dip_fwhm_linear_mhz", sys.emitter.gamma_fwhm * (1.0 + c) / kMHz);
    r.add("transmission_linear", 1.0 / ((1.0 + c) * (1.0 + c)));
    r.add("transmission_eq1_s0", spectra::saturation_transmission(0.0, sys.coupling.beta(), pb.alpha_cav));
    r.add("transmission_eq1_s1", spectra::saturation_transmission(1.0, sys.coupling.beta(), pb.alpha_cav));
    r.add("critical_photon_number", cfg.number("critical_photon_number"));
    r.add("free_spectral_range_thz", sys.cavity.free_spectral_range() / kTHz);
    r.add("effective_length_um", sys.cavity.effective_length() / kMicrometer);
    r.add("detuning_per_nm_ghz", length_to_detuning(kNanometer, sys.cavity) / kGHz);
    r.add("half_linewidth_displacement_nm", detuning_to_length(0.5 * sys.cavity.kappa_fwhm, sys.cavity) / kNanometer);

    // Cross-polarized probe on the b-axis mode; the a-axis mode sits per_axis_offset away.
    const double hw = 0.5 * sys.cavity.kappa_fwhm;
    const std::complex<double> resp_a = hw / std::complex<double>(hw, -sys.cavity.per_axis_offset);
    const auto det = control::cross_polarized_detection(-45.0, 45.0, sys.cavity.axis_angle_deg, resp_a, 1.0);
    const auto ref = control::cross_polarized_detection(-45.0, 45.0, 90.0, resp_a, 1.0);
    r.add("cross_polarized_throughput", det.throughput);
    r.add("cross_polarized_throughput_90deg", ref.throughput);
    r.add("cross_polarized_relative_change", (det.throughput - ref.throughput) / ref.throughput);
    r.add("cross_polarized_incident_fraction", det.incident_fraction);
    return out;
}

spectra::MoleculeEnsemble ensemble_from(const Config& cfg) {
    return spectra::sample_ensemble(static_cast<std::size_t>(cfg.integer("ensemble_count")),
                                    cfg.number("inhomogeneous_fwhm"), cfg.number("mode_waist_fwhm"),
                                    static_cast<std::uint64_t>(cfg.integer("seed")));
}

ScenarioOutput run_fig3a(const Config& cfg) {
    const auto sys = system_from(cfg);
    const auto ensemble = ensemble_from(cfg);
    const DriveParams excitation{0.0, 0.0, cfg.number("ensemble_saturation"), 1.0, 0.0};
    const double step = cfg.number("ensemble_step");
    const double span = cfg.number("ensemble_span");
    const auto n = static_cast<std::int64_t>(std::llround(2.0 * span / step)) + 1;
    const auto grid = symmetric_grid(span, n);

    spectra::EnsembleOptions with_cavity{true, cfg.number("line_amplitude"), cfg.number("pedestal_amplitude")};
    spectra::EnsembleOptions retracted{false, cfg.number("line_amplitude"), 0.0};
    auto cavity = spectra::ensemble_spectrum(ensemble, sys.cavity, sys.emitter, excitation, grid, with_cavity);
    auto bare = spectra::ensemble_spectrum(ensemble, sys.cavity, sys.emitter, excitation, grid, retracted);

    const auto window = fitting::envelope_window(sys.emitter.gamma_fwhm, step);
    const auto env = fitting::envelope_fit(cavity, window);

    ScenarioOutput out;
    const Axis x_axis{"laser_detuning", "GHz"};
    out.traces.push_back({"fig3a_cavity", rescale(cavity.tag("mirror", "present"), 1.0 / kGHz, x_axis, 1.0,
                                                  cavity.y_axis())});
    out.traces.push_back({"fig3a_retracted", rescale(bare.tag("mirror", "retracted"), 1.0 / kGHz, x_axis, 1.0,
                                                     bare.y_axis())});
    auto& r = out.results;
    r.add("molecules", static_cast<double>(ensemble.molecules.size()));
    r.add("median_window_samples", static_cast<double>(window));
    r.add("envelope_fwhm_ghz", env.fwhm / kGHz);
    r.add("envelope_fwhm_stderr_ghz", env.fit.stderr_of("fwhm") / kGHz);
    r.add("envelope_fit_converged", env.fit.converged ? "true" : "false");
    r.add("quality_factor_from_envelope", sys.cavity.resonance_freq / env.fwhm);
    r.add("cavity_max", cavity.max_y());
    r.add("retracted_max", bare.max_y());
    return out;
}

ScenarioOutput run_fig3b(const Config& cfg) {
    const auto sys = system_from(cfg);
    spectra::MoleculeEnsemble single{{{0.0, 0.0, 0.0, std::nullopt}}, cfg.number("inhomogeneous_fwhm"), 0};
    const double s = cfg.number("ensemble_saturation");
    const DriveParams excitation{0.0, 0.0, s, 1.0, 0.0};
    const auto grid = symmetric_grid(cfg.number("probe_span"), cfg.integer("probe_points"));
    const auto line = spectra::ensemble_spectrum(single, sys.cavity, sys.emitter, excitation, grid,
                                                 {true, cfg.number("line_amplitude"), 0.0});
    const auto fit = fitting::fit(fitting::initial_model(fitting::ModelKind::lorentzian, line), line);

    ScenarioOutput out;
    out.traces.push_back({"fig3b", rescale(line, 1.0 / kMHz, {"laser_detuning", "MHz"}, 1.0, line.y_axis())});
    auto& r = out.results;
    r.add("lorentzian_fwhm_mhz", std::abs(fit.value("fwhm")) / kMHz);
    r.add("lorentzian_fwhm_stderr_mhz", fit.stderr_of("fwhm") / kMHz);
    r.add("power_broadened_fwhm_mhz", sys.emitter.gamma_fwhm * std::sqrt(1.0 + s) / kMHz);
    r.add("fit_converged", fit.converged ? "true" : "false");
    return out;
}

ScenarioOutput run_fig3c(const Config& cfg) {
    const double gamma = linewidth_from_lifetime(cfg.number("tau_cav"));
    const double f = cfg.number("g2_signal_fraction");
    const auto delays = symmetric_grid(cfg.number("g2_span"), cfg.integer("g2_points"));
    const auto g2 = dynamics::g2_trace(delays, gamma, f);
    ScenarioOutput out;
    out.traces.push_back({"fig3c", rescale(g2, 1.0 / kNanosecond, {"delay", "ns"}, 1.0, g2.y_axis())});
    out.results.add("g2_zero", dynamics::g2_background(f, dynamics::g2_weak_drive(0.0, gamma)));
    out.results.add("g2_trace_min", g2.min_y());
    out.results.add("antibunching_linewidth_mhz", gamma / kMHz);
    return out;
}

ScenarioOutput run_fig3d(const Config& cfg) {
    const double waist = cfg.number("mode_waist_fwhm");
    const double s0 = cfg.number("mode_map_saturation");
    const auto x = symmetric_grid(cfg.number("mode_scan_span"), cfg.integer("mode_scan_points"));
    const auto map = spectra::mode_map(x, waist, s0);
    ScenarioOutput out;
    out.traces.push_back(
        {"fig3d", rescale(map.trace, 1.0 / kMicrometer, {"lateral_position", "um"}, 1.0, map.trace.y_axis())});
    out.results.add("mode_waist_fwhm_um", waist / kMicrometer);
    out.results.add("gaussian_fit_fwhm_um", map.fitted_fwhm / kMicrometer);
    out.results.add("half_max_width_um", spectra::mode_map_half_max_width(waist, s0) / kMicrometer);
    return out;
}

ScenarioOutput run_fig3e(const Config& cfg) {
    const auto sys = system_from(cfg);
    const auto grid = symmetric_grid(cfg.number("probe_span"), cfg.integer("probe_points"));
    ScenarioOutput out;
    auto add = [&](std::string_view model, Trace trace) {
        auto fit = fitting::fit(fitting::initial_model(fitting::ModelKind::lorentzian, trace), trace);
        out.results.add("transmission_min_" + std::string(model), trace.min_y());
        out.results.add("dip_" + std::string(model), 1.0 - trace.min_y());
        out.results.add("lorentzian_fit_fwhm_" + std::string(model) + "_mhz", std::abs(fit.value("fwhm")) / kMHz);
        trace.tag("model", std::string(model));
        out.traces.push_back({"fig3e_" + std::string(model),
                              rescale(trace, 1.0 / kMHz, {"probe_detuning", "MHz"}, 1.0, trace.y_axis())});
    };
    if (wants(cfg, "linear")) add("linear", spectra::coupled_response_sweep(grid, 0.0, sys, 0.0));
    if (wants(cfg, "eq1")) add("eq1", spectra::saturation_lineshape(grid, sys, 0.0));
    out.results.add("cooperativity", sys.coupling.cooperativity());
    return out;
}

ScenarioOutput run_fig4_panel(const Config& cfg, std::size_t panel) {
    const auto sys = system_from(cfg);
    const double kappa = sys.cavity.kappa_fwhm;
    const double detuning_kappa = cfg.list("fano_detunings_kappa").at(panel);
    const auto grid = symmetric_grid(cfg.number("probe_span"), cfg.integer("probe_points"));
    const auto traces = spectra::fano_series(grid, std::array{detuning_kappa * kappa}, sys);
    const auto& trace = traces.front();

    fitting::ModelAux aux;
    aux.kappa_fwhm = kappa;
    const auto fit = fitting::fit(fitting::initial_model(fitting::ModelKind::coupled_response, trace, aux), trace);
    const auto ex = spectra::excursions(trace);

    ScenarioOutput out;
    const std::string name = "fig4" + std::string(1, static_cast<char>('a' + panel));
    out.traces.push_back({name, rescale(trace, 1.0 / kMHz, {"probe_detuning", "MHz"}, 1.0, trace.y_axis())
                                    .tag("cavity_detuning_kappa", format_double(detuning_kappa))});
    auto& r = out.results;
    r.add("cavity_detuning_kappa", detuning_kappa);
    r.add("baseline", ex.baseline);
    r.add("peak_above_baseline", ex.above);
    r.add("dip_below_baseline", ex.below);
    r.add("excursion_balance", ex.balance());
    r.add("asymmetry_metric", spectra::asymmetry_metric(trace));
    r.add("fit_cavity_detuning_kappa", fit.value("cavity_detuning") / kappa);
    r.add("fit_g_ghz", fit.value("g") / kGHz);
    r.add("fit_gamma_mhz", fit.value("gamma") / kMHz);
    r.add("fit_converged", fit.converged ? "true" : "false");
    return out;
}

ScenarioOutput run_fig4e(const Config& cfg) {
    const auto sys = system_from(cfg);
    const double n_crit = cfg.number("critical_photon_number");
    const auto flux = linspace(0.0, cfg.number("saturation_flux_max"),
                               static_cast<std::size_t>(cfg.integer("saturation_points")));
    ScenarioOutput out;
    auto& r = out.results;
    if (wants(cfg, "eq1")) {
        auto curve = spectra::saturation_curve(flux, n_crit, sys.coupling.beta(), sys.emitter.branching_alpha);
        const auto fit = fitting::fit(fitting::initial_model(fitting::ModelKind::saturation, curve), curve);
        r.add("transmission_eq1_s0", curve.y().front());
        r.add("transmission_eq1_s1", spectra::saturation_transmission(1.0, sys.coupling.beta(),
                                                                      sys.emitter.branching_alpha));
        r.add("fit_n_crit", fit.value("n_crit"));
        r.add("fit_n_crit_stderr", fit.stderr_of("n_crit"));
        r.add("fit_beta_alpha", fit.value("beta_alpha"));
        out.traces.push_back({"fig4e_eq1", std::move(curve.tag("model", "eq1"))});
    }
    if (wants(cfg, "linear")) {
        std::vector<double> t;
        for (double x : flux) t.push_back(spectra::coupled_response(0.0, 0.0, sys, x / n_crit));
        Trace curve(flux, std::move(t), {"photon_flux", "photons/lifetime"}, {"transmission", "1"});
        r.add("transmission_linear_s0", curve.y().front());
        r.add("transmission_linear_s1", spectra::coupled_response(0.0, 0.0, sys, 1.0));
        out.traces.push_back({"fig4e_linear", std::move(curve.tag("model", "linear"))});
    }
    r.add("critical_photon_number", n_crit);
    return out;
}

struct Fig5System {
    System sys;
    double gamma_star;
};

Fig5System fig5_system(const Config& cfg) {
    auto sys = system_from(cfg);
    const double gamma_star = dynamics::dephasing_for_peak_gain(sys, cfg.number("target_peak_gain_percent"));
    sys.emitter.pure_dephasing = gamma_star;
    return {sys, gamma_star};
}

ScenarioOutput run_fig5_cw(const Config& cfg, std::size_t panel) {
    const auto [sys, gamma_star] = fig5_system(cfg);
    const double gamma = sys.emitter.gamma_fwhm;
    const double pump =
        panel < 2 ? cfg.list("pump_rates_gamma").at(panel) * gamma : dynamics::peak_gain_pump_rate(sys.emitter);
    const auto grid = symmetric_grid(cfg.number("probe_span"), cfg.integer("probe_points"));
    const auto trace = dynamics::probe_transmission_with_pump(grid, pump, sys);

    ScenarioOutput out;
    const std::string name = "fig5" + std::string(1, static_cast<char>('a' + panel));
    out.traces.push_back({name, rescale(trace, 1.0 / kMHz, {"probe_detuning", "MHz"}, 1.0, trace.y_axis())
                                    .tag("pump_rate_gamma", format_double(pump / gamma))});
    auto& r = out.results;
    r.add("pump_rate_gamma", pump / gamma);
    r.add("gamma_star_mhz", gamma_star / kMHz);
    r.add("resonant_transmission", dynamics::probe_transmission(0.0, pump, sys));
    r.add("gain_percent", 100.0 * (dynamics::probe_transmission(0.0, pump, sys) - 1.0));
    r.add("probe_linewidth_mhz", 2.0 * dynamics::coherence_decay(pump, sys.emitter) / kMHz);
    return out;
}

ScenarioOutput run_fig5d(const Config& cfg) {
    const auto [sys, gamma_star] = fig5_system(cfg);
    const double gamma = sys.emitter.gamma_fwhm;
    const auto pumps = linspace(0.0, cfg.number("amplification_pump_max_gamma") * gamma,
                                static_cast<std::size_t>(cfg.integer("amplification_points")));
    const auto curve = dynamics::amplification_curve(pumps, sys);
    auto ideal = sys;
    ideal.emitter.pure_dephasing = 0.0;
    const auto ideal_curve = dynamics::amplification_curve(pumps, ideal);

    fitting::ModelAux aux;
    aux.beta_alpha = sys.beta_alpha();
    const auto fit = fitting::fit(fitting::initial_model(fitting::ModelKind::amplification, curve, aux), curve);

    ScenarioOutput out;
    const Axis pump_axis{"pump_rate", "gamma"};
    out.traces.push_back({"fig5d", rescale(curve, 1.0 / gamma, pump_axis, 1.0, curve.y_axis())
                                       .tag("gamma_star_gamma", format_double(gamma_star / gamma))});
    out.traces.push_back({"fig5d_lifetime_limited", rescale(ideal_curve, 1.0 / gamma, pump_axis, 1.0,
                                                            ideal_curve.y_axis())
                                                        .tag("gamma_star_gamma", "0")});
    auto& r = out.results;
    r.add("gamma_star_mhz", gamma_star / kMHz);
    r.add("dephasing_ratio", gamma_star / gamma);
    r.add("peak_pump_gamma", dynamics::peak_gain_pump_rate(sys.emitter) / gamma);
    r.add("peak_gain_percent", dynamics::peak_gain_percent(sys));
    r.add("curve_max_gain_percent", curve.max_y());
    r.add("lifetime_limited_peak_gain_percent", dynamics::peak_gain_percent(ideal));
    r.add("fit_pump_scale_gamma", fit.value("pump_scale") * gamma);
    r.add("fit_dephasing_ratio", fit.value("dephasing_ratio"));
    r.add("fit_converged", fit.converged ? "true" : "false");
    return out;
}

struct PulsedSetup {
    System sys;
    dynamics::PulseConfig pulse;
    dynamics::InstrumentResponse irf;
    dynamics::PulsedSignal signal;
    std::vector<double> grid;
};

PulsedSetup pulsed_setup(const Config& cfg) {
    PulsedSetup p;
    p.sys = system_from(cfg);
    p.sys.emitter.gamma_fwhm = linewidth_from_lifetime(cfg.number("pulse_decay_time"));
    p.sys.emitter.pure_dephasing = 0.0;
    p.pulse = {cfg.number("pulse_arrival"), cfg.number("pulse_population")};
    p.irf = {cfg.number("irf_fwhm")};
    const double bg = cfg.number("pulse_probe_background");
    p.signal = {cfg.number("pulse_emission_scale"), bg, 2.0 * p.sys.beta_alpha() * bg};
    const double step = cfg.number("pulse_step");
    const auto n = static_cast<std::size_t>(std::llround(cfg.number("pulse_window") / step)) + 1;
    p.grid.resize(n);
    for (std::size_t i = 0; i < n; ++i) p.grid[i] = static_cast<double>(i) * step;
    return p;
}

ScenarioOutput run_fig5e(const Config& cfg) {
    const auto p = pulsed_setup(cfg);
    using dynamics::ProbeMode;
    const auto spontaneous = dynamics::pulsed_response(p.pulse, ProbeMode::none, p.sys, p.irf, p.grid, p.signal);
    const auto on = dynamics::pulsed_response(p.pulse, ProbeMode::on_resonance, p.sys, p.irf, p.grid, p.signal);
    const auto off = dynamics::pulsed_response(p.pulse, ProbeMode::detuned, p.sys, p.irf, p.grid, p.signal);
    const auto fit = fitting::fit_decay_with_irf(spontaneous, p.irf, p.pulse.arrival_time);

    ScenarioOutput out;
    const Axis t_axis{"time", "ns"};
    auto add = [&](std::string file, const Trace& t, std::string probe) {
        auto scaledt = rescale(t, 1.0 / kNanosecond, t_axis, 1.0, t.y_axis());
        out.traces.push_back({std::move(file), std::move(scaledt.tag("probe", std::move(probe)))});
    };
    add("fig5e_spontaneous", spontaneous, "none");
    add("fig5e_probe_on", on, "on_resonance");
    add("fig5e_probe_off", off, "detuned");
    auto& r = out.results;
    r.add("decay_time_ns", p.sys.emitter.lifetime() / kNanosecond);
    r.add("fit_tau_ns", fit.value("tau") / kNanosecond);
    r.add("fit_tau_stderr_ns", fit.stderr_of("tau") / kNanosecond);
    r.add("fit_amplitude", fit.value("amplitude"));
    r.add("fit_converged", fit.converged ? "true" : "false");
    r.add("probe_on_background_before_pulse", on.y().front());
    r.add("probe_off_background", off.y().front());
    return out;
}

ScenarioOutput run_fig5f(const Config& cfg) {
    const auto p = pulsed_setup(cfg);
    const auto diff = dynamics::stimulated_difference(p.pulse, p.sys, p.irf, p.grid, p.signal);
    const auto ideal = dynamics::stimulated_difference(p.pulse, p.sys, {0.0}, p.grid, p.signal);
    const double t0 = p.pulse.arrival_time;
    ScenarioOutput out;
    out.traces.push_back({"fig5f", rescale(diff, 1.0 / kNanosecond, {"time", "ns"}, 1.0, diff.y_axis())});
    auto& r = out.results;
    const double tau = p.sys.emitter.lifetime();
    r.add("tau_ln2_ns", tau * kLn2 / kNanosecond);
    // The IRF smears the pre-pulse attenuation into the rise, so search from the gain maximum.
    const auto peak = std::max_element(diff.y().begin(), diff.y().end()) - diff.y().begin();
    r.add("gain_to_loss_crossing_ns", (dynamics::first_zero_crossing(diff, diff.x()[peak]) - t0) / kNanosecond);
    r.add("zero_crossing_ideal_detector_ns", (dynamics::first_zero_crossing(ideal, t0) - t0) / kNanosecond);
    r.add("max_gain_signal", diff.max_y());
    r.add("attenuation_before_pulse", diff.y().front());
    return out;
}

control::ModulationConfig modulation(const Config& cfg, const CavityParams& cavity, bool fast) {
    control::ModulationConfig m;
    const auto point = cfg.text("mod_operating_point");
    m.center = point == "peak"        ? 0.0
               : point == "max_slope" ? control::flank_displacement(cavity, control::FlankPoint::max_slope)
                                      : control::flank_displacement(cavity, control::FlankPoint::half_maximum);
    m.amplitude = cfg.number("mod_amplitude");
    m.frequency = cfg.number(fast ? "mod_fast_frequency" : "mod_frequency");
    m.duration = cfg.number(fast ? "mod_fast_duration" : "mod_duration");
    m.sample_rate = cfg.number(fast ? "mod_fast_sample_rate" : "mod_sample_rate");
    return m;
}

ScenarioOutput run_fig6a(const Config& cfg) {
    const auto sys = system_from(cfg);
    const auto mod = modulation(cfg, sys.cavity, false);
    const auto trace = control::modulated_emission(mod, sys.cavity, cfg.number("mod_peak_emission"));
    ScenarioOutput out;
    out.traces.push_back({"fig6a", trace});
    auto& r = out.results;
    r.add("operating_point_nm", mod.center / kNanometer);
    r.add("operating_point_detuning_ghz", length_to_detuning(mod.center, sys.cavity) / kGHz);
    r.add("amplitude_nm", mod.amplitude / kNanometer);
    r.add("emission_min", trace.min_y());
    r.add("emission_max", trace.max_y());
    return out;
}

ScenarioOutput run_fig6b(const Config& cfg) {
    const auto sys = system_from(cfg);
    const double peak = cfg.number("mod_peak_emission");
    ScenarioOutput out;
    auto& r = out.results;
    auto analyse = [&](bool fast, const std::string& label) {
        const auto mod = modulation(cfg, sys.cavity, fast);
        const auto spectrum = control::harmonic_spectrum(control::modulated_emission(mod, sys.cavity, peak));
        const double f1 = control::harmonic_magnitude(spectrum, mod.frequency);
        const double f2 = control::harmonic_magnitude(spectrum, 2.0 * mod.frequency);
        const double f3 = control::harmonic_magnitude(spectrum, 3.0 * mod.frequency);
        r.add(label + "_fundamental_rms", f1);
        r.add(label + "_h2_db", 20.0 * std::log10(f2 / f1));
        r.add(label + "_h3_db", 20.0 * std::log10(f3 / f1));
        auto db = control::to_decibels(spectrum, f1);
        db.tag("modulation_hz", format_double(mod.frequency));
        out.traces.push_back({"fig6b_" + label, std::move(db)});
    };
    analyse(false, "slow");
    analyse(true, "fast");

    // Same excursion centered on the resonance: even waveform, no fundamental.
    auto centered = modulation(cfg, sys.cavity, false);
    centered.center = 0.0;
    const auto spectrum = control::harmonic_spectrum(control::modulated_emission(centered, sys.cavity, peak));
    const double f1 = control::harmonic_magnitude(spectrum, centered.frequency);
    const double f2 = control::harmonic_magnitude(spectrum, 2.0 * centered.frequency);
    r.add("peak_centered_fundamental_below_h2_db", 20.0 * std::log10(f2 / std::max(f1, 1e-300)));
    return out;
}

ScenarioOutput run_lock(const Config& cfg) {
    const auto sys = system_from(cfg);
    control::LockConfig lc;
    lc.kp = cfg.number("lock_kp");
    lc.ki = cfg.number("lock_ki");
    lc.sample_interval = cfg.number("lock_sample_interval");
    lc.actuator_range = cfg.number("lock_actuator_range");
    lc.noise_sigma = cfg.number("lock_noise_sigma");
    lc.drift_rate = cfg.number("lock_drift");
    lc.coupling_efficiency = cfg.number("lock_coupling_efficiency");
    lc.seed = static_cast<std::uint64_t>(cfg.integer("seed"));
    const double duration = cfg.number("lock_duration");
    const auto closed = control::lock_simulate(lc, sys.cavity, duration);
    auto open_cfg = lc;
    open_cfg.kp = 0.0;
    open_cfg.ki = 0.0;
    const auto open = control::lock_simulate(open_cfg, sys.cavity, duration);

    ScenarioOutput out;
    out.traces.push_back({"lock", rescale(closed.residual, 1.0, {"time", "s"}, 1.0 / kNanometer,
                                          {"residual_displacement", "nm"})});
    auto& r = out.results;
    r.add("rms_nm", closed.rms / kNanometer);
    if (!(lc.kp == 0.0 && lc.ki == 0.0))
        r.add("predicted_rms_nm", control::predicted_lock_rms(lc.kp, lc.ki, lc.noise_sigma) / kNanometer);
    r.add("open_loop_rms_nm", open.rms / kNanometer);
    r.add("open_to_closed_ratio", closed.rms > 0.0 ? open.rms / closed.rms : 0.0);
    r.add("half_linewidth_displacement_nm",
          detuning_to_length(0.5 * sys.cavity.kappa_fwhm, sys.cavity) / kNanometer);
    return out;
}

} // namespace

std::span<const std::string_view> scenario_names() { return kNames; }

bool is_scenario(std::string_view name) {
    const auto names = scenario_names();
    return std::find(names.begin(), names.end(), name) != names.end();
}

std::string_view default_preset(std::string_view scenario) {
    return scenario.starts_with("fig4") || scenario.starts_with("fig6") ? "degraded" : "paper";
}

Config effective_config(std::string_view scenario, const Config& overrides) {
    const std::string preset = overrides.has("preset") ? overrides.text("preset") : std::string(default_preset(scenario));
    auto cfg = config::load_preset(preset).merged(overrides);
    cfg.set("preset", preset);
    return cfg;
}

void Results::add(std::string key, double value) { items_.emplace_back(std::move(key), format_double(value)); }

void Results::add(std::string key, std::string value) { items_.emplace_back(std::move(key), std::move(value)); }

double Results::number(std::string_view key) const {
    for (const auto& [k, v] : items_)
        if (k == key) return std::stod(v);
    throw DomainError("no result named " + std::string(key));
}

std::string Results::text() const {
    std::string out;
    for (const auto& [k, v] : items_) out += k + " = " + v + "\n";
    return out;
}

System system_from(const Config& cfg) {
    System sys;
    auto& c = sys.cavity;
    c.kappa_fwhm = cfg.number("kappa_fwhm");
    c.finesse = cfg.number("finesse");
    c.resonance_freq = optical_frequency(cfg.number("resonance_wavelength"));
    c.mode_volume_lambda3 = cfg.number("mode_volume_lambda3");
    c.mode_waist_fwhm = cfg.number("mode_waist_fwhm");
    c.axis_angle_deg = cfg.number("axis_angle");
    c.per_axis_offset = cfg.number("per_axis_offset");
    c.validate();

    const auto pb = purcell_branching(cfg.number("tau_cav"), cfg.number("tau_ref"), cfg.number("branching_alpha"));
    auto& e = sys.emitter;
    e.zpl_freq = c.resonance_freq;
    e.gamma_fwhm = cfg.number("gamma_fwhm");
    e.branching_alpha = pb.alpha_cav;
    e.pure_dephasing = cfg.number("pure_dephasing");
    e.validate();

    const double beta = beta_from_extinction(1.0 - cfg.number("extinction_dip"), pb.alpha_cav);
    sys.coupling = CouplingParams(cfg.number("g"), beta, c.kappa_fwhm, e.gamma_fwhm);
    return sys;
}

ScenarioOutput run(std::string_view scenario, const Config& cfg) {
    if (scenario == "params") return run_params(cfg);
    if (scenario == "fig3a") return run_fig3a(cfg);
    if (scenario == "fig3b") return run_fig3b(cfg);
    if (scenario == "fig3c") return run_fig3c(cfg);
    if (scenario == "fig3d") return run_fig3d(cfg);
    if (scenario == "fig3e") return run_fig3e(cfg);
    if (scenario == "fig4a") return run_fig4_panel(cfg, 0);
    if (scenario == "fig4b") return run_fig4_panel(cfg, 1);
    if (scenario == "fig4c") return run_fig4_panel(cfg, 2);
    if (scenario == "fig4d") return run_fig4_panel(cfg, 3);
    if (scenario == "fig4e") return run_fig4e(cfg);
    if (scenario == "fig5a") return run_fig5_cw(cfg, 0);
    if (scenario == "fig5b") return run_fig5_cw(cfg, 1);
    if (scenario == "fig5c") return run_fig5_cw(cfg, 2);
    if (scenario == "fig5d") return run_fig5d(cfg);
    if (scenario == "fig5e") return run_fig5e(cfg);
    if (scenario == "fig5f") return run_fig5f(cfg);
    if (scenario == "fig6a") return run_fig6a(cfg);
    if (scenario == "fig6b") return run_fig6b(cfg);
    if (scenario == "lock") return run_lock(cfg);
    throw DomainError("unknown scenario '" + std::string(scenario) + "'");
}

std::string manifest_text(std::string_view scenario, const Config& cfg) {
    auto m = cfg;
    m.set("scenario", scenario);
    m.set("version", version());
    return "# molcav run manifest; replay with: molcav replay <this file> --out DIR\n" + m.serialize();
}

void write_outputs(const std::filesystem::path& dir, const ScenarioOutput& output, const std::string& manifest) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    for (const auto& t : output.traces) write_csv(dir / (t.file + ".csv"), t.trace);
    auto write_text = [&](const std::filesystem::path& path, const std::string& text) {
        std::ofstream f(path, std::ios::binary);
        f << text;
        if (!f) throw IoError("cannot write " + path.string());
    };
    write_text(dir / "results.txt", output.results.text());
    write_text(dir / "manifest.conf", manifest);
}

std::string_view version() { return MOLCAV_VERSION; }

} // namespace molcav::scenarios
