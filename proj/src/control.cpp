#include "molcav/control.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <random>

#include "molcav/errors.hpp"
#include "molcav/spectra.hpp"
#include "molcav/units.hpp"

namespace molcav::control {
namespace {

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw DomainError(std::string(what) + " must be finite");
}

} // namespace

JonesVector JonesVector::linear(double angle_deg, double amplitude) {
    const double a = deg_to_rad(angle_deg);
    return {amplitude * std::cos(a), amplitude * std::sin(a)};
}

bool JonesVector::finite() const {
    return std::isfinite(x.real()) && std::isfinite(x.imag()) && std::isfinite(y.real()) && std::isfinite(y.imag());
}

double analyzer_flux(const JonesVector& field, double angle_deg) {
    const double a = deg_to_rad(angle_deg);
    return std::norm(std::cos(a) * field.x + std::sin(a) * field.y);
}

CrossPolarizedDetection cross_polarized_detection(double input_angle_deg, double analyzer_angle_deg,
                                                  double axis_angle_deg, std::complex<double> response_a,
                                                  std::complex<double> response_b) {
    require_finite(input_angle_deg, "input angle");
    require_finite(analyzer_angle_deg, "analyzer angle");
    require_finite(axis_angle_deg, "axis angle");
    const double axis = deg_to_rad(axis_angle_deg);
    const double sin_axis = std::sin(axis);
    if (std::abs(sin_axis) < 1e-12) throw DomainError("cavity axes must not be parallel");

    const auto in = JonesVector::linear(input_angle_deg);
    // E_in = c_a (cos t, sin t) + c_b (1, 0)
    const std::complex<double> c_a = in.y / sin_axis;
    const std::complex<double> c_b = in.x - c_a * std::cos(axis);
    const std::complex<double> a = response_a * c_a;
    const std::complex<double> b = response_b * c_b;
    const JonesVector out{a * std::cos(axis) + b, a * sin_axis};

    const double detected = analyzer_flux(out, analyzer_angle_deg);
    const double cavity_flux = out.flux();
    return {out, cavity_flux > 0.0 ? detected / cavity_flux : 0.0, detected / in.flux()};
}

double cross_polarized_throughput(double input_angle_deg, double analyzer_angle_deg, double axis_angle_deg,
                                  std::complex<double> response_a, std::complex<double> response_b) {
    return cross_polarized_detection(input_angle_deg, analyzer_angle_deg, axis_angle_deg, response_a, response_b)
        .throughput;
}

// ---- Hansch-Couillaud lock ------------------------------------------------------------

std::complex<double> cavity_reflection(double detuning, const CavityParams& cavity, double coupling_efficiency) {
    if (!(cavity.kappa_fwhm > 0.0)) throw DomainError("kappa_fwhm must be > 0");
    if (!(coupling_efficiency > 0.0 && coupling_efficiency <= 1.0))
        throw DomainError("coupling_efficiency must lie in (0, 1]");
    const double k = cavity.kappa_fwhm;
    return 1.0 - coupling_efficiency * k / std::complex<double>(0.5 * k, -detuning);
}

double hc_error_signal(double detuning, const CavityParams& cavity, double coupling_efficiency) {
    if (!(cavity.kappa_fwhm > 0.0)) throw DomainError("kappa_fwhm must be > 0");
    if (!(coupling_efficiency > 0.0 && coupling_efficiency <= 1.0))
        throw DomainError("coupling_efficiency must lie in (0, 1]");
    const double hw = 0.5 * cavity.kappa_fwhm;
    return -coupling_efficiency * cavity.kappa_fwhm * detuning / (hw * hw + detuning * detuning);
}

void LockConfig::validate() const {
    if (!(sample_interval > 0.0)) throw DomainError("sample_interval must be > 0");
    if (!(noise_sigma >= 0.0)) throw DomainError("noise_sigma must be >= 0");
    if (!(actuator_range > 0.0)) throw DomainError("actuator_range must be > 0");
    if (!std::isfinite(drift_rate)) throw DomainError("drift_rate must be finite");
    if (!(coupling_efficiency > 0.0 && coupling_efficiency <= 1.0))
        throw DomainError("coupling_efficiency must lie in (0, 1]");
    check_lock_stability(kp, ki);
}

void check_lock_stability(double kp, double ki) {
    if (!std::isfinite(kp) || !std::isfinite(ki)) throw DomainError("lock gains must be finite");
    if (kp == 0.0 && ki == 0.0) return;
    if (!(ki > 0.0)) throw DomainError("lock unstable: integral gain ki must be > 0 (Jury bound ki > 0)");
    if (!(std::abs(kp) < 1.0)) throw DomainError("lock unstable: Jury bound |kp| < 1 violated");
    if (!(2.0 * kp + ki < 2.0)) throw DomainError("lock unstable: Jury bound 2 kp + ki < 2 violated");
}

double predicted_lock_rms(double kp, double ki, double sigma) {
    check_lock_stability(kp, ki);
    if (kp == 0.0 && ki == 0.0) return std::numeric_limits<double>::infinity();
    // AR(2) x[k+1] = a1 x[k] + a2 x[k-1] + w
    const double a1 = 1.0 - kp - ki;
    const double a2 = kp;
    const double var = (1.0 - a2) / ((1.0 + a2) * ((1.0 - a2) * (1.0 - a2) - a1 * a1));
    return sigma * std::sqrt(var);
}

LockResult lock_simulate(const LockConfig& config, const CavityParams& cavity, double duration) {
    config.validate();
    cavity.validate();
    if (!(duration >= 2.0 * config.sample_interval)) throw DomainError("lock duration must cover two samples");
    const auto n = static_cast<std::size_t>(std::llround(duration / config.sample_interval));

    // Error normalized so that it reads -x for small displacements x.
    const double slope = 4.0 * config.coupling_efficiency / cavity.kappa_fwhm * length_to_detuning(1.0, cavity);
    const double limit = 0.5 * config.actuator_range;

    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> t(n), x(n);
    double disturbance = 0.0;
    double actuator = 0.0;
    double integral = 0.0;
    double sum_sq = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        if (k > 0) disturbance += config.noise_sigma * normal(rng) + config.drift_rate * config.sample_interval;
        const double residual = disturbance + actuator;
        t[k] = static_cast<double>(k) * config.sample_interval;
        x[k] = residual;
        sum_sq += residual * residual;

        const double e =
            hc_error_signal(length_to_detuning(residual, cavity), cavity, config.coupling_efficiency) / slope;
        const double next = config.kp * e + config.ki * (integral + e);
        if (std::abs(next) <= limit) {
            integral += e;
            actuator = next;
        } else {
            actuator = std::clamp(next, -limit, limit);
        }
    }
    const double rms = std::sqrt(sum_sq / static_cast<double>(n));
    return {Trace(std::move(t), std::move(x), {"time", "s"}, {"residual_displacement", "m"}), rms};
}

// ---- length modulation ----------------------------------------------------------------

void ModulationConfig::validate() const {
    if (!std::isfinite(center)) throw DomainError("modulation center must be finite");
    if (!(amplitude >= 0.0) || !std::isfinite(amplitude)) throw DomainError("modulation amplitude must be >= 0");
    if (!(frequency > 0.0)) throw DomainError("modulation frequency must be > 0");
    if (!(sample_rate > 2.0 * frequency)) throw DomainError("sample_rate must exceed twice the modulation frequency");
    const double cycles = duration * frequency;
    if (!(cycles >= 10.0 - 1e-9)) throw DomainError("modulation duration must cover at least 10 periods");
    if (std::abs(cycles - std::round(cycles)) > 1e-9 * cycles)
        throw DomainError("modulation duration must cover a whole number of periods");
}

double flank_displacement(const CavityParams& cavity, FlankPoint point) {
    if (!(cavity.kappa_fwhm > 0.0)) throw DomainError("kappa_fwhm must be > 0");
    const double detuning =
        point == FlankPoint::max_slope ? cavity.kappa_fwhm / (2.0 * std::sqrt(3.0)) : 0.5 * cavity.kappa_fwhm;
    return detuning_to_length(detuning, cavity);
}

Trace modulated_emission(const ModulationConfig& mod, const CavityParams& cavity, double emitter_rate) {
    mod.validate();
    cavity.validate();
    if (!(emitter_rate >= 0.0)) throw DomainError("emitter rate must be >= 0");
    const auto n = static_cast<std::size_t>(std::llround(mod.duration * mod.sample_rate));
    std::vector<double> t(n), y(n);
    for (std::size_t k = 0; k < n; ++k) {
        t[k] = static_cast<double>(k) / mod.sample_rate;
        const double x = mod.center + mod.amplitude * std::sin(kTwoPi * mod.frequency * t[k]);
        y[k] = emitter_rate * spectra::bare_cavity_transmission(length_to_detuning(x, cavity), cavity);
    }
    return Trace(std::move(t), std::move(y), {"time", "s"}, {"emission", "photons/s"});
}

Trace harmonic_spectrum(const Trace& trace) {
    if (!trace.uniform(1e-6)) throw DomainError("harmonic_spectrum needs a uniformly sampled trace");
    const auto y = trace.y();
    const std::size_t n = y.size();
    const double dt = (trace.x().back() - trace.x().front()) / static_cast<double>(n - 1);

    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(n);

    const std::size_t bins = n / 2 + 1;
    double* in = fftw_alloc_real(n);
    fftw_complex* out = fftw_alloc_complex(bins);
    if (in == nullptr || out == nullptr) {
        fftw_free(in);
        fftw_free(out);
        throw DomainError("FFT buffer allocation failed");
    }
    fftw_plan plan;
    {
        std::lock_guard lock(planner_mutex());
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
    }
    for (std::size_t i = 0; i < n; ++i) in[i] = y[i] - mean;
    fftw_execute(plan);

    std::vector<double> freq(bins), mag(bins);
    const double scale = 1.0 / static_cast<double>(n);
    for (std::size_t k = 0; k < bins; ++k) {
        freq[k] = static_cast<double>(k) / (static_cast<double>(n) * dt);
        const double a = std::hypot(out[k][0], out[k][1]) * scale;
        const bool unpaired = k == 0 || (n % 2 == 0 && k == n / 2);
        mag[k] = unpaired ? a : std::numbers::sqrt2 * a;
    }
    {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan);
    }
    fftw_free(in);
    fftw_free(out);
    return Trace(std::move(freq), std::move(mag), {"frequency", "Hz"}, {"rms_amplitude", trace.y_axis().unit});
}

double harmonic_magnitude(const Trace& spectrum, double frequency) {
    const auto f = spectrum.x();
    const double df = f[1] - f[0];
    const auto k = static_cast<std::size_t>(std::llround((frequency - f.front()) / df));
    if (frequency < f.front() || k >= f.size()) throw DomainError("frequency outside the spectrum");
    return spectrum.y()[k];
}

Trace to_decibels(const Trace& spectrum, double reference) {
    if (!(reference > 0.0)) throw DomainError("dB reference must be > 0");
    std::vector<double> db;
    db.reserve(spectrum.size());
    for (double m : spectrum.y()) db.push_back(std::max(20.0 * std::log10(m / reference), -400.0));
    return Trace({spectrum.x().begin(), spectrum.x().end()}, std::move(db), spectrum.x_axis(),
                 {"magnitude", "dB re fundamental"});
}

} // namespace molcav::control
