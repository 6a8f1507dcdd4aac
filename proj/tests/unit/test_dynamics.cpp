#include <doctest.h>

#include <cmath>
#include <random>

#include "molcav/dynamics.hpp"
#include "molcav/errors.hpp"
#include "molcav/fitting.hpp"
#include "test_support.hpp"

using namespace molcav;
using namespace molcav::dynamics;
using doctest::Approx;

namespace {

EmitterParams emitter(double gamma = 40 * kMHz, double dephasing = 0.0) {
    EmitterParams e;
    e.gamma_fwhm = gamma;
    e.branching_alpha = 0.45;
    e.pure_dephasing = dephasing;
    return e;
}

// (1 + ba * inversion * (gamma/2) / gamma2)^2 on resonance.
double oracle_gain_transmission(double k, double gamma, double dephasing, double ba) {
    const double inversion = (k - gamma) / (k + gamma);
    const double gamma2 = 0.5 * (gamma + k) + dephasing;
    const double a = 1.0 + ba * inversion * 0.5 * gamma / gamma2;
    return a * a;
}

// Exponential convolved with a unit-area Gaussian, written with erfc directly.
double oracle_emg(double t, double amplitude, double tau, double sigma) {
    return 0.5 * amplitude * std::exp(sigma * sigma / (2 * tau * tau) - t / tau) *
           std::erfc((sigma / tau - t / sigma) / std::sqrt(2.0));
}

// Brute-force trapezoid convolution of f with a Gaussian of width sigma.
template <class F>
double brute_convolution(F f, double t, double sigma, std::size_t n = 40001) {
    const double reach = 10 * sigma;
    const double h = 2 * reach / static_cast<double>(n - 1);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double u = -reach + h * static_cast<double>(i);
        const double w = std::exp(-0.5 * u * u / (sigma * sigma)) / (sigma * std::sqrt(2 * kPi));
        sum += (i == 0 || i + 1 == n ? 0.5 : 1.0) * w * f(t - u);
    }
    return sum * h;
}

} // namespace

TEST_CASE("Bloch steady state, weak probe") {
    const auto e = emitter();
    const double g = e.gamma_fwhm;
    auto s = bloch_steady_state(0.0, 0.0, 0.0, e);
    CHECK(s.rho_gg == 1.0);
    CHECK(s.rho_ee == 0.0);
    s = bloch_steady_state(g, 0.0, 0.0, e);
    CHECK(s.inversion() == Approx(0.0).scale(1.0));
    s = bloch_steady_state(3 * g, 0.0, 0.0, e);
    CHECK(s.inversion() == Approx(0.5).epsilon(1e-15));
    CHECK(s.rho_ee == Approx(0.75));
    CHECK_THROWS_AS(bloch_steady_state(-1.0, 0.0, 0.0, e), DomainError);
    CHECK_THROWS_AS(bloch_steady_state(0.0, 0.0, 0.0, emitter(0.0)), DomainError);
}

TEST_CASE("integrated Bloch equations converge to the analytic steady state") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const auto e = emitter(20 * kMHz + 60 * kMHz * u(rng), 50 * kMHz * u(rng));
        const BlochDrive drive{5 * e.gamma_fwhm * u(rng), 2 * e.gamma_fwhm * u(rng), (u(rng) - 0.5) * 4 * e.gamma_fwhm};
        const auto run = integrate_bloch(BlochState{}, drive, e, 50 * e.lifetime());
        const auto ref = bloch_steady_state(drive.pump_rate, drive.probe_rabi, drive.probe_detuning, e);
        CHECK(run.state.rho_ee == Approx(ref.rho_ee).epsilon(1e-6).scale(1e-3));
        CHECK(run.state.rho_gg == Approx(ref.rho_gg).epsilon(1e-6));
        CHECK(std::abs(run.state.coherence - ref.coherence) <= 1e-6 * std::max(std::abs(ref.coherence), 1e-3));
        CHECK(run.richardson_error < 1e-8);
        CHECK(run.step <= e.lifetime() / 200 * (1 + 1e-12));
        // k_p = 3 gamma cross-check, w = 0.5
    }
    const auto e = emitter();
    const auto w = integrate_bloch(BlochState{}, BlochDrive{3 * e.gamma_fwhm, 0.0, 0.0}, e, 50 * e.lifetime());
    CHECK(w.state.inversion() == Approx(0.5).epsilon(1e-8));
}

TEST_CASE("Bloch populations are conserved and the coherence bounded") {
    const auto e = emitter(40 * kMHz, 10 * kMHz);
    const BlochDrive drive{2 * e.gamma_fwhm, 3 * e.gamma_fwhm, e.gamma_fwhm};
    const auto states = bloch_trajectory(BlochState{}, drive, e, e.lifetime() / 200, 10000);
    for (const auto& s : states) {
        CHECK(std::abs(s.rho_ee + s.rho_gg - 1.0) <= 1e-9);
        CHECK(std::abs(s.coherence) <= 0.5 + 1e-9);
    }
}

TEST_CASE("probe transmission with pump") {
    const auto sys = test::paper_system();
    const double g = sys.emitter.gamma_fwhm;
    CHECK(probe_transmission(0.0, 0.0, sys) == Approx(0.62).epsilon(1e-12));
    const auto flat = probe_transmission_with_pump(linspace(-500 * kMHz, 500 * kMHz, 1001), g, sys);
    for (double v : flat.y()) CHECK(std::abs(v - 1.0) <= 1e-9);
    const double ba = sys.beta_alpha();
    CHECK(probe_transmission(0.0, 3 * g, sys) == Approx((1 + ba / 8) * (1 + ba / 8)).epsilon(1e-14));
    CHECK(probe_transmission(0.0, 3 * g, sys) == Approx(1.054).epsilon(1e-3));
    // Gain line has HWHM gamma2.
    const double g2 = coherence_decay(3 * g, sys.emitter);
    const double peak = std::sqrt(probe_transmission(0.0, 3 * g, sys)) - 1.0;
    CHECK(std::sqrt(probe_transmission(g2, 3 * g, sys)) - 1.0 == Approx(0.5 * peak).epsilon(1e-12));
}

TEST_CASE("amplification curve matches the closed-form gain") {
    auto sys = test::paper_system();
    const double g = sys.emitter.gamma_fwhm;
    for (double dephasing : {0.0, 30 * kMHz, 165 * kMHz}) {
        sys.emitter.pure_dephasing = dephasing;
        const auto pumps = linspace(0.0, 20 * g, 2001);
        const auto curve = amplification_curve(pumps, sys);
        for (std::size_t i = 0; i < pumps.size(); i += 50) {
            const double t = oracle_gain_transmission(pumps[i], g, dephasing, sys.beta_alpha());
            CHECK(curve.y()[i] == Approx(100 * (t - 1)).epsilon(1e-12).scale(1e-10));
            CHECK(curve.y()[i] == Approx(gain_percent(pumps[i] / g, dephasing / g, sys.beta_alpha())).epsilon(1e-12).scale(1e-10));
        }
        int sign_changes = 0, maxima = 0;
        for (std::size_t i = 2; i < curve.size(); ++i) {
            const double a = curve.y()[i - 2], b = curve.y()[i - 1], c = curve.y()[i];
            if ((b < 0) != (c < 0)) ++sign_changes;
            if (b > a && b > c) ++maxima;
        }
        CHECK(sign_changes == 1);
        CHECK(maxima == 1);
        // Zero crossing at k_p = gamma.
        CHECK(curve.y()[100] == Approx(0.0).scale(1e-9));
    }
}

TEST_CASE("peak gain location and value") {
    auto sys = test::paper_system();
    const double g = sys.emitter.gamma_fwhm;
    CHECK(peak_gain_pump_rate(sys.emitter) == Approx(3 * g));
    CHECK(peak_gain_percent(sys) == Approx(5.4).epsilon(0.1 / 5.4));
    // Golden-section search on the closed form as an independent maximizer.
    for (double dephasing : {0.0, 50 * kMHz, 400 * kMHz}) {
        sys.emitter.pure_dephasing = dephasing;
        double a = 0.0, b = 50 * g;
        const double r = (std::sqrt(5.0) - 1) / 2;
        for (int i = 0; i < 200; ++i) {
            const double c = b - r * (b - a), d = a + r * (b - a);
            if (oracle_gain_transmission(c, g, dephasing, sys.beta_alpha()) >
                oracle_gain_transmission(d, g, dephasing, sys.beta_alpha()))
                b = d;
            else
                a = c;
        }
        CHECK(peak_gain_pump_rate(sys.emitter) == Approx(0.5 * (a + b)).epsilon(1e-6));
    }
    // Peak gain decreases with dephasing.
    double prev = 1e9;
    for (double d = 0; d < 500 * kMHz; d += 25 * kMHz) {
        sys.emitter.pure_dephasing = d;
        const double p = peak_gain_percent(sys);
        CHECK(p < prev);
        prev = p;
    }
}

TEST_CASE("dephasing reproducing a target peak gain") {
    auto sys = test::paper_system();
    const double d = dephasing_for_peak_gain(sys, 2.0);
    CHECK(d > 0.0);
    sys.emitter.pure_dephasing = d;
    CHECK(peak_gain_percent(sys) == Approx(2.0).epsilon(1e-10));
    CHECK_THROWS_AS(dephasing_for_peak_gain(sys, 6.0), DomainError);
    CHECK_THROWS_AS(dephasing_for_peak_gain(sys, -1.0), DomainError);
}

TEST_CASE("instrument response kernel has unit area") {
    const InstrumentResponse irf{0.5 * kNanosecond};
    const double s = irf.sigma();
    CHECK(2 * std::sqrt(2 * std::log(2.0)) * s == Approx(irf.fwhm).epsilon(1e-14));
    double sum = 0.0;
    const std::size_t n = 200001;
    const double h = 20 * s / (n - 1);
    for (std::size_t i = 0; i < n; ++i) sum += (i == 0 || i + 1 == n ? 0.5 : 1.0) * irf.kernel(-10 * s + h * i);
    CHECK(std::abs(sum * h - 1.0) <= 1e-9);
    CHECK_THROWS_AS(InstrumentResponse{-1.0}.validate(), DomainError);
}

TEST_CASE("pulsed response against the EMG closed form") {
    auto sys = test::paper_system();
    sys.emitter.gamma_fwhm = linewidth_from_lifetime(3.1 * kNanosecond);
    const double tau = sys.emitter.lifetime();
    const PulseConfig pulse{5 * kNanosecond, 1.0};
    const PulsedSignal signal{1.0, 0.0, 0.0};
    const auto grid = linspace(0.0, 40 * kNanosecond, 2001);
    for (double fwhm : {0.2, 0.5, 1.0}) {
        const InstrumentResponse irf{fwhm * kNanosecond};
        const auto t = pulsed_response(pulse, ProbeMode::none, sys, irf, grid, signal);
        double worst = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i)
            worst = std::max(worst, std::abs(t.y()[i] - oracle_emg(grid[i] - pulse.arrival_time, 1.0, tau, irf.sigma())));
        CHECK(worst <= 1e-6);
    }
    // Ideal detector: pure exponential.
    const auto ideal = pulsed_response(pulse, ProbeMode::none, sys, {0.0}, grid, signal);
    double worst = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double dt = grid[i] - pulse.arrival_time;
        worst = std::max(worst, std::abs(ideal.y()[i] - (dt < 0 ? 0.0 : std::exp(-dt / tau))));
    }
    CHECK(worst <= 1e-6);
    const auto empty = pulsed_response({5 * kNanosecond, 0.0}, ProbeMode::detuned, sys, {0.5 * kNanosecond}, grid,
                                       PulsedSignal{1.0, 2.0, 0.3});
    for (double v : empty.y()) CHECK(v == Approx(2.0).epsilon(1e-12));
    CHECK_THROWS_AS(pulsed_response(pulse, ProbeMode::none, sys, {0.5 * kNanosecond}, linspace(0, 10 * kNanosecond, 11), signal),
                    DomainError);
}

TEST_CASE("pulsed response convolution is linear and shift-equivariant") {
    auto sys = test::paper_system();
    sys.emitter.gamma_fwhm = linewidth_from_lifetime(3.1 * kNanosecond);
    const InstrumentResponse irf{0.5 * kNanosecond};
    const auto grid = linspace(0.0, 40 * kNanosecond, 801);
    const PulseConfig pulse{5 * kNanosecond, 0.8};
    const auto a = pulsed_response(pulse, ProbeMode::on_resonance, sys, irf, grid, {1.0, 0.5, 0.2});
    const auto b = pulsed_response(pulse, ProbeMode::on_resonance, sys, irf, grid, {0.3, 0.1, 0.7});
    const auto sum = pulsed_response(pulse, ProbeMode::on_resonance, sys, irf, grid, {2 * 1.0 + 3 * 0.3, 2 * 0.5 + 3 * 0.1, 2 * 0.2 + 3 * 0.7});
    for (std::size_t i = 0; i < grid.size(); ++i)
        CHECK(sum.y()[i] == Approx(2 * a.y()[i] + 3 * b.y()[i]).epsilon(1e-10));
    const double step = grid[1] - grid[0];
    const auto shifted = pulsed_response({pulse.arrival_time + 10 * step, 0.8}, ProbeMode::on_resonance, sys, irf, grid,
                                         {1.0, 0.5, 0.2});
    for (std::size_t i = 10; i < grid.size(); ++i) CHECK(shifted.y()[i] == Approx(a.y()[i - 10]).epsilon(1e-9));
}

TEST_CASE("stimulated difference") {
    auto sys = test::paper_system();
    sys.emitter.gamma_fwhm = linewidth_from_lifetime(3.1 * kNanosecond);
    const double tau = sys.emitter.lifetime();
    const auto grid = linspace(0.0, 40 * kNanosecond, 2001);
    const double step = grid[1] - grid[0];
    const double t0 = 5 * kNanosecond;
    const PulsedSignal signal{1.0, 2.0, 0.85};

    const auto full = stimulated_difference({t0, 1.0}, sys, {0.0}, grid, signal);
    CHECK(full.y().front() < 0.0);
    CHECK(full.y()[static_cast<std::size_t>(t0 / step) + 1] > 0.0);
    CHECK(first_zero_crossing(full, t0) - t0 == Approx(tau * kLn2).epsilon(step / (tau * kLn2)));
    CHECK(std::abs(first_zero_crossing(full, t0) - t0 - tau * kLn2) <= step);
    CHECK(full.y().back() == Approx(full.y().front()).epsilon(1e-3));

    const auto half = stimulated_difference({t0, 0.5}, sys, {0.0}, grid, signal);
    for (double v : half.y()) CHECK(v <= 1e-12);

    // Finite IRF: compare the gain-to-loss crossing with a brute-force convolution.
    const InstrumentResponse irf{0.5 * kNanosecond};
    const auto blurred = stimulated_difference({t0, 1.0}, sys, irf, grid, signal);
    const double k = signal.stimulated_scale;
    auto truth = [&](double t) { return t < t0 ? -k : k * (2 * std::exp(-(t - t0) / tau) - 1); };
    double prev_t = t0 + 0.5 * kNanosecond, prev_v = brute_convolution(truth, prev_t, irf.sigma());
    double oracle = NAN;
    for (double t = prev_t + step; t < 20 * kNanosecond; t += step) {
        const double v = brute_convolution(truth, t, irf.sigma());
        if (prev_v > 0 && v <= 0) {
            oracle = prev_t + (t - prev_t) * prev_v / (prev_v - v);
            break;
        }
        prev_t = t;
        prev_v = v;
    }
    REQUIRE(std::isfinite(oracle));
    const double got = first_zero_crossing(blurred, t0 + 0.5 * kNanosecond);
    CHECK(std::abs(got - oracle) <= step);
    CHECK(got > first_zero_crossing(full, t0));
}

TEST_CASE("pulsed decay fit recovers the lifetime") {
    auto sys = test::paper_system();
    sys.emitter.gamma_fwhm = linewidth_from_lifetime(3.1 * kNanosecond);
    const InstrumentResponse irf{0.5 * kNanosecond};
    const auto grid = linspace(0.0, 40 * kNanosecond, 2001);
    const auto t = pulsed_response({5 * kNanosecond, 1.0}, ProbeMode::none, sys, irf, grid, {1.0, 0.0, 0.0});
    const auto fit = fitting::fit_decay_with_irf(t, irf, 5 * kNanosecond);
    REQUIRE(fit.converged);
    CHECK(fit.value("tau") == Approx(3.1 * kNanosecond).epsilon(0.01));
}

TEST_CASE("photon statistics") {
    CHECK(g2_background(0.98, 0.0) == Approx(0.0396).epsilon(1e-12));
    CHECK(g2_background(1.0, 0.0) == 0.0);
    CHECK(g2_background(0.0, 0.3) == 1.0);
    // Inverse: the purity implied by 0.04 is close to 0.98.
    CHECK(std::sqrt(1.0 - 0.04) == Approx(0.98).epsilon(1e-3));
    CHECK_THROWS_AS(g2_background(1.1, 0.0), DomainError);
    CHECK_THROWS_AS(g2_background(0.5, -0.1), DomainError);

    const double gamma = 40 * kMHz;
    CHECK(g2_weak_drive(0.0, gamma) == 0.0);
    CHECK(g2_weak_drive(1.0, gamma) == Approx(1.0));
    const double angular = kTwoPi * gamma;
    CHECK(g2_weak_drive(2 * kLn2 / angular, gamma) == Approx(0.25).epsilon(1e-14));
    double prev = -1.0;
    for (double t = 0.0; t < 100 * kNanosecond; t += 0.1 * kNanosecond) {
        const double v = g2_weak_drive(t, gamma);
        CHECK(v >= prev);
        prev = v;
    }
    const auto trace = g2_trace(linspace(-20 * kNanosecond, 20 * kNanosecond, 801), gamma, 0.98);
    CHECK(trace.min_y() == Approx(0.0396).epsilon(1e-12));
    CHECK(trace.y().front() == Approx(trace.y().back()).epsilon(1e-14));
}
