#pragma once

// Damped Gauss-Newton least squares and the model families used to analyse
// forward-model output.

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "molcav/dynamics.hpp"
#include "molcav/trace.hpp"

namespace molcav::fitting {

enum class ModelKind { lorentzian, coupled_response, gaussian, exp_irf, saturation, amplification };

std::string_view model_name(ModelKind kind);
std::optional<ModelKind> parse_model(std::string_view name);

/// Parameter names in the order used by `evaluate`:
///   lorentzian, gaussian: center, fwhm, amplitude, offset
///   coupled_response:     center, cavity_detuning, g, gamma
///   exp_irf:              amplitude, tau, offset
///   saturation:           n_crit, beta_alpha        (x = photons per lifetime)
///   amplification:        pump_scale, dephasing_ratio  (x = pump power; k_p/gamma = pump_scale x)
std::vector<std::string> parameter_names(ModelKind kind);

/// Fixed (non-fitted) model inputs.
struct ModelAux {
    double kappa_fwhm = 0.0;  ///< coupled_response
    double irf_fwhm = 0.0;    ///< exp_irf; 0 means an ideal detector
    double t0 = 0.0;          ///< exp_irf pulse arrival time
    double beta_alpha = 0.0;  ///< amplification
};

struct ParamSpec {
    std::string name;
    double initial = 0.0;
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    double scale = 1.0;  ///< typical magnitude; sets finite-difference steps
};

struct FitModel {
    ModelKind kind = ModelKind::lorentzian;
    std::vector<ParamSpec> params;
    ModelAux aux;

    void validate() const;
};

struct FitResult {
    std::vector<std::string> names;
    std::vector<double> values;
    std::vector<double> stderrs;
    double rss = 0.0;
    bool converged = false;
    int iterations = 0;
    std::vector<double> cost_history;  ///< cost after each accepted iteration
    std::string message;

    double value(std::string_view name) const;
    double stderr_of(std::string_view name) const;
};

struct FitOptions {
    int max_iterations = 500;
    double rel_cost_tol = 1e-10;
    double grad_tol = 1e-12;
    bool analytic_jacobian = true;  ///< use the closed-form Jacobian where the model has one
};

void evaluate(ModelKind kind, const ModelAux& aux, std::span<const double> params, std::span<const double> x,
              std::span<double> out);

bool has_analytic_jacobian(ModelKind kind);

/// Row-major x.size() by params.size() Jacobian of the model values.
void analytic_jacobian(ModelKind kind, const ModelAux& aux, std::span<const double> params,
                       std::span<const double> x, std::span<double> jac);
void finite_difference_jacobian(ModelKind kind, const ModelAux& aux, std::span<const double> params,
                                std::span<const double> scales, std::span<const double> x, std::span<double> jac);

/// Deterministic starting point: peak position from the largest deviation from
/// the edge baseline, width from the half-crossing scan, and so on per model.
FitModel initial_model(ModelKind kind, const Trace& data, const ModelAux& aux = {});

/// Minimises sum((y - f)/sigma)^2 (sigma optional, one per sample). Non-convergence
/// is reported in the result, not thrown. coupled_response fits are started at
/// both signs of the cavity detuning and the lower cost is kept.
FitResult fit(const FitModel& model, const Trace& data, std::span<const double> sigma = {},
              const FitOptions& options = {});

/// Exponential decay convolved with a Gaussian instrument response, fitted for
/// amplitude, decay time and offset with the arrival time fixed.
FitResult fit_decay_with_irf(const Trace& data, const dynamics::InstrumentResponse& irf, double t0);

/// A exp(-(t - t0)/tau) H(t - t0) convolved with a unit-area Gaussian of width
/// sigma (sigma == 0: no convolution).
double exp_gauss(double t, double amplitude, double tau, double sigma, double t0);

/// Running median with an odd window; edges use the samples available.
std::vector<double> median_filter(std::span<const double> y, std::size_t window);

/// Odd median window covering at least five single-molecule linewidths.
std::size_t envelope_window(double linewidth, double sample_step);

struct EnvelopeFit {
    FitResult fit;
    double fwhm;
    std::size_t window;
};

/// Lorentzian fit of the pedestal left after median-filtering out narrow lines.
EnvelopeFit envelope_fit(const Trace& ensemble_trace, std::size_t median_window);

} // namespace molcav::fitting
