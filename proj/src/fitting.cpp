#include "molcav/fitting.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "molcav/errors.hpp"
#include "molcav/kernels.hpp"
#include "molcav/units.hpp"

namespace molcav::fitting {
namespace {

constexpr std::array kModels{
    std::pair{ModelKind::lorentzian, std::string_view("lorentzian")},
    std::pair{ModelKind::coupled_response, std::string_view("coupled_response")},
    std::pair{ModelKind::gaussian, std::string_view("gaussian")},
    std::pair{ModelKind::exp_irf, std::string_view("exp_irf")},
    std::pair{ModelKind::saturation, std::string_view("saturation")},
    std::pair{ModelKind::amplification, std::string_view("amplification")},
};

constexpr double kFourLn2 = 4.0 * kLn2;

// exp(z^2) erfc(z) for z >= 0 without overflow.
double erfcx(double z) {
    if (z < 25.0) return std::exp(z * z) * std::erfc(z);
    const double r = 1.0 / (z * z);
    return (1.0 - 0.5 * r * (1.0 - 1.5 * r * (1.0 - 2.5 * r))) / (z * std::sqrt(kPi));
}

struct EmgValue {
    double value;
    double d_tau;
};

// Unit-amplitude exp(-u/tau) H(u) convolved with a unit-area Gaussian of width sigma,
// and its derivative with respect to tau.
EmgValue emg(double u, double tau, double sigma) {
    if (sigma == 0.0) {
        if (u < 0.0) return {0.0, 0.0};
        const double e = std::exp(-u / tau);
        return {e, u / (tau * tau) * e};
    }
    const double z = (sigma / tau - u / sigma) / std::numbers::sqrt2;
    const double gauss = std::exp(-0.5 * u * u / (sigma * sigma));
    double e;
    if (z <= 0.0) {
        e = 0.5 * std::exp(0.5 * sigma * sigma / (tau * tau) - u / tau) * std::erfc(z);
    } else {
        e = 0.5 * gauss * erfcx(z);
    }
    const double d_tau = e * (u / (tau * tau) - sigma * sigma / (tau * tau * tau)) +
                         sigma / (std::sqrt(kTwoPi) * tau * tau) * gauss;
    return {e, d_tau};
}

double amplification_gain(double x, double scale, double dephasing_ratio, double beta_alpha) {
    const double r = scale * x;
    const double response = (r - 1.0) / ((r + 1.0) * (r + 1.0 + 2.0 * dephasing_ratio));
    const double a = 1.0 + beta_alpha * response;
    return 100.0 * (a * a - 1.0);
}

struct Baseline {
    double level;
    std::size_t extreme;  // index of the largest deviation from level
};

Baseline edge_baseline(std::span<const double> y) {
    const std::size_t edge = std::max<std::size_t>(1, y.size() / 20);
    double sum = 0.0;
    for (std::size_t i = 0; i < edge; ++i) sum += y[i] + y[y.size() - 1 - i];
    const double level = sum / static_cast<double>(2 * edge);
    std::size_t best = 0;
    for (std::size_t i = 1; i < y.size(); ++i)
        if (std::abs(y[i] - level) > std::abs(y[best] - level)) best = i;
    return {level, best};
}

// Width between the half-deviation crossings on either side of `peak`.
double half_crossing_width(std::span<const double> x, std::span<const double> y, double level, std::size_t peak) {
    const double half = 0.5 * std::abs(y[peak] - level);
    auto dev = [&](std::size_t i) { return std::abs(y[i] - level); };
    std::size_t lo = peak;
    while (lo > 0 && dev(lo) > half) --lo;
    std::size_t hi = peak;
    while (hi + 1 < y.size() && dev(hi) > half) ++hi;
    double width = x[hi] - x[lo];
    if (dev(lo) > half || dev(hi) > half || !(width > 0.0)) width = 0.25 * (x.back() - x.front());
    return width;
}

void require_size(std::span<const double> params, std::size_t n, ModelKind kind) {
    if (params.size() != n)
        throw DomainError(std::string(model_name(kind)) + " takes " + std::to_string(n) + " parameters");
}

} // namespace

std::string_view model_name(ModelKind kind) {
    for (const auto& [k, name] : kModels)
        if (k == kind) return name;
    return "unknown";
}

std::optional<ModelKind> parse_model(std::string_view name) {
    for (const auto& [k, n] : kModels)
        if (n == name) return k;
    return std::nullopt;
}

std::vector<std::string> parameter_names(ModelKind kind) {
    switch (kind) {
    case ModelKind::lorentzian:
    case ModelKind::gaussian: return {"center", "fwhm", "amplitude", "offset"};
    case ModelKind::coupled_response: return {"center", "cavity_detuning", "g", "gamma"};
    case ModelKind::exp_irf: return {"amplitude", "tau", "offset"};
    case ModelKind::saturation: return {"n_crit", "beta_alpha"};
    case ModelKind::amplification: return {"pump_scale", "dephasing_ratio"};
    }
    return {};
}

void FitModel::validate() const {
    const auto names = parameter_names(kind);
    if (params.size() != names.size())
        throw DomainError(std::string(model_name(kind)) + " expects " + std::to_string(names.size()) +
                          " parameters");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& p = params[i];
        if (p.name != names[i]) throw DomainError("parameter " + std::to_string(i) + " must be named " + names[i]);
        if (std::isnan(p.lower) || std::isnan(p.upper) || !(p.lower < p.upper))
            throw DomainError("bounds of " + p.name + " must satisfy lower < upper");
        if (!std::isfinite(p.initial) || p.initial < p.lower || p.initial > p.upper)
            throw DomainError("initial value of " + p.name + " must be finite and within its bounds");
        if (!(p.scale > 0.0) || !std::isfinite(p.scale)) throw DomainError("scale of " + p.name + " must be > 0");
    }
    if (kind == ModelKind::coupled_response && !(aux.kappa_fwhm > 0.0))
        throw DomainError("coupled_response needs kappa_fwhm > 0");
    if (kind == ModelKind::exp_irf && !(aux.irf_fwhm >= 0.0)) throw DomainError("exp_irf needs irf_fwhm >= 0");
    if (kind == ModelKind::amplification && !(aux.beta_alpha > 0.0))
        throw DomainError("amplification needs beta_alpha > 0");
}

double FitResult::value(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return values[i];
    throw DomainError("no fitted parameter named " + std::string(name));
}

double FitResult::stderr_of(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return stderrs[i];
    throw DomainError("no fitted parameter named " + std::string(name));
}

double exp_gauss(double t, double amplitude, double tau, double sigma, double t0) {
    return amplitude * emg(t - t0, tau, sigma).value;
}

void evaluate(ModelKind kind, const ModelAux& aux, std::span<const double> p, std::span<const double> x,
              std::span<double> out) {
    if (out.size() != x.size()) throw DomainError("evaluate: output size mismatch");
    switch (kind) {
    case ModelKind::lorentzian: {
        require_size(p, 4, kind);
        const double hw = 0.5 * p[1];
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = x[i] - p[0];
            out[i] = p[3] + p[2] * hw * hw / (d * d + hw * hw);
        }
        return;
    }
    case ModelKind::gaussian: {
        require_size(p, 4, kind);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = x[i] - p[0];
            out[i] = p[3] + p[2] * std::exp(-kFourLn2 * d * d / (p[1] * p[1]));
        }
        return;
    }
    case ModelKind::coupled_response: {
        require_size(p, 4, kind);
        const kernels::CoupledArgs args{0.5 * aux.kappa_fwhm, p[1], p[2] * p[2], 0.5 * p[3]};
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double probe = x[i] - p[0];
            kernels::scalar::coupled_transmission({&probe, 1}, args, out.subspan(i, 1));
        }
        return;
    }
    case ModelKind::exp_irf: {
        require_size(p, 3, kind);
        const double sigma = aux.irf_fwhm == 0.0 ? 0.0 : fwhm_to_sigma(aux.irf_fwhm);
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = p[2] + exp_gauss(x[i], p[0], p[1], sigma, aux.t0);
        return;
    }
    case ModelKind::saturation: {
        require_size(p, 2, kind);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double a = 1.0 - p[1] / (1.0 + x[i] / p[0]);
            out[i] = a * a;
        }
        return;
    }
    case ModelKind::amplification: {
        require_size(p, 2, kind);
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = amplification_gain(x[i], p[0], p[1], aux.beta_alpha);
        return;
    }
    }
}

bool has_analytic_jacobian(ModelKind kind) {
    return kind == ModelKind::lorentzian || kind == ModelKind::gaussian || kind == ModelKind::exp_irf;
}

void analytic_jacobian(ModelKind kind, const ModelAux& aux, std::span<const double> p, std::span<const double> x,
                       std::span<double> jac) {
    if (!has_analytic_jacobian(kind))
        throw DomainError(std::string(model_name(kind)) + " has no analytic Jacobian");
    const std::size_t n = parameter_names(kind).size();
    require_size(p, n, kind);
    if (jac.size() != x.size() * n) throw DomainError("analytic_jacobian: output size mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) {
        double* row = jac.data() + i * n;
        switch (kind) {
        case ModelKind::lorentzian: {
            const double hw = 0.5 * p[1];
            const double d = x[i] - p[0];
            const double den = d * d + hw * hw;
            const double shape = hw * hw / den;
            row[0] = p[2] * 2.0 * d * hw * hw / (den * den);
            row[1] = p[2] * hw * d * d / (den * den);
            row[2] = shape;
            row[3] = 1.0;
            break;
        }
        case ModelKind::gaussian: {
            const double d = x[i] - p[0];
            const double w2 = p[1] * p[1];
            const double g = std::exp(-kFourLn2 * d * d / w2);
            row[0] = p[2] * g * 2.0 * kFourLn2 * d / w2;
            row[1] = p[2] * g * 2.0 * kFourLn2 * d * d / (w2 * p[1]);
            row[2] = g;
            row[3] = 1.0;
            break;
        }
        case ModelKind::exp_irf: {
            const double sigma = aux.irf_fwhm == 0.0 ? 0.0 : fwhm_to_sigma(aux.irf_fwhm);
            const auto e = emg(x[i] - aux.t0, p[1], sigma);
            row[0] = e.value;
            row[1] = p[0] * e.d_tau;
            row[2] = 1.0;
            break;
        }
        default: break;
        }
    }
}

void finite_difference_jacobian(ModelKind kind, const ModelAux& aux, std::span<const double> params,
                                std::span<const double> scales, std::span<const double> x, std::span<double> jac) {
    const std::size_t n = params.size();
    if (scales.size() != n || jac.size() != x.size() * n)
        throw DomainError("finite_difference_jacobian: size mismatch");
    std::vector<double> p(params.begin(), params.end());
    std::vector<double> plus(x.size()), minus(x.size());
    for (std::size_t j = 0; j < n; ++j) {
        const double h = 6e-6 * std::max(std::abs(params[j]), scales[j]);
        p[j] = params[j] + h;
        evaluate(kind, aux, p, x, plus);
        p[j] = params[j] - h;
        evaluate(kind, aux, p, x, minus);
        p[j] = params[j];
        const double step = 2.0 * h;
        for (std::size_t i = 0; i < x.size(); ++i) jac[i * n + j] = (plus[i] - minus[i]) / step;
    }
}

// ---- initialization --------------------------------------------------------------------

FitModel initial_model(ModelKind kind, const Trace& data, const ModelAux& aux) {
    const auto x = data.x();
    const auto y = data.y();
    const double span = x.back() - x.front();
    const double inf = std::numeric_limits<double>::infinity();
    FitModel model{kind, {}, aux};

    switch (kind) {
    case ModelKind::lorentzian:
    case ModelKind::gaussian: {
        const auto base = edge_baseline(y);
        const double width = half_crossing_width(x, y, base.level, base.extreme);
        const double amp = y[base.extreme] - base.level;
        const double amp_scale = std::max(std::abs(amp), 1e-300);
        model.params = {{"center", x[base.extreme], -inf, inf, span},
                        {"fwhm", width, 1e-9 * span, inf, width},
                        {"amplitude", amp, -inf, inf, amp_scale},
                        {"offset", base.level, -inf, inf, std::max(std::abs(base.level), amp_scale)}};
        break;
    }
    case ModelKind::coupled_response: {
        if (!(aux.kappa_fwhm > 0.0)) throw DomainError("coupled_response needs kappa_fwhm > 0");
        const auto base = edge_baseline(y);
        const auto [lo_it, hi_it] = std::minmax_element(y.begin(), y.end());
        const auto i_min = static_cast<std::size_t>(lo_it - y.begin());
        const auto i_max = static_cast<std::size_t>(hi_it - y.begin());
        const double below = base.level - *lo_it;
        const double above = *hi_it - base.level;
        double center = x[base.extreme];
        double width = half_crossing_width(x, y, base.level, base.extreme);
        if (std::min(above, below) > 0.2 * std::max(above, below)) {
            center = 0.5 * (x[i_min] + x[i_max]);
            width = std::abs(x[i_max] - x[i_min]);
        }
        const double depth = std::clamp(below, 0.01, 0.99);
        const double coop = 1.0 / std::sqrt(1.0 - depth) - 1.0;
        const double gamma = width / (1.0 + coop);
        const double g = std::sqrt(coop * aux.kappa_fwhm * gamma / 4.0);
        model.params = {{"center", center, -inf, inf, std::max(width, 1e-12 * aux.kappa_fwhm)},
                        {"cavity_detuning", 0.25 * aux.kappa_fwhm, -inf, inf, aux.kappa_fwhm},
                        {"g", g, 0.0, inf, g},
                        {"gamma", gamma, 1e-9 * gamma, inf, gamma}};
        // Coarse scan of the cavity detuning with the other parameters held.
        std::vector<double> trial(4), f(y.size());
        double best_cost = inf;
        for (int k = 1; k <= 15; ++k) {
            trial = {center, 0.1 * k * aux.kappa_fwhm, g, gamma};
            evaluate(kind, aux, trial, x, f);
            double cost = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) cost += (y[i] - f[i]) * (y[i] - f[i]);
            trial[1] = -trial[1];
            evaluate(kind, aux, trial, x, f);
            double mirrored = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) mirrored += (y[i] - f[i]) * (y[i] - f[i]);
            const double c = std::min(cost, mirrored);
            if (c < best_cost) {
                best_cost = c;
                model.params[1].initial = cost <= mirrored ? -trial[1] : trial[1];
            }
        }
        break;
    }
    case ModelKind::exp_irf: {
        std::size_t pre = 0;
        double pre_sum = 0.0;
        for (std::size_t i = 0; i < x.size() && x[i] < aux.t0; ++i, ++pre) pre_sum += y[i];
        double offset;
        if (pre >= 3) {
            offset = pre_sum / static_cast<double>(pre);
        } else {
            const std::size_t tail = std::max<std::size_t>(1, y.size() / 20);
            offset = *std::min_element(y.end() - static_cast<std::ptrdiff_t>(tail), y.end());
        }
        const auto peak = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
        const double amp = y[peak] - offset;
        double tau = span / 4.0;
        for (std::size_t i = peak; i < y.size(); ++i) {
            if (y[i] - offset < amp / std::numbers::e) {
                tau = std::max(x[i] - std::max(x[peak], aux.t0), 1e-3 * span);
                break;
            }
        }
        const double amp_scale = std::max(std::abs(amp), 1e-300);
        model.params = {{"amplitude", amp, -inf, inf, amp_scale},
                        {"tau", tau, 1e-9 * tau, inf, tau},
                        {"offset", offset, -inf, inf, std::max(std::abs(offset), amp_scale)}};
        break;
    }
    case ModelKind::saturation: {
        if (!(x.front() >= 0.0)) throw DomainError("saturation data needs photon flux >= 0");
        const double ba = std::clamp(1.0 - std::sqrt(std::max(y.front(), 0.0)), 1e-6, 1.0);
        // S = 1 where sqrt(T) = 1 - ba / 2
        const double target = 1.0 - 0.5 * ba;
        double n_crit = x[x.size() / 2];
        for (std::size_t i = 1; i < x.size(); ++i) {
            if (std::sqrt(std::max(y[i], 0.0)) >= target) {
                n_crit = std::max(x[i], 1e-6 * std::max(x.back(), 1.0));
                break;
            }
        }
        model.params = {{"n_crit", n_crit, 1e-9 * n_crit, inf, n_crit}, {"beta_alpha", ba, 0.0, 1.0, 0.1}};
        break;
    }
    case ModelKind::amplification: {
        if (!(aux.beta_alpha > 0.0)) throw DomainError("amplification needs beta_alpha > 0");
        const auto peak = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
        double zero = 0.0;
        for (std::size_t i = 1; i <= peak; ++i) {
            if (y[i - 1] < 0.0 && y[i] >= 0.0) {
                zero = x[i - 1] + (x[i] - x[i - 1]) * y[i - 1] / (y[i - 1] - y[i]);
                break;
            }
        }
        double scale;
        double dephasing = 0.0;
        if (zero > 0.0) {
            scale = 1.0 / zero;
            const double r = scale * x[peak];
            dephasing = std::max(0.0, 0.25 * (r - 1.0) * (r - 1.0) - 1.0);
        } else {
            scale = 3.0 / std::max(x[peak], 1e-300);
        }
        model.params = {{"pump_scale", scale, 1e-9 * scale, inf, scale},
                        {"dephasing_ratio", dephasing, 0.0, inf, 1.0}};
        break;
    }
    }
    return model;
}

// ---- optimizer ---------------------------------------------------------------------------

namespace {

struct Problem {
    ModelKind kind;
    ModelAux aux;
    std::span<const double> x;
    std::span<const double> y;
    std::vector<double> weight;
    std::vector<double> scales;
    bool analytic;
};

double weighted_cost(const Problem& pr, std::span<const double> p, std::vector<double>& f) {
    evaluate(pr.kind, pr.aux, p, pr.x, f);
    double cost = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double r = (pr.y[i] - f[i]) * pr.weight[i];
        cost += r * r;
    }
    return cost;
}

void weighted_jacobian(const Problem& pr, std::span<const double> p, Eigen::MatrixXd& jac) {
    const std::size_t n = p.size();
    std::vector<double> raw(pr.x.size() * n);
    if (pr.analytic && has_analytic_jacobian(pr.kind))
        analytic_jacobian(pr.kind, pr.aux, p, pr.x, raw);
    else
        finite_difference_jacobian(pr.kind, pr.aux, p, pr.scales, pr.x, raw);
    jac.resize(static_cast<Eigen::Index>(pr.x.size()), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < pr.x.size(); ++i)
        for (std::size_t j = 0; j < n; ++j)
            jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = raw[i * n + j] * pr.weight[i];
}

FitResult solve(const FitModel& model, const Problem& pr, const FitOptions& options) {
    const std::size_t n = model.params.size();
    const auto m = static_cast<Eigen::Index>(pr.x.size());
    std::vector<double> p(n), lower(n), upper(n);
    FitResult result;
    for (std::size_t j = 0; j < n; ++j) {
        p[j] = model.params[j].initial;
        lower[j] = model.params[j].lower;
        upper[j] = model.params[j].upper;
        result.names.push_back(model.params[j].name);
    }

    double data_norm = 0.0;
    for (std::size_t i = 0; i < pr.y.size(); ++i) data_norm += pr.y[i] * pr.y[i] * pr.weight[i] * pr.weight[i];
    const double exact_floor = 1e-28 * std::max(data_norm, 1e-300);

    std::vector<double> f(pr.x.size()), trial_f(pr.x.size()), trial(n);
    double cost = weighted_cost(pr, p, f);
    if (!std::isfinite(cost)) throw DomainError("model is not finite at the initial parameters");
    result.cost_history.push_back(cost);

    Eigen::MatrixXd jac;
    Eigen::VectorXd resid(m);
    double lambda = 1e-3;
    bool done = false;
    for (int iter = 0; iter < options.max_iterations && !done; ++iter) {
        result.iterations = iter + 1;
        if (cost <= exact_floor) {
            result.converged = true;
            result.message = "exact fit";
            break;
        }
        weighted_jacobian(pr, p, jac);
        for (Eigen::Index i = 0; i < m; ++i)
            resid(i) = (pr.y[static_cast<std::size_t>(i)] - f[static_cast<std::size_t>(i)]) *
                       pr.weight[static_cast<std::size_t>(i)];
        const Eigen::MatrixXd normal = jac.transpose() * jac;
        const Eigen::VectorXd grad = jac.transpose() * resid;
        Eigen::VectorXd diag = normal.diagonal();
        for (Eigen::Index j = 0; j < diag.size(); ++j) diag(j) = std::max(diag(j), 1e-300);

        // Gradient scaled by the column norms has the units of a residual.
        double scaled_grad = 0.0;
        for (Eigen::Index j = 0; j < grad.size(); ++j)
            scaled_grad = std::max(scaled_grad, std::abs(grad(j)) / std::sqrt(diag(j)));
        if (scaled_grad < options.grad_tol * std::sqrt(std::max(data_norm, 1e-300))) {
            result.converged = true;
            result.message = "gradient below tolerance";
            break;
        }

        bool accepted = false;
        while (!accepted) {
            Eigen::MatrixXd damped = normal;
            damped.diagonal() += lambda * diag;
            Eigen::LDLT<Eigen::MatrixXd> ldlt(damped);
            Eigen::VectorXd step;
            bool ok = ldlt.info() == Eigen::Success;
            if (ok) {
                step = ldlt.solve(grad);
                ok = step.allFinite();
            }
            if (ok) {
                for (std::size_t j = 0; j < n; ++j)
                    trial[j] = std::clamp(p[j] + step(static_cast<Eigen::Index>(j)), lower[j], upper[j]);
                const double trial_cost = weighted_cost(pr, trial, trial_f);
                if (std::isfinite(trial_cost) && trial_cost < cost) {
                    const double rel = (cost - trial_cost) / cost;
                    p = trial;
                    f.swap(trial_f);
                    cost = trial_cost;
                    result.cost_history.push_back(cost);
                    lambda = std::max(lambda / 10.0, 1e-12);
                    accepted = true;
                    if (rel < options.rel_cost_tol) {
                        result.converged = true;
                        result.message = "relative cost change below tolerance";
                        done = true;
                    }
                    break;
                }
            }
            lambda *= 10.0;
            if (lambda > 1e16) {
                // No descent direction left. That is a minimum only if the gradient
                // is negligible against the residual; otherwise the problem is singular.
                const double residual_norm = std::sqrt(cost);
                result.converged = scaled_grad <= 1e-6 * residual_norm || cost <= exact_floor;
                result.message = result.converged ? "no further descent at minimum"
                                                  : "damping escalation failed (singular or ill-conditioned)";
                done = true;
                break;
            }
        }
    }
    if (!done && !result.converged && result.message.empty()) result.message = "iteration limit reached";

    result.values = p;
    result.rss = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) result.rss += (pr.y[i] - f[i]) * (pr.y[i] - f[i]);

    // Covariance from the Jacobian at the optimum.
    weighted_jacobian(pr, p, jac);
    // Column-equilibrated so the rank test is independent of parameter units.
    Eigen::VectorXd col_norm = jac.colwise().norm().transpose();
    for (Eigen::Index j = 0; j < col_norm.size(); ++j)
        if (!(col_norm(j) > 0.0)) col_norm(j) = 1.0;
    const Eigen::MatrixXd scaled = jac * col_norm.cwiseInverse().asDiagonal();
    const Eigen::MatrixXd normal = scaled.transpose() * scaled;
    const double dof = static_cast<double>(pr.x.size() - n);
    const bool weighted = std::any_of(pr.weight.begin(), pr.weight.end(), [](double w) { return w != 1.0; });
    const double s2 = weighted ? 1.0 : cost / dof;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(normal);
    result.stderrs.assign(n, std::numeric_limits<double>::infinity());
    if (lu.isInvertible()) {
        const Eigen::MatrixXd cov = lu.inverse() * s2;
        for (std::size_t j = 0; j < n; ++j) {
            const auto k = static_cast<Eigen::Index>(j);
            const double v = cov(k, k) / (col_norm(k) * col_norm(k));
            result.stderrs[j] = v >= 0.0 ? std::sqrt(v) : std::numeric_limits<double>::infinity();
        }
    }
    return result;
}

} // namespace

FitResult fit(const FitModel& model, const Trace& data, std::span<const double> sigma, const FitOptions& options) {
    model.validate();
    const std::size_t n = model.params.size();
    if (data.size() < n + 2)
        throw DomainError("fit needs at least " + std::to_string(n + 2) + " samples, got " +
                          std::to_string(data.size()));
    Problem pr{model.kind, model.aux, data.x(), data.y(), std::vector<double>(data.size(), 1.0), {},
               options.analytic_jacobian};
    if (!sigma.empty()) {
        if (sigma.size() != data.size()) throw DomainError("sigma must have one entry per sample");
        for (std::size_t i = 0; i < sigma.size(); ++i) {
            if (!(sigma[i] > 0.0)) throw DomainError("sigma entries must be > 0");
            pr.weight[i] = 1.0 / sigma[i];
        }
    }
    for (const auto& p : model.params) pr.scales.push_back(p.scale);

    if (model.kind != ModelKind::coupled_response) return solve(model, pr, options);

    FitModel mirrored = model;
    auto& start = mirrored.params[1];
    start.initial = start.initial != 0.0 ? -start.initial : 0.25 * model.aux.kappa_fwhm;
    start.initial = std::clamp(start.initial, start.lower, start.upper);
    auto first = solve(model, pr, options);
    auto second = solve(mirrored, pr, options);
    return second.rss < first.rss ? second : first;
}

FitResult fit_decay_with_irf(const Trace& data, const dynamics::InstrumentResponse& irf, double t0) {
    irf.validate();
    ModelAux aux;
    aux.irf_fwhm = irf.fwhm;
    aux.t0 = t0;
    return fit(initial_model(ModelKind::exp_irf, data, aux), data);
}

std::vector<double> median_filter(std::span<const double> y, std::size_t window) {
    if (window == 0 || window % 2 == 0) throw DomainError("median window must be odd");
    const std::size_t half = window / 2;
    std::vector<double> out(y.size());
    std::vector<double> buf;
    buf.reserve(window);
    for (std::size_t i = 0; i < y.size(); ++i) {
        const std::size_t lo = i >= half ? i - half : 0;
        const std::size_t hi = std::min(y.size(), i + half + 1);
        buf.assign(y.begin() + static_cast<std::ptrdiff_t>(lo), y.begin() + static_cast<std::ptrdiff_t>(hi));
        const auto mid = buf.begin() + static_cast<std::ptrdiff_t>(buf.size() / 2);
        std::nth_element(buf.begin(), mid, buf.end());
        if (buf.size() % 2 == 1) {
            out[i] = *mid;
        } else {
            const double upper = *mid;
            const double lower = *std::max_element(buf.begin(), mid);
            out[i] = 0.5 * (lower + upper);
        }
    }
    return out;
}

std::size_t envelope_window(double linewidth, double sample_step) {
    if (!(linewidth > 0.0) || !(sample_step > 0.0)) throw DomainError("linewidth and sample step must be > 0");
    auto n = static_cast<std::size_t>(std::ceil(5.0 * linewidth / sample_step - 1e-9));
    n = std::max<std::size_t>(n, 3);
    return n % 2 == 0 ? n + 1 : n;
}

EnvelopeFit envelope_fit(const Trace& ensemble_trace, std::size_t median_window) {
    auto filtered = median_filter(ensemble_trace.y(), median_window);
    const Trace smooth({ensemble_trace.x().begin(), ensemble_trace.x().end()}, std::move(filtered),
                       ensemble_trace.x_axis(), ensemble_trace.y_axis());
    auto model = initial_model(ModelKind::lorentzian, smooth);
    auto result = fit(model, smooth);
    const double amp = result.value("amplitude");
    const double amp_err = result.stderr_of("amplitude");
    if (!(std::abs(amp) > 3.0 * amp_err) || amp == 0.0) {
        result.converged = false;
        result.message = "pedestal amplitude indistinguishable from zero";
    }
    return {result, std::abs(result.value("fwhm")), median_window};
}

} // namespace molcav::fitting
