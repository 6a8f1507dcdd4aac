// Reference kernels. Plain loops, no contraction tricks; the SIMD variants are
// tested against these.

#include "molcav/kernels.hpp"

namespace molcav::kernels::scalar {

void coupled_transmission(std::span<const double> probe_detuning, const CoupledArgs& a,
                          std::span<double> out) {
    const double k = a.half_kappa;
    for (std::size_t i = 0; i < probe_detuning.size(); ++i) {
        const double dm = probe_detuning[i];
        const double dc = dm - a.cavity_detuning;
        // g2 / (gamma2 + i dm) = g2 (gamma2 - i dm) / (gamma2^2 + dm^2)
        const double inv = a.g2_eff / (a.gamma2 * a.gamma2 + dm * dm);
        const double qr = a.gamma2 * inv;
        const double qi = -dm * inv;
        const double den_r = k + qr;
        const double den_i = dc + qi;
        out[i] = (k * k + dc * dc) / (den_r * den_r + den_i * den_i);
    }
}

void lorentzian(std::span<const double> x, double center, double hwhm, double peak, std::span<double> out) {
    const double inv_w = 1.0 / hwhm;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double u = (x[i] - center) * inv_w;
        out[i] = peak / (1.0 + u * u);
    }
}

void lorentzian_accumulate(std::span<const double> x, std::span<const double> center,
                           std::span<const double> hwhm, std::span<const double> peak, std::span<double> out) {
    for (std::size_t m = 0; m < center.size(); ++m) {
        const double c = center[m];
        const double inv_w = 1.0 / hwhm[m];
        const double h = peak[m];
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double u = (x[i] - c) * inv_w;
            out[i] += h / (1.0 + u * u);
        }
    }
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

} // namespace molcav::kernels::scalar
