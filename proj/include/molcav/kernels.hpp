#pragma once

// Data-parallel inner loops of the frequency-domain models.
//
// Each kernel has a scalar reference implementation and, on x86-64, an
// AVX2+FMA variant. The variant is chosen once at runtime from CPUID and can be
// overridden (tests pin each ISA and compare against the reference).

#include <span>
#include <string_view>

namespace molcav::kernels {

enum class Isa { scalar, avx2 };

/// Arguments of the coupled cavity-emitter amplitude ratio. All in Hz.
struct CoupledArgs {
    double half_kappa;       ///< kappa / 2
    double cavity_detuning;  ///< cavity center minus zero-phonon line
    double g2_eff;           ///< g^2 / (1 + S)
    double gamma2;           ///< coherence decay (HWHM), > 0
};

/// out[i] = |t(x_i)/t_bare(x_i)|^2 where x_i is the probe detuning from the
/// zero-phonon line and
///   t/t_bare = (k + i dc) / (k + i dc + g2 / (gamma2 + i dm)),  dc = x - cavity_detuning, dm = x.
void coupled_transmission(std::span<const double> probe_detuning, const CoupledArgs& args,
                          std::span<double> out);

/// out[i] = peak / (1 + ((x_i - center) / hwhm)^2)
void lorentzian(std::span<const double> x, double center, double hwhm, double peak, std::span<double> out);

/// out[i] += sum_m peak[m] / (1 + ((x_i - center[m]) / hwhm[m])^2), molecules summed in order.
void lorentzian_accumulate(std::span<const double> x, std::span<const double> center,
                           std::span<const double> hwhm, std::span<const double> peak, std::span<double> out);

double dot(std::span<const double> a, std::span<const double> b);

// ---- dispatch ----------------------------------------------------------------

bool isa_supported(Isa isa);
Isa active_isa();
/// Forces an ISA (throws DomainError if unsupported). Not thread-safe against
/// concurrent kernel calls; intended for tests and benchmarks.
void select_isa(Isa isa);
std::string_view isa_name(Isa isa);

namespace scalar {
void coupled_transmission(std::span<const double>, const CoupledArgs&, std::span<double>);
void lorentzian(std::span<const double>, double, double, double, std::span<double>);
void lorentzian_accumulate(std::span<const double>, std::span<const double>, std::span<const double>,
                           std::span<const double>, std::span<double>);
double dot(std::span<const double>, std::span<const double>);
} // namespace scalar

#if defined(MOLCAV_HAVE_AVX2_KERNELS)
namespace avx2 {
void coupled_transmission(std::span<const double>, const CoupledArgs&, std::span<double>);
void lorentzian(std::span<const double>, double, double, double, std::span<double>);
void lorentzian_accumulate(std::span<const double>, std::span<const double>, std::span<const double>,
                           std::span<const double>, std::span<double>);
double dot(std::span<const double>, std::span<const double>);
} // namespace avx2
#endif

} // namespace molcav::kernels
