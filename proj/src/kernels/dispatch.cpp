#include <atomic>
#include <cstdlib>

#include "molcav/errors.hpp"
#include "molcav/kernels.hpp"

namespace molcav::kernels {
namespace {

struct Table {
    Isa isa;
    void (*coupled_transmission)(std::span<const double>, const CoupledArgs&, std::span<double>);
    void (*lorentzian)(std::span<const double>, double, double, double, std::span<double>);
    void (*lorentzian_accumulate)(std::span<const double>, std::span<const double>, std::span<const double>,
                                  std::span<const double>, std::span<double>);
    double (*dot)(std::span<const double>, std::span<const double>);
};

constexpr Table kScalar{Isa::scalar, scalar::coupled_transmission, scalar::lorentzian,
                        scalar::lorentzian_accumulate, scalar::dot};
#if defined(MOLCAV_HAVE_AVX2_KERNELS)
constexpr Table kAvx2{Isa::avx2, avx2::coupled_transmission, avx2::lorentzian, avx2::lorentzian_accumulate,
                      avx2::dot};
#endif

const Table* detect() {
#if defined(MOLCAV_HAVE_AVX2_KERNELS)
    __builtin_cpu_init();
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return &kAvx2;
#endif
    return &kScalar;
}

std::atomic<const Table*>& current() {
    static std::atomic<const Table*> table{detect()};
    return table;
}

const Table& table() { return *current().load(std::memory_order_acquire); }

void check_sizes(std::size_t in, std::size_t out) {
    if (in != out) throw DomainError("kernel input and output lengths differ");
}

} // namespace

bool isa_supported(Isa isa) {
    switch (isa) {
    case Isa::scalar:
        return true;
    case Isa::avx2:
#if defined(MOLCAV_HAVE_AVX2_KERNELS)
        __builtin_cpu_init();
        return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
        return false;
#endif
    }
    return false;
}

Isa active_isa() { return table().isa; }

void select_isa(Isa isa) {
    if (!isa_supported(isa)) throw DomainError("instruction set not supported on this CPU: " +
                                               std::string(isa_name(isa)));
#if defined(MOLCAV_HAVE_AVX2_KERNELS)
    current().store(isa == Isa::avx2 ? &kAvx2 : &kScalar, std::memory_order_release);
#else
    current().store(&kScalar, std::memory_order_release);
#endif
}

std::string_view isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

void coupled_transmission(std::span<const double> probe_detuning, const CoupledArgs& args,
                          std::span<double> out) {
    check_sizes(probe_detuning.size(), out.size());
    table().coupled_transmission(probe_detuning, args, out);
}

void lorentzian(std::span<const double> x, double center, double hwhm, double peak, std::span<double> out) {
    check_sizes(x.size(), out.size());
    table().lorentzian(x, center, hwhm, peak, out);
}

void lorentzian_accumulate(std::span<const double> x, std::span<const double> center,
                           std::span<const double> hwhm, std::span<const double> peak, std::span<double> out) {
    check_sizes(x.size(), out.size());
    if (hwhm.size() != center.size() || peak.size() != center.size())
        throw DomainError("lorentzian_accumulate: parameter arrays differ in length");
    table().lorentzian_accumulate(x, center, hwhm, peak, out);
}

double dot(std::span<const double> a, std::span<const double> b) {
    check_sizes(a.size(), b.size());
    return table().dot(a, b);
}

} // namespace molcav::kernels
