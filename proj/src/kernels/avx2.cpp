// AVX2 + FMA kernels. Functions carry target attributes instead of the whole
// translation unit being built with -mavx2, so no AVX2 code can leak into
// inline functions shared with the rest of the library.

#include "molcav/kernels.hpp"

#if defined(MOLCAV_HAVE_AVX2_KERNELS)

#include <immintrin.h>

#define MOLCAV_AVX2 __attribute__((target("avx2,fma")))

namespace molcav::kernels::avx2 {

MOLCAV_AVX2 void coupled_transmission(std::span<const double> probe_detuning, const CoupledArgs& a,
                                      std::span<double> out) {
    const std::size_t n = probe_detuning.size();
    const double* x = probe_detuning.data();
    double* y = out.data();

    const __m256d k = _mm256_set1_pd(a.half_kappa);
    const __m256d k2 = _mm256_set1_pd(a.half_kappa * a.half_kappa);
    const __m256d delta = _mm256_set1_pd(a.cavity_detuning);
    const __m256d g2 = _mm256_set1_pd(a.g2_eff);
    const __m256d gam = _mm256_set1_pd(a.gamma2);
    const __m256d gam2 = _mm256_set1_pd(a.gamma2 * a.gamma2);

    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d dm = _mm256_loadu_pd(x + i);
        const __m256d dc = _mm256_sub_pd(dm, delta);
        const __m256d inv = _mm256_div_pd(g2, _mm256_fmadd_pd(dm, dm, gam2));
        const __m256d qr = _mm256_mul_pd(gam, inv);
        const __m256d den_r = _mm256_add_pd(k, qr);
        const __m256d den_i = _mm256_fnmadd_pd(dm, inv, dc);  // dc - dm * inv
        const __m256d num = _mm256_fmadd_pd(dc, dc, k2);
        const __m256d den = _mm256_fmadd_pd(den_i, den_i, _mm256_mul_pd(den_r, den_r));
        _mm256_storeu_pd(y + i, _mm256_div_pd(num, den));
    }
    if (i < n) scalar::coupled_transmission(probe_detuning.subspan(i), a, out.subspan(i));
}

MOLCAV_AVX2 void lorentzian(std::span<const double> x, double center, double hwhm, double peak,
                            std::span<double> out) {
    const std::size_t n = x.size();
    const double inv_w = 1.0 / hwhm;
    const __m256d c = _mm256_set1_pd(center);
    const __m256d iw = _mm256_set1_pd(inv_w);
    const __m256d h = _mm256_set1_pd(peak);
    const __m256d one = _mm256_set1_pd(1.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d u = _mm256_mul_pd(_mm256_sub_pd(_mm256_loadu_pd(x.data() + i), c), iw);
        _mm256_storeu_pd(out.data() + i, _mm256_div_pd(h, _mm256_add_pd(one, _mm256_mul_pd(u, u))));
    }
    if (i < n) scalar::lorentzian(x.subspan(i), center, hwhm, peak, out.subspan(i));
}

MOLCAV_AVX2 void lorentzian_accumulate(std::span<const double> x, std::span<const double> center,
                                       std::span<const double> hwhm, std::span<const double> peak,
                                       std::span<double> out) {
    const std::size_t n = x.size();
    const std::size_t body = n - n % 4;
    const __m256d one = _mm256_set1_pd(1.0);
    for (std::size_t m = 0; m < center.size(); ++m) {
        const __m256d c = _mm256_set1_pd(center[m]);
        const __m256d iw = _mm256_set1_pd(1.0 / hwhm[m]);
        const __m256d h = _mm256_set1_pd(peak[m]);
        for (std::size_t i = 0; i < body; i += 4) {
            const __m256d u = _mm256_mul_pd(_mm256_sub_pd(_mm256_loadu_pd(x.data() + i), c), iw);
            const __m256d term = _mm256_div_pd(h, _mm256_add_pd(one, _mm256_mul_pd(u, u)));
            _mm256_storeu_pd(out.data() + i, _mm256_add_pd(_mm256_loadu_pd(out.data() + i), term));
        }
    }
    if (body < n) scalar::lorentzian_accumulate(x.subspan(body), center, hwhm, peak, out.subspan(body));
}

MOLCAV_AVX2 double dot(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = a.size();
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + i), _mm256_loadu_pd(b.data() + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + i + 4), _mm256_loadu_pd(b.data() + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + i), _mm256_loadu_pd(b.data() + i), acc0);
    const __m256d acc = _mm256_add_pd(acc0, acc1);
    const __m128d lo = _mm256_castpd256_pd128(acc);
    const __m128d hi = _mm256_extractf128_pd(acc, 1);
    const __m128d pair = _mm_add_pd(lo, hi);
    double s = _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

} // namespace molcav::kernels::avx2

#endif
