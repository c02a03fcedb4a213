// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include "bpl/kernels.hpp"

#include <cstddef>
#include <immintrin.h>

namespace bpl::kernels::avx2 {

namespace {

// Two complex numbers per register: [re0, im0, re1, im1].
inline __m256d load2(const cplx* p) { return _mm256_loadu_pd(reinterpret_cast<const double*>(p)); }
inline void store2(cplx* p, __m256d v) { _mm256_storeu_pd(reinterpret_cast<double*>(p), v); }

inline __m256d cmul2(__m256d a, __m256d b)
{
    __m256d are = _mm256_movedup_pd(a);          // [ar0, ar0, ar1, ar1]
    __m256d aim = _mm256_permute_pd(a, 0xF);     // [ai0, ai0, ai1, ai1]
    __m256d bsw = _mm256_permute_pd(b, 0x5);     // [bi0, br0, bi1, br1]
    return _mm256_fmaddsub_pd(are, b, _mm256_mul_pd(aim, bsw));
}

inline double hsum(__m256d v)
{
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

} // namespace

double weighted_sumsq(std::span<const double> w, std::span<const cplx> z)
{
    const std::size_t n = z.size();
    std::size_t i = 0;
    __m256d acc = _mm256_setzero_pd();
    for (; i + 2 <= n; i += 2) {
        __m256d v = load2(&z[i]);
        __m256d sq = _mm256_mul_pd(v, v);
        __m128d wv = _mm_loadu_pd(&w[i]);
        __m256d ww = _mm256_permute4x64_pd(_mm256_castpd128_pd256(wv), 0x50); // [w0,w0,w1,w1]
        acc = _mm256_fmadd_pd(ww, sq, acc);
    }
    double s = hsum(acc);
    for (; i < n; ++i)
        s += w[i] * std::norm(z[i]);
    return s;
}

void advect(std::span<const double> u1, std::span<const double> u2, std::span<const double> g1,
            std::span<const double> g2, std::span<double> out)
{
    const std::size_t n = out.size();
    std::size_t i = 0;
    const __m256d zero = _mm256_setzero_pd();
    for (; i + 4 <= n; i += 4) {
        __m256d p = _mm256_mul_pd(_mm256_loadu_pd(&u1[i]), _mm256_loadu_pd(&g1[i]));
        p = _mm256_fmadd_pd(_mm256_loadu_pd(&u2[i]), _mm256_loadu_pd(&g2[i]), p);
        _mm256_storeu_pd(&out[i], _mm256_sub_pd(zero, p));
    }
    for (; i < n; ++i)
        out[i] = -(u1[i] * g1[i] + u2[i] * g2[i]);
}

void cmul_inplace(std::span<const cplx> a, std::span<cplx> y)
{
    const std::size_t n = y.size();
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        store2(&y[i], cmul2(load2(&a[i]), load2(&y[i])));
    for (; i < n; ++i)
        y[i] *= a[i];
}

void caxpy(cplx a, std::span<const cplx> x, std::span<cplx> y)
{
    const std::size_t n = y.size();
    std::size_t i = 0;
    const __m256d av = _mm256_setr_pd(a.real(), a.imag(), a.real(), a.imag());
    for (; i + 2 <= n; i += 2)
        store2(&y[i], _mm256_add_pd(load2(&y[i]), cmul2(av, load2(&x[i]))));
    for (; i < n; ++i)
        y[i] += a * x[i];
}

} // namespace bpl::kernels::avx2
