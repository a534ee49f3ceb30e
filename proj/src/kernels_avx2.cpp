#include "sparsebound/simd.hpp"

// AVX2 kernels. Compiled with -mavx2 in its own translation unit; the
// dispatcher only calls into this table after a cpuid check. Multiplies and
// adds are kept as separate intrinsics (no FMA) so results match the scalar
// reference bit-for-bit.

#if defined(__AVX2__) && (defined(__x86_64__) || defined(_M_X64))

#include <immintrin.h>

#include <cstdint>

namespace sparsebound::simd {
namespace {

inline __m256i tail_mask(std::size_t r) {
    // r in 1..3: lanes < r active
    alignas(32) std::int64_t m[4] = {0, 0, 0, 0};
    for (std::size_t j = 0; j < r; ++j) m[j] = -1;
    return _mm256_load_si256(reinterpret_cast<const __m256i*>(m));
}

inline double reduce_halves(__m256d acc) {
    // (l0+l2, l1+l3) then horizontal add -> (l0+l2)+(l1+l3)
    const __m128d lo = _mm256_castpd256_pd128(acc);
    const __m128d hi = _mm256_extractf128_pd(acc, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(s) + _mm_cvtsd_f64(_mm_unpackhi_pd(s, s));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d va = _mm256_loadu_pd(a + i);
        const __m256d vb = _mm256_loadu_pd(b + i);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(va, vb));
    }
    if (i < n) {
        const __m256i mask = tail_mask(n - i);
        const __m256d va = _mm256_maskload_pd(a + i, mask);
        const __m256d vb = _mm256_maskload_pd(b + i, mask);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(va, vb));
    }
    return reduce_halves(acc);
}

double norm_sq_avx2(const double* x, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d v = _mm256_loadu_pd(x + i);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(v, v));
    }
    if (i < n) {
        const __m256d v = _mm256_maskload_pd(x + i, tail_mask(n - i));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(v, v));
    }
    return reduce_halves(acc);
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vy = _mm256_loadu_pd(y + i);
        const __m256d vx = _mm256_loadu_pd(x + i);
        _mm256_storeu_pd(y + i, _mm256_add_pd(vy, _mm256_mul_pd(va, vx)));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void scale_avx2(double* x, double a, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(x + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), va));
    }
    for (; i < n; ++i) x[i] *= a;
}

void relu_avx2(const double* x, double* y, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        // max(x, +0) returns +0 for x <= 0, matching the scalar branch
        _mm256_storeu_pd(y + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
    }
    for (; i < n; ++i) y[i] = (x[i] > 0.0) ? x[i] : 0.0;
}

void relu_grad_accum_avx2(const double* pre, const double* g, double* y, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(pre + i), zero, _CMP_GT_OQ);
        const __m256d gm = _mm256_and_pd(_mm256_loadu_pd(g + i), mask);
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), gm));
    }
    for (; i < n; ++i) y[i] += (pre[i] > 0.0) ? g[i] : 0.0;
}

}  // namespace

const KernelTable* avx2_kernels() {
    static const KernelTable table{dot_avx2,  norm_sq_avx2, axpy_avx2,
                                   scale_avx2, relu_avx2,    relu_grad_accum_avx2};
    return &table;
}

}  // namespace sparsebound::simd

#else

namespace sparsebound::simd {
const KernelTable* avx2_kernels() { return nullptr; }
}  // namespace sparsebound::simd

#endif
