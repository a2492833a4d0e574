// AVX2 elementwise kernels. These match the scalar reference bit for bit:
// every multiply and add is written as a separate, separately rounded
// intrinsic, and this TU is compiled with -ffp-contract=off because the
// compiler is otherwise entitled to fuse a mul/add intrinsic pair into an
// FMA (GCC lowers the intrinsics to generic vector ops before optimizing).

#if defined(__x86_64__) || defined(_M_X64)

#include "kernels_avx2_internal.hpp"

#include <immintrin.h>

namespace rseed::kernels::avx2ew {

void a_vadd(const float* a, const float* b, float* out, size_t n) {
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}
void a_vsub(const float* a, const float* b, float* out, size_t n) {
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_sub_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) out[i] = a[i] - b[i];
}
void a_vmul(const float* a, const float* b, float* out, size_t n) {
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}
void a_vdiv(const float* a, const float* b, float* out, size_t n) {
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_div_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) out[i] = a[i] / b[i];
}
void a_vacc(float* y, const float* x, size_t n) {
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i), _mm256_loadu_ps(x + i)));
    for (; i < n; ++i) y[i] += x[i];
}
void a_vaxpy(float* y, const float* x, float a, size_t n) {
    // y + a*x with separate mul and add, matching the scalar reference
    const __m256 av = _mm256_set1_ps(a);
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 prod = _mm256_mul_ps(av, _mm256_loadu_ps(x + i));
        _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i), prod));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}
void a_vmulacc(float* y, const float* a, const float* b, size_t n) {
    // separate mul and add so the per-element rounding matches the reference
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 prod = _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i));
        _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i), prod));
    }
    for (; i < n; ++i) y[i] += a[i] * b[i];
}
void a_lrelu(const float* x, float slope, float* out, size_t n) {
    const __m256 sv = _mm256_set1_ps(slope);
    const __m256 zero = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 v = _mm256_loadu_ps(x + i);
        __m256 mask = _mm256_cmp_ps(v, zero, _CMP_GT_OQ);
        _mm256_storeu_ps(out + i, _mm256_blendv_ps(_mm256_mul_ps(sv, v), v, mask));
    }
    for (; i < n; ++i) out[i] = x[i] > 0.0f ? x[i] : slope * x[i];
}
void a_lrelu_bwd(const float* x, const float* g, float slope, float* gin, size_t n) {
    const __m256 sv = _mm256_set1_ps(slope);
    const __m256 zero = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 xv = _mm256_loadu_ps(x + i);
        __m256 gv = _mm256_loadu_ps(g + i);
        __m256 mask = _mm256_cmp_ps(xv, zero, _CMP_GT_OQ);
        __m256 contrib = _mm256_blendv_ps(_mm256_mul_ps(sv, gv), gv, mask);
        _mm256_storeu_ps(gin + i, _mm256_add_ps(_mm256_loadu_ps(gin + i), contrib));
    }
    for (; i < n; ++i) gin[i] += x[i] > 0.0f ? g[i] : slope * g[i];
}
void a_sigmoid_bwd(const float* out, const float* g, float* gin, size_t n) {
    const __m256 one = _mm256_set1_ps(1.0f);
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 ov = _mm256_loadu_ps(out + i);
        __m256 t = _mm256_mul_ps(_mm256_loadu_ps(g + i), ov);
        t = _mm256_mul_ps(t, _mm256_sub_ps(one, ov));
        _mm256_storeu_ps(gin + i, _mm256_add_ps(_mm256_loadu_ps(gin + i), t));
    }
    for (; i < n; ++i) gin[i] += g[i] * out[i] * (1.0f - out[i]);
}
void a_dup2(const float* x, float* out, size_t n) {
    const __m256i lo = _mm256_setr_epi32(0, 0, 1, 1, 2, 2, 3, 3);
    const __m256i hi = _mm256_setr_epi32(4, 4, 5, 5, 6, 6, 7, 7);
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 v = _mm256_loadu_ps(x + i);
        _mm256_storeu_ps(out + 2 * i, _mm256_permutevar8x32_ps(v, lo));
        _mm256_storeu_ps(out + 2 * i + 8, _mm256_permutevar8x32_ps(v, hi));
    }
    for (; i < n; ++i) {
        out[2 * i] = x[i];
        out[2 * i + 1] = x[i];
    }
}
void a_fold2(const float* g, float* y, size_t n) {
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        // deinterleave 16 inputs into even/odd lanes, add pairwise
        __m256 v0 = _mm256_loadu_ps(g + 2 * i);
        __m256 v1 = _mm256_loadu_ps(g + 2 * i + 8);
        __m256 ev = _mm256_shuffle_ps(v0, v1, _MM_SHUFFLE(2, 0, 2, 0));
        __m256 od = _mm256_shuffle_ps(v0, v1, _MM_SHUFFLE(3, 1, 3, 1));
        __m256 s = _mm256_add_ps(ev, od);
        s = _mm256_castpd_ps(_mm256_permute4x64_pd(_mm256_castps_pd(s), _MM_SHUFFLE(3, 1, 2, 0)));
        _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i), s));
    }
    for (; i < n; ++i) y[i] += g[2 * i] + g[2 * i + 1];
}

} // namespace rseed::kernels::avx2ew

#endif
