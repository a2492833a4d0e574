// AVX2+FMA convolution kernels and the AVX2 ops table. This TU is compiled
// with -mavx2 -mfma and the table is handed out only after a runtime CPU
// check, so sneaking AVX code into other TUs through inlining is not a
// concern.
//
// The elementwise kernels (bit-exact against the scalar reference) live in
// kernels_avx2_elementwise.cpp, which is compiled with -ffp-contract=off.
// The conv kernels here use FMA and (for wgrad) lane-wise partial sums, so
// they match the reference within tolerance only, and this TU keeps default
// contraction for its transform and tail arithmetic.

#if defined(__x86_64__) || defined(_M_X64)

#include "kernels_avx2_internal.hpp"
#include "kernels_detail.hpp"

#include <immintrin.h>

#include <vector>

namespace rseed::kernels {
namespace {

inline float hsum8(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    lo = _mm_add_ps(lo, _mm_movehl_ps(lo, lo));
    lo = _mm_add_ss(lo, _mm_shuffle_ps(lo, lo, 1));
    return _mm_cvtss_f32(lo);
}

// 3x3 fast path: per (o,i) the nine weight broadcasts are hoisted out of the
// spatial loops and the output plane doubles as the accumulator. Rows are
// processed 32 outputs at a time with four independent accumulators so the
// nine-deep FMA chains of neighbouring blocks overlap instead of serializing.
void conv3x3(const float* in, const float* w, const float* bias, float* out,
             int ic, int ih, int iw, int oc0, int oc1) {
    const int oh = ih - 2;
    const int ow = iw - 2;
    const int ow8 = ow & ~7;
    const int ow32 = ow & ~31;
    for (int o = oc0; o < oc1; ++o) {
        float* op = out + static_cast<size_t>(o) * oh * ow;
        const float b = bias ? bias[o] : 0.0f;
        const __m256 bv = _mm256_set1_ps(b);
        for (int y = 0; y < oh; ++y) {
            float* row = op + static_cast<size_t>(y) * ow;
            int x = 0;
            for (; x < ow8; x += 8) _mm256_storeu_ps(row + x, bv);
            for (; x < ow; ++x) row[x] = b;
        }
        for (int i = 0; i < ic; ++i) {
            const float* wp = w + (static_cast<size_t>(o) * ic + i) * 9;
            __m256 w00 = _mm256_set1_ps(wp[0]), w01 = _mm256_set1_ps(wp[1]), w02 = _mm256_set1_ps(wp[2]);
            __m256 w10 = _mm256_set1_ps(wp[3]), w11 = _mm256_set1_ps(wp[4]), w12 = _mm256_set1_ps(wp[5]);
            __m256 w20 = _mm256_set1_ps(wp[6]), w21 = _mm256_set1_ps(wp[7]), w22 = _mm256_set1_ps(wp[8]);
            const float* ip = in + static_cast<size_t>(i) * ih * iw;
            for (int y = 0; y < oh; ++y) {
                const float* r0 = ip + static_cast<size_t>(y) * iw;
                const float* r1 = r0 + iw;
                const float* r2 = r1 + iw;
                float* orow = op + static_cast<size_t>(y) * ow;
                int x = 0;
                for (; x < ow32; x += 32) {
                    __m256 a0 = _mm256_loadu_ps(orow + x);
                    __m256 a1 = _mm256_loadu_ps(orow + x + 8);
                    __m256 a2 = _mm256_loadu_ps(orow + x + 16);
                    __m256 a3 = _mm256_loadu_ps(orow + x + 24);
                    const float* p0 = r0 + x;
                    const float* p1 = r1 + x;
                    const float* p2 = r2 + x;
                    a0 = _mm256_fmadd_ps(w00, _mm256_loadu_ps(p0), a0);
                    a1 = _mm256_fmadd_ps(w00, _mm256_loadu_ps(p0 + 8), a1);
                    a2 = _mm256_fmadd_ps(w00, _mm256_loadu_ps(p0 + 16), a2);
                    a3 = _mm256_fmadd_ps(w00, _mm256_loadu_ps(p0 + 24), a3);
                    a0 = _mm256_fmadd_ps(w01, _mm256_loadu_ps(p0 + 1), a0);
                    a1 = _mm256_fmadd_ps(w01, _mm256_loadu_ps(p0 + 9), a1);
                    a2 = _mm256_fmadd_ps(w01, _mm256_loadu_ps(p0 + 17), a2);
                    a3 = _mm256_fmadd_ps(w01, _mm256_loadu_ps(p0 + 25), a3);
                    a0 = _mm256_fmadd_ps(w02, _mm256_loadu_ps(p0 + 2), a0);
                    a1 = _mm256_fmadd_ps(w02, _mm256_loadu_ps(p0 + 10), a1);
                    a2 = _mm256_fmadd_ps(w02, _mm256_loadu_ps(p0 + 18), a2);
                    a3 = _mm256_fmadd_ps(w02, _mm256_loadu_ps(p0 + 26), a3);
                    a0 = _mm256_fmadd_ps(w10, _mm256_loadu_ps(p1), a0);
                    a1 = _mm256_fmadd_ps(w10, _mm256_loadu_ps(p1 + 8), a1);
                    a2 = _mm256_fmadd_ps(w10, _mm256_loadu_ps(p1 + 16), a2);
                    a3 = _mm256_fmadd_ps(w10, _mm256_loadu_ps(p1 + 24), a3);
                    a0 = _mm256_fmadd_ps(w11, _mm256_loadu_ps(p1 + 1), a0);
                    a1 = _mm256_fmadd_ps(w11, _mm256_loadu_ps(p1 + 9), a1);
                    a2 = _mm256_fmadd_ps(w11, _mm256_loadu_ps(p1 + 17), a2);
                    a3 = _mm256_fmadd_ps(w11, _mm256_loadu_ps(p1 + 25), a3);
                    a0 = _mm256_fmadd_ps(w12, _mm256_loadu_ps(p1 + 2), a0);
                    a1 = _mm256_fmadd_ps(w12, _mm256_loadu_ps(p1 + 10), a1);
                    a2 = _mm256_fmadd_ps(w12, _mm256_loadu_ps(p1 + 18), a2);
                    a3 = _mm256_fmadd_ps(w12, _mm256_loadu_ps(p1 + 26), a3);
                    a0 = _mm256_fmadd_ps(w20, _mm256_loadu_ps(p2), a0);
                    a1 = _mm256_fmadd_ps(w20, _mm256_loadu_ps(p2 + 8), a1);
                    a2 = _mm256_fmadd_ps(w20, _mm256_loadu_ps(p2 + 16), a2);
                    a3 = _mm256_fmadd_ps(w20, _mm256_loadu_ps(p2 + 24), a3);
                    a0 = _mm256_fmadd_ps(w21, _mm256_loadu_ps(p2 + 1), a0);
                    a1 = _mm256_fmadd_ps(w21, _mm256_loadu_ps(p2 + 9), a1);
                    a2 = _mm256_fmadd_ps(w21, _mm256_loadu_ps(p2 + 17), a2);
                    a3 = _mm256_fmadd_ps(w21, _mm256_loadu_ps(p2 + 25), a3);
                    a0 = _mm256_fmadd_ps(w22, _mm256_loadu_ps(p2 + 2), a0);
                    a1 = _mm256_fmadd_ps(w22, _mm256_loadu_ps(p2 + 10), a1);
                    a2 = _mm256_fmadd_ps(w22, _mm256_loadu_ps(p2 + 18), a2);
                    a3 = _mm256_fmadd_ps(w22, _mm256_loadu_ps(p2 + 26), a3);
                    _mm256_storeu_ps(orow + x, a0);
                    _mm256_storeu_ps(orow + x + 8, a1);
                    _mm256_storeu_ps(orow + x + 16, a2);
                    _mm256_storeu_ps(orow + x + 24, a3);
                }
                for (; x < ow8; x += 8) {
                    __m256 acc = _mm256_loadu_ps(orow + x);
                    acc = _mm256_fmadd_ps(w00, _mm256_loadu_ps(r0 + x), acc);
                    acc = _mm256_fmadd_ps(w01, _mm256_loadu_ps(r0 + x + 1), acc);
                    acc = _mm256_fmadd_ps(w02, _mm256_loadu_ps(r0 + x + 2), acc);
                    acc = _mm256_fmadd_ps(w10, _mm256_loadu_ps(r1 + x), acc);
                    acc = _mm256_fmadd_ps(w11, _mm256_loadu_ps(r1 + x + 1), acc);
                    acc = _mm256_fmadd_ps(w12, _mm256_loadu_ps(r1 + x + 2), acc);
                    acc = _mm256_fmadd_ps(w20, _mm256_loadu_ps(r2 + x), acc);
                    acc = _mm256_fmadd_ps(w21, _mm256_loadu_ps(r2 + x + 1), acc);
                    acc = _mm256_fmadd_ps(w22, _mm256_loadu_ps(r2 + x + 2), acc);
                    _mm256_storeu_ps(orow + x, acc);
                }
                for (; x < ow; ++x) {
                    float acc = orow[x];
                    acc += wp[0] * r0[x] + wp[1] * r0[x + 1] + wp[2] * r0[x + 2];
                    acc += wp[3] * r1[x] + wp[4] * r1[x + 1] + wp[5] * r1[x + 2];
                    acc += wp[6] * r2[x] + wp[7] * r2[x + 1] + wp[8] * r2[x + 2];
                    orow[x] = acc;
                }
            }
        }
    }
}

// ---- Winograd F(2x2,3x3) ----
//
// out = A^T [ (G g G^T) ⊙ (B^T d B) ] A over 4x4 input tiles with stride 2,
// which computes a 2x2 output block with 16 multiplies instead of 36. The
// transformed-input planes V[pos][ic][tile] and weight planes U[pos][oc][ic]
// turn the multiply stage into 16 small GEMMs, which is where the time goes.
// Odd trailing output rows/columns fall back to the direct form.

struct WinoScratch {
    std::vector<float> u, v, m;
};

WinoScratch& wino_scratch() {
    static thread_local WinoScratch s;
    return s;
}

// C[ocr][t] += A[ocr][ic] * B[ic][t], C assumed unset (accumulators start at 0).
// B and C rows are ld apart; ld is padded away from powers of two so the
// strided row walk does not collapse onto one cache set.
void wino_gemm(const float* A, const float* B, float* C, int ocr, int ic, int n, int ld) {
    const int n24 = n - n % 24;
    const int n8 = n & ~7;
    int o = 0;
    for (; o + 4 <= ocr; o += 4) {
        const float* a0 = A + static_cast<size_t>(o) * ic;
        const float* a1 = a0 + ic;
        const float* a2 = a1 + ic;
        const float* a3 = a2 + ic;
        float* c0 = C + static_cast<size_t>(o) * ld;
        float* c1 = c0 + ld;
        float* c2 = c1 + ld;
        float* c3 = c2 + ld;
        int t = 0;
        for (; t < n24; t += 24) {
            __m256 s00 = _mm256_setzero_ps(), s01 = _mm256_setzero_ps(), s02 = _mm256_setzero_ps();
            __m256 s10 = _mm256_setzero_ps(), s11 = _mm256_setzero_ps(), s12 = _mm256_setzero_ps();
            __m256 s20 = _mm256_setzero_ps(), s21 = _mm256_setzero_ps(), s22 = _mm256_setzero_ps();
            __m256 s30 = _mm256_setzero_ps(), s31 = _mm256_setzero_ps(), s32 = _mm256_setzero_ps();
            const float* bp = B + t;
            for (int i = 0; i < ic; ++i, bp += ld) {
                const __m256 b0 = _mm256_loadu_ps(bp);
                const __m256 b1 = _mm256_loadu_ps(bp + 8);
                const __m256 b2 = _mm256_loadu_ps(bp + 16);
                __m256 a = _mm256_broadcast_ss(a0 + i);
                s00 = _mm256_fmadd_ps(a, b0, s00);
                s01 = _mm256_fmadd_ps(a, b1, s01);
                s02 = _mm256_fmadd_ps(a, b2, s02);
                a = _mm256_broadcast_ss(a1 + i);
                s10 = _mm256_fmadd_ps(a, b0, s10);
                s11 = _mm256_fmadd_ps(a, b1, s11);
                s12 = _mm256_fmadd_ps(a, b2, s12);
                a = _mm256_broadcast_ss(a2 + i);
                s20 = _mm256_fmadd_ps(a, b0, s20);
                s21 = _mm256_fmadd_ps(a, b1, s21);
                s22 = _mm256_fmadd_ps(a, b2, s22);
                a = _mm256_broadcast_ss(a3 + i);
                s30 = _mm256_fmadd_ps(a, b0, s30);
                s31 = _mm256_fmadd_ps(a, b1, s31);
                s32 = _mm256_fmadd_ps(a, b2, s32);
            }
            _mm256_storeu_ps(c0 + t, s00);
            _mm256_storeu_ps(c0 + t + 8, s01);
            _mm256_storeu_ps(c0 + t + 16, s02);
            _mm256_storeu_ps(c1 + t, s10);
            _mm256_storeu_ps(c1 + t + 8, s11);
            _mm256_storeu_ps(c1 + t + 16, s12);
            _mm256_storeu_ps(c2 + t, s20);
            _mm256_storeu_ps(c2 + t + 8, s21);
            _mm256_storeu_ps(c2 + t + 16, s22);
            _mm256_storeu_ps(c3 + t, s30);
            _mm256_storeu_ps(c3 + t + 8, s31);
            _mm256_storeu_ps(c3 + t + 16, s32);
        }
        for (; t < n8; t += 8) {
            __m256 s0 = _mm256_setzero_ps(), s1 = _mm256_setzero_ps();
            __m256 s2 = _mm256_setzero_ps(), s3 = _mm256_setzero_ps();
            const float* bp = B + t;
            for (int i = 0; i < ic; ++i, bp += ld) {
                const __m256 b = _mm256_loadu_ps(bp);
                s0 = _mm256_fmadd_ps(_mm256_broadcast_ss(a0 + i), b, s0);
                s1 = _mm256_fmadd_ps(_mm256_broadcast_ss(a1 + i), b, s1);
                s2 = _mm256_fmadd_ps(_mm256_broadcast_ss(a2 + i), b, s2);
                s3 = _mm256_fmadd_ps(_mm256_broadcast_ss(a3 + i), b, s3);
            }
            _mm256_storeu_ps(c0 + t, s0);
            _mm256_storeu_ps(c1 + t, s1);
            _mm256_storeu_ps(c2 + t, s2);
            _mm256_storeu_ps(c3 + t, s3);
        }
        for (; t < n; ++t) {
            float s0 = 0, s1 = 0, s2 = 0, s3 = 0;
            const float* bp = B + t;
            for (int i = 0; i < ic; ++i, bp += ld) {
                s0 += a0[i] * *bp;
                s1 += a1[i] * *bp;
                s2 += a2[i] * *bp;
                s3 += a3[i] * *bp;
            }
            c0[t] = s0;
            c1[t] = s1;
            c2[t] = s2;
            c3[t] = s3;
        }
    }
    for (; o < ocr; ++o) {
        const float* a0 = A + static_cast<size_t>(o) * ic;
        float* c0 = C + static_cast<size_t>(o) * ld;
        int t = 0;
        for (; t < n8; t += 8) {
            __m256 s0 = _mm256_setzero_ps();
            const float* bp = B + t;
            for (int i = 0; i < ic; ++i, bp += ld)
                s0 = _mm256_fmadd_ps(_mm256_broadcast_ss(a0 + i), _mm256_loadu_ps(bp), s0);
            _mm256_storeu_ps(c0 + t, s0);
        }
        for (; t < n; ++t) {
            float s0 = 0;
            const float* bp = B + t;
            for (int i = 0; i < ic; ++i, bp += ld) s0 += a0[i] * *bp;
            c0[t] = s0;
        }
    }
}

// direct evaluation of single output points, for odd trailing rows/columns
void conv3x3_strip(const float* in, const float* w, float b, float* out,
                   int ic, int ih, int iw, int o, int y0, int y1, int x0, int x1) {
    const int ow = iw - 2;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            float acc = b;
            for (int i = 0; i < ic; ++i) {
                const float* ip = in + (static_cast<size_t>(i) * ih + y) * iw + x;
                const float* wp = w + (static_cast<size_t>(o) * ic + i) * 9;
                acc += wp[0] * ip[0] + wp[1] * ip[1] + wp[2] * ip[2];
                ip += iw;
                acc += wp[3] * ip[0] + wp[4] * ip[1] + wp[5] * ip[2];
                ip += iw;
                acc += wp[6] * ip[0] + wp[7] * ip[1] + wp[8] * ip[2];
            }
            out[static_cast<size_t>(o) * (ih - 2) * ow + static_cast<size_t>(y) * ow + x] = acc;
        }
}

void wino3x3(const float* in, const float* w, const float* bias, float* out,
             int ic, int ih, int iw, int oc0, int oc1) {
    const int oh = ih - 2;
    const int ow = iw - 2;
    const int th = oh / 2;
    const int tw = ow / 2;
    const int nt = th * tw;
    const int ld = nt + 8;
    const int ocr = oc1 - oc0;

    // grow-only: every cell in use is overwritten below, and shrinking would
    // make the vectors re-zero the tail on the next large call
    WinoScratch& s = wino_scratch();
    const size_t nv = static_cast<size_t>(16) * ic * ld;
    const size_t nu = static_cast<size_t>(16) * ocr * ic;
    const size_t nm = static_cast<size_t>(16) * ocr * ld;
    if (s.v.size() < nv) s.v.resize(nv);
    if (s.u.size() < nu) s.u.resize(nu);
    if (s.m.size() < nm) s.m.resize(nm);

    // V[pos][i][tile] = B^T d B
    const size_t vplane = static_cast<size_t>(ic) * ld;
    for (int i = 0; i < ic; ++i) {
        const float* ip = in + static_cast<size_t>(i) * ih * iw;
        float* vp = s.v.data() + static_cast<size_t>(i) * ld;
        for (int ty = 0; ty < th; ++ty) {
            const float* r0 = ip + static_cast<size_t>(2 * ty) * iw;
            const float* r1 = r0 + iw;
            const float* r2 = r1 + iw;
            const float* r3 = r2 + iw;
            for (int tx = 0; tx < tw; ++tx) {
                const int xo = 2 * tx;
                const __m128 d0 = _mm_loadu_ps(r0 + xo);
                const __m128 d1 = _mm_loadu_ps(r1 + xo);
                const __m128 d2 = _mm_loadu_ps(r2 + xo);
                const __m128 d3 = _mm_loadu_ps(r3 + xo);
                __m128 x0 = _mm_sub_ps(d0, d2);
                __m128 x1 = _mm_add_ps(d1, d2);
                __m128 x2 = _mm_sub_ps(d2, d1);
                __m128 x3 = _mm_sub_ps(d1, d3);
                _MM_TRANSPOSE4_PS(x0, x1, x2, x3);
                __m128 v0 = _mm_sub_ps(x0, x2);
                __m128 v1 = _mm_add_ps(x1, x2);
                __m128 v2 = _mm_sub_ps(x2, x1);
                __m128 v3 = _mm_sub_ps(x1, x3);
                _MM_TRANSPOSE4_PS(v0, v1, v2, v3);
                alignas(16) float vv[16];
                _mm_store_ps(vv, v0);
                _mm_store_ps(vv + 4, v1);
                _mm_store_ps(vv + 8, v2);
                _mm_store_ps(vv + 12, v3);
                float* vt = vp + static_cast<size_t>(ty) * tw + tx;
                for (int pos = 0; pos < 16; ++pos) vt[pos * vplane] = vv[pos];
            }
        }
    }

    // U[pos][o][i] = G g G^T
    const size_t uplane = static_cast<size_t>(ocr) * ic;
    for (int o = oc0; o < oc1; ++o)
        for (int i = 0; i < ic; ++i) {
            const float* g = w + (static_cast<size_t>(o) * ic + i) * 9;
            float q[4][3];
            for (int c = 0; c < 3; ++c) {
                q[0][c] = g[c];
                q[1][c] = 0.5f * (g[c] + g[3 + c] + g[6 + c]);
                q[2][c] = 0.5f * (g[c] - g[3 + c] + g[6 + c]);
                q[3][c] = g[6 + c];
            }
            float* up = s.u.data() + static_cast<size_t>(o - oc0) * ic + i;
            for (int r = 0; r < 4; ++r) {
                const float u0 = q[r][0], u1 = q[r][1], u2 = q[r][2];
                up[(r * 4 + 0) * uplane] = u0;
                up[(r * 4 + 1) * uplane] = 0.5f * (u0 + u1 + u2);
                up[(r * 4 + 2) * uplane] = 0.5f * (u0 - u1 + u2);
                up[(r * 4 + 3) * uplane] = u2;
            }
        }

    const size_t mplane = static_cast<size_t>(ocr) * ld;
    for (int pos = 0; pos < 16; ++pos)
        wino_gemm(s.u.data() + pos * uplane, s.v.data() + pos * vplane,
                  s.m.data() + pos * mplane, ocr, ic, nt, ld);

    // out 2x2 = A^T m A + b, four tiles per step
    const int tw4 = tw & ~3;
    for (int o = oc0; o < oc1; ++o) {
        const float b = bias ? bias[o] : 0.0f;
        const __m128 bv = _mm_set1_ps(b);
        const float* mp = s.m.data() + static_cast<size_t>(o - oc0) * ld;
        float* op = out + static_cast<size_t>(o) * oh * ow;
        for (int ty = 0; ty < th; ++ty) {
            float* orow0 = op + static_cast<size_t>(2 * ty) * ow;
            float* orow1 = orow0 + ow;
            const float* mrow = mp + static_cast<size_t>(ty) * tw;
            int tx = 0;
            for (; tx < tw4; tx += 4) {
                __m128 m[16];
                for (int pos = 0; pos < 16; ++pos)
                    m[pos] = _mm_loadu_ps(mrow + tx + pos * mplane);
                const __m128 s0a = _mm_add_ps(_mm_add_ps(m[0], m[4]), m[8]);
                const __m128 s0b = _mm_add_ps(_mm_add_ps(m[1], m[5]), m[9]);
                const __m128 s0c = _mm_add_ps(_mm_add_ps(m[2], m[6]), m[10]);
                const __m128 s0d = _mm_add_ps(_mm_add_ps(m[3], m[7]), m[11]);
                const __m128 s1a = _mm_sub_ps(_mm_sub_ps(m[4], m[8]), m[12]);
                const __m128 s1b = _mm_sub_ps(_mm_sub_ps(m[5], m[9]), m[13]);
                const __m128 s1c = _mm_sub_ps(_mm_sub_ps(m[6], m[10]), m[14]);
                const __m128 s1d = _mm_sub_ps(_mm_sub_ps(m[7], m[11]), m[15]);
                const __m128 y00 = _mm_add_ps(_mm_add_ps(_mm_add_ps(s0a, s0b), s0c), bv);
                const __m128 y01 = _mm_add_ps(_mm_sub_ps(_mm_sub_ps(s0b, s0c), s0d), bv);
                const __m128 y10 = _mm_add_ps(_mm_add_ps(_mm_add_ps(s1a, s1b), s1c), bv);
                const __m128 y11 = _mm_add_ps(_mm_sub_ps(_mm_sub_ps(s1b, s1c), s1d), bv);
                _mm_storeu_ps(orow0 + 2 * tx, _mm_unpacklo_ps(y00, y01));
                _mm_storeu_ps(orow0 + 2 * tx + 4, _mm_unpackhi_ps(y00, y01));
                _mm_storeu_ps(orow1 + 2 * tx, _mm_unpacklo_ps(y10, y11));
                _mm_storeu_ps(orow1 + 2 * tx + 4, _mm_unpackhi_ps(y10, y11));
            }
            for (; tx < tw; ++tx) {
                float mm[16];
                for (int pos = 0; pos < 16; ++pos) mm[pos] = mrow[tx + pos * mplane];
                float s0[4], s1[4];
                for (int c = 0; c < 4; ++c) {
                    s0[c] = mm[c] + mm[4 + c] + mm[8 + c];
                    s1[c] = mm[4 + c] - mm[8 + c] - mm[12 + c];
                }
                orow0[2 * tx] = s0[0] + s0[1] + s0[2] + b;
                orow0[2 * tx + 1] = s0[1] - s0[2] - s0[3] + b;
                orow1[2 * tx] = s1[0] + s1[1] + s1[2] + b;
                orow1[2 * tx + 1] = s1[1] - s1[2] - s1[3] + b;
            }
        }
    }

    if (ow & 1)
        for (int o = oc0; o < oc1; ++o)
            conv3x3_strip(in, w, bias ? bias[o] : 0.0f, out, ic, ih, iw, o, 0, 2 * th, ow - 1, ow);
    if (oh & 1)
        for (int o = oc0; o < oc1; ++o)
            conv3x3_strip(in, w, bias ? bias[o] : 0.0f, out, ic, ih, iw, o, oh - 1, oh, 0, ow);
}

void a_conv_valid(const float* in, const float* w, const float* bias, float* out,
                  int ic, int ih, int iw, int oc, int k, int oc0, int oc1) {
    (void)oc;
    if (k == 3) {
        if (ih >= 4 && iw >= 4)
            wino3x3(in, w, bias, out, ic, ih, iw, oc0, oc1);
        else
            conv3x3(in, w, bias, out, ic, ih, iw, oc0, oc1);
        return;
    }
    const int oh = ih - k + 1;
    const int ow = iw - k + 1;
    const int ow8 = ow & ~7;
    for (int o = oc0; o < oc1; ++o) {
        const float b = bias ? bias[o] : 0.0f;
        float* op = out + static_cast<size_t>(o) * oh * ow;
        for (int y = 0; y < oh; ++y) {
            float* orow = op + static_cast<size_t>(y) * ow;
            int x = 0;
            for (; x < ow8; x += 8) {
                __m256 acc = _mm256_set1_ps(b);
                for (int i = 0; i < ic; ++i) {
                    const float* ip = in + (static_cast<size_t>(i) * ih + y) * iw + x;
                    const float* wp = w + (static_cast<size_t>(o) * ic + i) * k * k;
                    for (int ky = 0; ky < k; ++ky) {
                        const float* irow = ip + static_cast<size_t>(ky) * iw;
                        for (int kx = 0; kx < k; ++kx)
                            acc = _mm256_fmadd_ps(_mm256_set1_ps(wp[ky * k + kx]),
                                                  _mm256_loadu_ps(irow + kx), acc);
                    }
                }
                _mm256_storeu_ps(orow + x, acc);
            }
            for (; x < ow; ++x) {
                float acc = b;
                for (int i = 0; i < ic; ++i) {
                    const float* ip = in + (static_cast<size_t>(i) * ih + y) * iw + x;
                    const float* wp = w + (static_cast<size_t>(o) * ic + i) * k * k;
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx)
                            acc += wp[ky * k + kx] * ip[static_cast<size_t>(ky) * iw + kx];
                }
                orow[x] = acc;
            }
        }
    }
}

void a_conv_wgrad(const float* gout, const float* in, float* gw, float* gbias,
                  int ic, int ih, int iw, int oc, int k, int oc0, int oc1) {
    const int oh = ih - k + 1;
    const int ow = iw - k + 1;
    const int ow8 = ow & ~7;
    (void)oc;
    for (int o = oc0; o < oc1; ++o) {
        const float* gp = gout + static_cast<size_t>(o) * oh * ow;
        if (gbias) {
            __m256 acc8 = _mm256_setzero_ps();
            float tail = 0.0f;
            const int n = oh * ow;
            int j = 0;
            for (; j + 8 <= n; j += 8) acc8 = _mm256_add_ps(acc8, _mm256_loadu_ps(gp + j));
            for (; j < n; ++j) tail += gp[j];
            gbias[o] += hsum8(acc8) + tail;
        }
        for (int i = 0; i < ic; ++i) {
            const float* ip = in + static_cast<size_t>(i) * ih * iw;
            float* wp = gw + (static_cast<size_t>(o) * ic + i) * k * k;
            for (int ky = 0; ky < k; ++ky)
                for (int kx = 0; kx < k; ++kx) {
                    __m256 acc8 = _mm256_setzero_ps();
                    float tail = 0.0f;
                    for (int y = 0; y < oh; ++y) {
                        const float* irow = ip + static_cast<size_t>(y + ky) * iw + kx;
                        const float* grow = gp + static_cast<size_t>(y) * ow;
                        int x = 0;
                        for (; x < ow8; x += 8)
                            acc8 = _mm256_fmadd_ps(_mm256_loadu_ps(grow + x),
                                                   _mm256_loadu_ps(irow + x), acc8);
                        for (; x < ow; ++x) tail += grow[x] * irow[x];
                    }
                    wp[ky * k + kx] += hsum8(acc8) + tail;
                }
        }
    }
}

} // namespace

const Ops* avx2_ops_if_supported() {
    if (!__builtin_cpu_supports("avx2") || !__builtin_cpu_supports("fma")) return nullptr;
    using namespace avx2ew;
    static const Ops table = {
        "avx2",        a_vadd,  a_vsub,    a_vmul,       a_vdiv,
        a_vacc,        a_vaxpy, a_vmulacc, a_lrelu,      a_lrelu_bwd,
        a_sigmoid_bwd, a_dup2,  a_fold2,   a_conv_valid, a_conv_wgrad,
    };
    return &table;
}

} // namespace rseed::kernels

#else

#include "kernels_detail.hpp"

namespace rseed::kernels {
const Ops* avx2_ops_if_supported() { return nullptr; }
} // namespace rseed::kernels

#endif
