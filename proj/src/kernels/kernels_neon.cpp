// NEON kernel variants for aarch64. Same structure as the AVX2 TU with
// 4-wide lanes; NEON is baseline on aarch64 so no runtime feature probe.

#if defined(__aarch64__)

#include "kernels_detail.hpp"

#include <arm_neon.h>

namespace rseed::kernels {
namespace {

inline float hsum4(float32x4_t v) { return vaddvq_f32(v); }

void n_vadd(const float* a, const float* b, float* out, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4) vst1q_f32(out + i, vaddq_f32(vld1q_f32(a + i), vld1q_f32(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}
void n_vsub(const float* a, const float* b, float* out, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4) vst1q_f32(out + i, vsubq_f32(vld1q_f32(a + i), vld1q_f32(b + i)));
    for (; i < n; ++i) out[i] = a[i] - b[i];
}
void n_vmul(const float* a, const float* b, float* out, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4) vst1q_f32(out + i, vmulq_f32(vld1q_f32(a + i), vld1q_f32(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}
void n_vdiv(const float* a, const float* b, float* out, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4) vst1q_f32(out + i, vdivq_f32(vld1q_f32(a + i), vld1q_f32(b + i)));
    for (; i < n; ++i) out[i] = a[i] / b[i];
}
void n_vacc(float* y, const float* x, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4) vst1q_f32(y + i, vaddq_f32(vld1q_f32(y + i), vld1q_f32(x + i)));
    for (; i < n; ++i) y[i] += x[i];
}
void n_vaxpy(float* y, const float* x, float a, size_t n) {
    const float32x4_t av = vdupq_n_f32(a);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        float32x4_t prod = vmulq_f32(av, vld1q_f32(x + i));
        vst1q_f32(y + i, vaddq_f32(vld1q_f32(y + i), prod));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}
void n_vmulacc(float* y, const float* a, const float* b, size_t n) {
    // separate mul and add so the per-element rounding matches the reference
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        float32x4_t prod = vmulq_f32(vld1q_f32(a + i), vld1q_f32(b + i));
        vst1q_f32(y + i, vaddq_f32(vld1q_f32(y + i), prod));
    }
    for (; i < n; ++i) y[i] += a[i] * b[i];
}
void n_lrelu(const float* x, float slope, float* out, size_t n) {
    const float32x4_t sv = vdupq_n_f32(slope);
    const float32x4_t zero = vdupq_n_f32(0.0f);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        float32x4_t v = vld1q_f32(x + i);
        uint32x4_t mask = vcgtq_f32(v, zero);
        vst1q_f32(out + i, vbslq_f32(mask, v, vmulq_f32(sv, v)));
    }
    for (; i < n; ++i) out[i] = x[i] > 0.0f ? x[i] : slope * x[i];
}
void n_lrelu_bwd(const float* x, const float* g, float slope, float* gin, size_t n) {
    const float32x4_t sv = vdupq_n_f32(slope);
    const float32x4_t zero = vdupq_n_f32(0.0f);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        float32x4_t xv = vld1q_f32(x + i);
        float32x4_t gv = vld1q_f32(g + i);
        uint32x4_t mask = vcgtq_f32(xv, zero);
        float32x4_t contrib = vbslq_f32(mask, gv, vmulq_f32(sv, gv));
        vst1q_f32(gin + i, vaddq_f32(vld1q_f32(gin + i), contrib));
    }
    for (; i < n; ++i) gin[i] += x[i] > 0.0f ? g[i] : slope * g[i];
}

void n_sigmoid_bwd(const float* out, const float* g, float* gin, size_t n) {
    const float32x4_t one = vdupq_n_f32(1.0f);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        float32x4_t ov = vld1q_f32(out + i);
        float32x4_t t = vmulq_f32(vld1q_f32(g + i), ov);
        t = vmulq_f32(t, vsubq_f32(one, ov));
        vst1q_f32(gin + i, vaddq_f32(vld1q_f32(gin + i), t));
    }
    for (; i < n; ++i) gin[i] += g[i] * out[i] * (1.0f - out[i]);
}
void n_dup2(const float* x, float* out, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        float32x4_t v = vld1q_f32(x + i);
        float32x4x2_t pair = {{v, v}};
        vst2q_f32(out + 2 * i, pair);
    }
    for (; i < n; ++i) {
        out[2 * i] = x[i];
        out[2 * i + 1] = x[i];
    }
}
void n_fold2(const float* g, float* y, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        float32x4x2_t pair = vld2q_f32(g + 2 * i);
        float32x4_t s = vaddq_f32(pair.val[0], pair.val[1]);
        vst1q_f32(y + i, vaddq_f32(vld1q_f32(y + i), s));
    }
    for (; i < n; ++i) y[i] += g[2 * i] + g[2 * i + 1];
}

void conv3x3(const float* in, const float* w, const float* bias, float* out,
             int ic, int ih, int iw, int oc0, int oc1) {
    const int oh = ih - 2;
    const int ow = iw - 2;
    const int ow4 = ow & ~3;
    for (int o = oc0; o < oc1; ++o) {
        float* op = out + static_cast<size_t>(o) * oh * ow;
        const float b = bias ? bias[o] : 0.0f;
        for (int j = 0; j < oh * ow; ++j) op[j] = b;
        for (int i = 0; i < ic; ++i) {
            const float* wp = w + (static_cast<size_t>(o) * ic + i) * 9;
            const float* ip = in + static_cast<size_t>(i) * ih * iw;
            for (int y = 0; y < oh; ++y) {
                const float* r0 = ip + static_cast<size_t>(y) * iw;
                const float* r1 = r0 + iw;
                const float* r2 = r1 + iw;
                float* orow = op + static_cast<size_t>(y) * ow;
                int x = 0;
                for (; x < ow4; x += 4) {
                    float32x4_t acc = vld1q_f32(orow + x);
                    acc = vfmaq_n_f32(acc, vld1q_f32(r0 + x), wp[0]);
                    acc = vfmaq_n_f32(acc, vld1q_f32(r0 + x + 1), wp[1]);
                    acc = vfmaq_n_f32(acc, vld1q_f32(r0 + x + 2), wp[2]);
                    acc = vfmaq_n_f32(acc, vld1q_f32(r1 + x), wp[3]);
                    acc = vfmaq_n_f32(acc, vld1q_f32(r1 + x + 1), wp[4]);
                    acc = vfmaq_n_f32(acc, vld1q_f32(r1 + x + 2), wp[5]);
                    acc = vfmaq_n_f32(acc, vld1q_f32(r2 + x), wp[6]);
                    acc = vfmaq_n_f32(acc, vld1q_f32(r2 + x + 1), wp[7]);
                    acc = vfmaq_n_f32(acc, vld1q_f32(r2 + x + 2), wp[8]);
                    vst1q_f32(orow + x, acc);
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

void n_conv_valid(const float* in, const float* w, const float* bias, float* out,
                  int ic, int ih, int iw, int oc, int k, int oc0, int oc1) {
    (void)oc;
    if (k == 3) {
        conv3x3(in, w, bias, out, ic, ih, iw, oc0, oc1);
        return;
    }
    const int oh = ih - k + 1;
    const int ow = iw - k + 1;
    const int ow4 = ow & ~3;
    for (int o = oc0; o < oc1; ++o) {
        const float b = bias ? bias[o] : 0.0f;
        float* op = out + static_cast<size_t>(o) * oh * ow;
        for (int y = 0; y < oh; ++y) {
            float* orow = op + static_cast<size_t>(y) * ow;
            int x = 0;
            for (; x < ow4; x += 4) {
                float32x4_t acc = vdupq_n_f32(b);
                for (int i = 0; i < ic; ++i) {
                    const float* ip = in + (static_cast<size_t>(i) * ih + y) * iw + x;
                    const float* wp = w + (static_cast<size_t>(o) * ic + i) * k * k;
                    for (int ky = 0; ky < k; ++ky) {
                        const float* irow = ip + static_cast<size_t>(ky) * iw;
                        for (int kx = 0; kx < k; ++kx)
                            acc = vfmaq_n_f32(acc, vld1q_f32(irow + kx), wp[ky * k + kx]);
                    }
                }
                vst1q_f32(orow + x, acc);
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

void n_conv_wgrad(const float* gout, const float* in, float* gw, float* gbias,
                  int ic, int ih, int iw, int oc, int k, int oc0, int oc1) {
    const int oh = ih - k + 1;
    const int ow = iw - k + 1;
    const int ow4 = ow & ~3;
    (void)oc;
    for (int o = oc0; o < oc1; ++o) {
        const float* gp = gout + static_cast<size_t>(o) * oh * ow;
        if (gbias) {
            float32x4_t acc4 = vdupq_n_f32(0.0f);
            float tail = 0.0f;
            const int n = oh * ow;
            int j = 0;
            for (; j + 4 <= n; j += 4) acc4 = vaddq_f32(acc4, vld1q_f32(gp + j));
            for (; j < n; ++j) tail += gp[j];
            gbias[o] += hsum4(acc4) + tail;
        }
        for (int i = 0; i < ic; ++i) {
            const float* ip = in + static_cast<size_t>(i) * ih * iw;
            float* wp = gw + (static_cast<size_t>(o) * ic + i) * k * k;
            for (int ky = 0; ky < k; ++ky)
                for (int kx = 0; kx < k; ++kx) {
                    float32x4_t acc4 = vdupq_n_f32(0.0f);
                    float tail = 0.0f;
                    for (int y = 0; y < oh; ++y) {
                        const float* irow = ip + static_cast<size_t>(y + ky) * iw + kx;
                        const float* grow = gp + static_cast<size_t>(y) * ow;
                        int x = 0;
                        for (; x < ow4; x += 4)
                            acc4 = vfmaq_f32(acc4, vld1q_f32(grow + x), vld1q_f32(irow + x));
                        for (; x < ow; ++x) tail += grow[x] * irow[x];
                    }
                    wp[ky * k + kx] += hsum4(acc4) + tail;
                }
        }
    }
}

} // namespace

const Ops* neon_ops_if_supported() {
    static const Ops table = {
        "neon",        n_vadd,  n_vsub,    n_vmul,       n_vdiv,
        n_vacc,        n_vaxpy, n_vmulacc, n_lrelu,      n_lrelu_bwd,
        n_sigmoid_bwd, n_dup2,  n_fold2,   n_conv_valid, n_conv_wgrad,
    };
    return &table;
}

} // namespace rseed::kernels

#else

#include "kernels_detail.hpp"

namespace rseed::kernels {
const Ops* neon_ops_if_supported() { return nullptr; }
} // namespace rseed::kernels

#endif
