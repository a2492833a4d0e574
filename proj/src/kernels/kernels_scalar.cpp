// Scalar reference kernels. These define the semantics the SIMD variants are
// tested against; keep them plain loops with one rounding per arithmetic op.

#include "rseed/kernels/kernels.hpp"

namespace rseed::kernels {
namespace {

void s_vadd(const float* a, const float* b, float* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}
void s_vsub(const float* a, const float* b, float* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}
void s_vmul(const float* a, const float* b, float* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}
void s_vdiv(const float* a, const float* b, float* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] / b[i];
}
void s_vacc(float* y, const float* x, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += x[i];
}
void s_vaxpy(float* y, const float* x, float a, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += a * x[i];
}
void s_vmulacc(float* y, const float* a, const float* b, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += a[i] * b[i];
}
void s_lrelu(const float* x, float slope, float* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0f ? x[i] : slope * x[i];
}
void s_lrelu_bwd(const float* x, const float* g, float slope, float* gin, size_t n) {
    for (size_t i = 0; i < n; ++i) gin[i] += x[i] > 0.0f ? g[i] : slope * g[i];
}
void s_sigmoid_bwd(const float* out, const float* g, float* gin, size_t n) {
    for (size_t i = 0; i < n; ++i) gin[i] += g[i] * out[i] * (1.0f - out[i]);
}
void s_dup2(const float* x, float* out, size_t n) {
    for (size_t i = 0; i < n; ++i) {
        out[2 * i] = x[i];
        out[2 * i + 1] = x[i];
    }
}
void s_fold2(const float* g, float* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += g[2 * i] + g[2 * i + 1];
}

void s_conv_valid(const float* in, const float* w, const float* bias, float* out,
                  int ic, int ih, int iw, int oc, int k, int oc0, int oc1) {
    const int oh = ih - k + 1;
    const int ow = iw - k + 1;
    for (int o = oc0; o < oc1; ++o) {
        const float b = bias ? bias[o] : 0.0f;
        float* op = out + static_cast<size_t>(o) * oh * ow;
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                float acc = b;
                for (int i = 0; i < ic; ++i) {
                    const float* ip = in + (static_cast<size_t>(i) * ih + y) * iw + x;
                    const float* wp = w + ((static_cast<size_t>(o) * ic + i) * k) * k;
                    for (int ky = 0; ky < k; ++ky) {
                        const float* row = ip + static_cast<size_t>(ky) * iw;
                        for (int kx = 0; kx < k; ++kx) acc += wp[ky * k + kx] * row[kx];
                    }
                }
                op[y * ow + x] = acc;
            }
    }
}

void s_conv_wgrad(const float* gout, const float* in, float* gw, float* gbias,
                  int ic, int ih, int iw, int oc, int k, int oc0, int oc1) {
    const int oh = ih - k + 1;
    const int ow = iw - k + 1;
    (void)oc;
    for (int o = oc0; o < oc1; ++o) {
        const float* gp = gout + static_cast<size_t>(o) * oh * ow;
        if (gbias) {
            float acc = 0.0f;
            for (int j = 0; j < oh * ow; ++j) acc += gp[j];
            gbias[o] += acc;
        }
        for (int i = 0; i < ic; ++i) {
            const float* ip = in + static_cast<size_t>(i) * ih * iw;
            float* wp = gw + (static_cast<size_t>(o) * ic + i) * k * k;
            for (int ky = 0; ky < k; ++ky)
                for (int kx = 0; kx < k; ++kx) {
                    float acc = 0.0f;
                    for (int y = 0; y < oh; ++y) {
                        const float* irow = ip + static_cast<size_t>(y + ky) * iw + kx;
                        const float* grow = gp + static_cast<size_t>(y) * ow;
                        for (int x = 0; x < ow; ++x) acc += grow[x] * irow[x];
                    }
                    wp[ky * k + kx] += acc;
                }
        }
    }
}

} // namespace

const Ops& scalar_ops() {
    static const Ops table = {
        "scalar",      s_vadd,  s_vsub,  s_vmul,       s_vdiv,
        s_vacc,        s_vaxpy, s_vmulacc, s_lrelu,    s_lrelu_bwd,
        s_sigmoid_bwd, s_dup2,  s_fold2, s_conv_valid, s_conv_wgrad,
    };
    return table;
}

} // namespace rseed::kernels
