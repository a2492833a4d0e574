#pragma once

#include <cstddef>

namespace rseed::kernels {

// Inner-loop kernel table. One scalar reference implementation plus SIMD
// variants (AVX2 on x86-64, NEON on aarch64) selected once at startup.
//
// Contracts shared by every variant:
//  - elementwise kernels produce per-element results identical to the scalar
//    reference (no reassociation, one rounding per arithmetic op);
//  - conv kernels may fuse multiply-add per lane, so they match the scalar
//    reference within small relative tolerance (equivalence-tested);
//  - all kernels are pure: disjoint outputs, no hidden state, safe to call
//    from multiple threads on disjoint ranges.
//
// conv_valid computes a stride-1 VALID convolution (no implicit padding):
//   in   [ic, ih, iw]
//   w    [oc, ic, k, k]   (k odd)
//   bias [oc] or nullptr
//   out  [oc, ih-k+1, iw-k+1]
// restricted to output channels [oc0, oc1).
//
// conv_wgrad accumulates weight/bias gradients for the same geometry:
//   gw[o,i,ky,kx] += sum_{y,x} gout[o,y,x] * in[i, y+ky, x+kx]
//   gbias[o]      += sum_{y,x} gout[o,y,x]          (gbias may be nullptr)
// restricted to output channels [oc0, oc1).
struct Ops {
    const char* isa;

    void (*vadd)(const float* a, const float* b, float* out, size_t n);
    void (*vsub)(const float* a, const float* b, float* out, size_t n);
    void (*vmul)(const float* a, const float* b, float* out, size_t n);
    void (*vdiv)(const float* a, const float* b, float* out, size_t n);
    void (*vacc)(float* y, const float* x, size_t n);                  // y += x
    void (*vaxpy)(float* y, const float* x, float a, size_t n);        // y += a*x
    void (*vmulacc)(float* y, const float* a, const float* b, size_t n); // y += a*b
    void (*lrelu)(const float* x, float slope, float* out, size_t n);
    void (*lrelu_bwd)(const float* x, const float* g, float slope, float* gin, size_t n);
    void (*sigmoid_bwd)(const float* out, const float* g, float* gin, size_t n); // gin += g*out*(1-out)
    void (*dup2)(const float* x, float* out, size_t n);                // out[2i] = out[2i+1] = x[i]
    void (*fold2)(const float* g, float* y, size_t n);                 // y[i] += g[2i] + g[2i+1]

    void (*conv_valid)(const float* in, const float* w, const float* bias, float* out,
                       int ic, int ih, int iw, int oc, int k, int oc0, int oc1);
    void (*conv_wgrad)(const float* gout, const float* in, float* gw, float* gbias,
                       int ic, int ih, int iw, int oc, int k, int oc0, int oc1);
};

// Active table, chosen at first use: RSEED_SIMD env override ("scalar",
// "avx2", "neon", "auto"), else the best ISA the CPU supports.
const Ops& ops();

// Always-available portable reference; equivalence tests compare against it.
const Ops& scalar_ops();

const char* active_isa();

} // namespace rseed::kernels
