// Shared declarations between the two AVX2 kernel translation units. The
// elementwise family lives in its own TU compiled with -ffp-contract=off so
// the compiler cannot fuse its deliberately separate mul/add intrinsic pairs,
// while the convolution TU keeps default contraction for its transform code.
#pragma once

#if defined(__x86_64__) || defined(_M_X64)

#include <cstddef>

namespace rseed::kernels::avx2ew {

void a_vadd(const float* a, const float* b, float* out, size_t n);
void a_vsub(const float* a, const float* b, float* out, size_t n);
void a_vmul(const float* a, const float* b, float* out, size_t n);
void a_vdiv(const float* a, const float* b, float* out, size_t n);
void a_vacc(float* y, const float* x, size_t n);
void a_vaxpy(float* y, const float* x, float a, size_t n);
void a_vmulacc(float* y, const float* a, const float* b, size_t n);
void a_lrelu(const float* x, float slope, float* out, size_t n);
void a_lrelu_bwd(const float* x, const float* g, float slope, float* gin, size_t n);
void a_sigmoid_bwd(const float* out, const float* g, float* gin, size_t n);
void a_dup2(const float* x, float* out, size_t n);
void a_fold2(const float* g, float* y, size_t n);

} // namespace rseed::kernels::avx2ew

#endif
