#include "kernels_detail.hpp"

#include <cstdlib>
#include <cstring>

namespace rseed::kernels {
namespace {

const Ops* select() {
    const char* want = std::getenv("RSEED_SIMD");
    if (want && std::strcmp(want, "scalar") == 0) return &scalar_ops();
    if (want && std::strcmp(want, "avx2") == 0) {
        if (const Ops* t = avx2_ops_if_supported()) return t;
        return &scalar_ops();
    }
    if (want && std::strcmp(want, "neon") == 0) {
        if (const Ops* t = neon_ops_if_supported()) return t;
        return &scalar_ops();
    }
    if (const Ops* t = avx2_ops_if_supported()) return t;
    if (const Ops* t = neon_ops_if_supported()) return t;
    return &scalar_ops();
}

} // namespace

const Ops& ops() {
    static const Ops* active = select();
    return *active;
}

const char* active_isa() { return ops().isa; }

} // namespace rseed::kernels
