#pragma once

#include "rseed/kernels/kernels.hpp"

namespace rseed::kernels {

// Per-ISA tables; null when the variant is not compiled in or the CPU lacks
// the feature. Only dispatch.cpp should call these.
const Ops* avx2_ops_if_supported();
const Ops* neon_ops_if_supported();

} // namespace rseed::kernels
