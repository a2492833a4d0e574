#pragma once

#include "rseed/autodiff.hpp"
#include "rseed/tensor.hpp"

namespace rseed {

struct GammaParam {
    float value = 0.5f;
    float min = 0.01f;
    float max = 10.0f;

    float clamped(float v) const { return v < min ? min : (v > max ? max : v); }
};

// reflectance ⊙ illumination, the illumination (1 channel) broadcast across
// the reflectance channels
NodeId reconstruct(Tape& tape, NodeId reflectance, NodeId illumination);

// illumination^gamma, differentiable in both; gamma is a scalar node > 0
NodeId gamma_transform(Tape& tape, NodeId illumination, NodeId gamma);

// reflectance ⊙ illumination^gamma, the enhanced output
NodeId enhance_compose(Tape& tape, NodeId reflectance, NodeId illumination, NodeId gamma);

// Forward-only twins, used to recompose saved maps; they perform the exact
// same float operations as the graph versions, so results are bit-equal.
Tensor reconstruct(const Tensor& reflectance, const Tensor& illumination);
Tensor enhance_compose(const Tensor& reflectance, const Tensor& illumination, float gamma);

} // namespace rseed
