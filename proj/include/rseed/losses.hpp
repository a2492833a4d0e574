#pragma once

#include "rseed/autodiff.hpp"
#include "rseed/tensor.hpp"

namespace rseed {

struct LossWeights {
    float lambda_re = 12.0f;
    float lambda_e = 0.05f;
    float lambda_s = 0.03f;
    float lambda_i = 0.01f;
    float tau = 0.2f;
    float exposure_e = 0.6f;

    void validate() const;
};

// Gaussian-blur (25×25, σ = 2.0, reflect padding) each channel of the
// low-light input, then take the per-pixel channel max. Computed once per
// run, outside the graph; the result enters the tape as a constant.
Tensor illumination_target(const Tensor& i_low);

// mean((i_low - reconstruction)²)
NodeId loss_reconstruction(Tape& tape, NodeId i_low, NodeId reconstruction);

// mean(|target - illumination|)
NodeId loss_illumination_consistency(Tape& tape, NodeId target, NodeId illumination);

// mean(|∇L| / exp(w)) + tau·mean(|∇R|), w = per-direction channel mean of |∇R|
NodeId loss_smoothness(Tape& tape, NodeId illumination, NodeId reflectance, float tau);

// mean(|exposure_e - reflectance ⊙ illumination^gamma|)
NodeId loss_illumination_control(Tape& tape, NodeId reflectance, NodeId illumination,
                                 NodeId gamma, float exposure_e);

struct LossNodes {
    NodeId re = -1, e = -1, s = -1, i = -1;
    NodeId total = -1;
};

LossNodes loss_total(Tape& tape, NodeId re, NodeId e, NodeId s, NodeId i,
                     const LossWeights& w);

} // namespace rseed
