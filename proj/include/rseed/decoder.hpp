#pragma once

#include "rseed/autodiff.hpp"
#include "rseed/rng.hpp"
#include "rseed/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace rseed {

// Upsampling convolutional generator: seed_channels × h × w in,
// out_channels × (h·2^n) × (w·2^n) out.
struct DecoderArch {
    int n_stages = 4;
    int seed_channels = 32;
    std::vector<int> stage_channels = {64, 64, 32, 16};
    int out_channels = 3;

    int scale() const { return 1 << n_stages; }
    void validate() const;
    std::string str() const;
    bool operator==(const DecoderArch& o) const = default;
};

struct DecoderWeights {
    struct Layer {
        std::string name;
        Tensor tensor;
    };
    DecoderArch arch;
    // stage<i>.kernel, stage<i>.bias for each stage, then final.kernel, final.bias
    std::vector<Layer> layers;

    const Tensor& find(const std::string& name) const;
};

// Kernels ~ N(0, 2/fan_in), biases zero; layer order fixed, so a given
// rng_seed always produces bit-identical weights.
DecoderWeights init_random(const DecoderArch& arch, uint64_t rng_seed);

struct Seed {
    Tensor tensor; // seed_channels × (H/2^n) × (W/2^n)
    uint64_t rng_seed;
};

// padded_h/padded_w are the decode target dims; they must be divisible by 2^n.
Seed make_seed(const DecoderArch& arch, int padded_h, int padded_w, Rng& rng);

// Node handles for one decode pass, for wiring the optimizer's leaf set.
struct DecodeHandles {
    NodeId seed = -1;
    std::vector<NodeId> kernels;
    std::vector<NodeId> biases;
    NodeId output = -1;
};

// Per stage: upsample_nearest2x, conv3x3 (reflect pad), leaky_relu(0.2);
// then a final conv3x3 (reflect pad) and sigmoid. freeze marks the weight
// leaves as non-learnable; seed_requires_grad controls the seed leaf.
DecodeHandles decode_graph(Tape& tape, const Seed& seed, bool seed_requires_grad,
                           const DecoderWeights& weights, bool freeze);

// Forward-only convenience on a private tape.
Tensor decode(const Seed& seed, const DecoderWeights& weights, bool freeze = true);

} // namespace rseed
