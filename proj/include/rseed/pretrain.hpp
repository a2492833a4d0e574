#pragma once

#include "rseed/decoder.hpp"
#include "rseed/tensor.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace rseed {

struct PretrainConfig {
    float lr = 3e-4f;
    int epochs = 200;
    int batch = 8;
    int resolution = 128;
    uint64_t rng_seed = 1;
};

struct PretrainReport {
    DecoderWeights weights;
    std::vector<std::pair<int, float>> epoch_loss;          // epoch index, mean corpus loss
    std::vector<std::pair<std::string, double>> final_psnr; // per corpus image
};

// Generative latent optimization: one learnable seed per corpus image plus
// shared decoder weights, jointly minimizing mean squared reconstruction
// error. The returned weights carry the corpus's image statistics and serve
// as the pretrained reflectance decoder.
PretrainReport pretrain(const std::vector<std::pair<std::string, Tensor>>& corpus,
                        const DecoderArch& arch, const PretrainConfig& cfg);

} // namespace rseed
