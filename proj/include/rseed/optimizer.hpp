#pragma once

#include "rseed/decoder.hpp"
#include "rseed/losses.hpp"
#include "rseed/retinex.hpp"
#include "rseed/tensor.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace rseed {

// What the gradient step updates. Seeds and gamma are the method; the other
// two exist as runnable ablations.
enum class OptMode { SeedOnly, ParamsOnly, Joint };

// Where the two decoders' weights come from.
enum class InitSetting { PretrainedReflectance, RandomAll, PretrainedBoth };

enum class StepRule { Adam, Gd };

// Raised on non-finite losses or gradients; carries the iteration so the CLI
// can report it before exiting.
struct NanAbort : Error {
    int iteration;
    NanAbort(const std::string& msg, int iter) : Error(msg), iteration(iter) {}
};

// leaf - lr·grad, elementwise, no momentum: the single-step update rule the
// seed-optimization contract is stated in.
Tensor gd_step(const Tensor& leaf, const Tensor& grad, float lr);

struct AdamState {
    float lr = 1e-2f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
    struct Slot {
        std::vector<double> m, v;
        int64_t t = 0;
    };
    std::vector<Slot> slots;
};

struct LeafUpdate {
    std::string name;
    Tensor* value;
    const Tensor* grad;
    int slot;
    bool clamp = false;
    float clamp_min = 0.0f, clamp_max = 0.0f;
};

// Standard bias-corrected Adam over the given leaves; moment arithmetic runs
// in double. Leaves with bounds are clamped after the update. A non-finite
// gradient aborts, naming the leaf and iteration.
void adam_step(const std::vector<LeafUpdate>& leaves, AdamState& state, int iteration);

struct TraceRow {
    int iter;
    float l_re, l_e, l_s, l_i, total, gamma;
};

struct RunConfig {
    int iterations = 2500;
    float lr = 1e-2f;
    OptMode mode = OptMode::SeedOnly;
    StepRule rule = StepRule::Adam;
    LossWeights loss;
    GammaParam gamma;
    uint64_t rng_seed = 0;
    int snapshot_every = 0; // 0 disables snapshots
    std::string snapshot_dir;
    std::function<void(const TraceRow&)> on_iteration;
};

struct EnhanceResult {
    Tensor enhanced;     // cropped to the input dims
    Tensor reflectance;  // 3×H×W
    Tensor illumination; // 1×H×W
    float gamma_final;
    std::vector<TraceRow> trace;
    double mean_iter_seconds;
    std::string hash_r_before, hash_r_after;
    std::string hash_l_before, hash_l_after;
};

// One full optimization on a single image. The image is reflect-padded to a
// multiple of 2^n and results are cropped back. Seeds for both decoders are
// drawn back-to-back from one stream seeded with cfg.rng_seed.
EnhanceResult run(const Tensor& i_low, const DecoderWeights& weights_r,
                  const DecoderWeights& weights_l, const RunConfig& cfg);

} // namespace rseed
