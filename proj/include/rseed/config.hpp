#pragma once

#include "rseed/losses.hpp"
#include "rseed/optimizer.hpp"

#include <cstdint>
#include <string>

namespace rseed {

// One enhancement run, fully specified. Defaults are the paired preset:
// 2500 iterations, lr 1e-2, λ = 12/0.05/0.03/0.01, τ = 0.6, E = 0.6,
// γ₀ = 0.5, seed-only Adam.
struct EnhanceConfig {
    int iterations = 2500;
    float lr = 1e-2f;
    OptMode mode = OptMode::SeedOnly;
    InitSetting init = InitSetting::RandomAll;
    StepRule rule = StepRule::Adam;
    std::string weights_r;
    std::string weights_l;
    LossWeights loss;
    float gamma_init = 0.5f;
    uint64_t rng_seed = 0;
    int snapshot_every = 0;
    std::string snapshot_dir;

    EnhanceConfig() { loss.tau = 0.6f; }

    void validate() const;
};

// noref: 5000 iterations, τ 0.2; paired: 2500 iterations, τ 0.6;
// fast: 900 iterations, τ 0.6.
void apply_preset(EnhanceConfig& cfg, const std::string& preset);

// Flat key = value text, '#' comments. Unknown keys and malformed values are
// errors. parse applies on top of `base`, so a file may set only some keys.
EnhanceConfig parse_config(const std::string& text, const EnhanceConfig& base);
EnhanceConfig load_config(const std::string& path, const EnhanceConfig& base);

// Emits every key; parse(emit(c)) == c and emit is a fixed point, so
// --print-config output can be fed back via --config.
std::string emit_config(const EnhanceConfig& cfg);

const char* mode_name(OptMode m);
const char* init_name(InitSetting s);
const char* rule_name(StepRule r);
OptMode mode_from(const std::string& s);
InitSetting init_from(const std::string& s);
StepRule rule_from(const std::string& s);

} // namespace rseed
