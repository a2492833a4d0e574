#pragma once

#include "rseed/tensor.hpp"

namespace rseed {

// 10·log10(1/MSE) over all channels, values in [0,1]; capped at 100 dB.
double psnr(const Tensor& a, const Tensor& b);

// Mean local SSIM over valid 11×11 window positions (Gaussian weights
// σ = 1.5, K1 = 0.01, K2 = 0.03, L = 1), averaged across channels.
double ssim(const Tensor& a, const Tensor& b);

} // namespace rseed
