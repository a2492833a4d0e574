#pragma once

#include "rseed/tensor.hpp"

#include <string>

namespace rseed {

// Reads an 8-bit PNG or JPEG (sniffed by magic bytes) into a 3×H×W tensor in
// [0,1]. Grayscale replicates to 3 channels; alpha is dropped.
Tensor read_image(const std::string& path);

// Writes 8-bit PNG; 3×H×W as RGB, 1×H×W as grayscale. Values map to
// round(v·255), clamped to [0,255].
void write_png(const std::string& path, const Tensor& img);

Tensor resize_bilinear(const Tensor& img, int out_h, int out_w);
Tensor center_crop(const Tensor& img, int h, int w);

// Shorter side scaled to `size`, then center-cropped square.
Tensor resize_cover(const Tensor& img, int size);

// Reflect-pads on the bottom/right up to the next multiple; rejects images
// too small to reflect that far.
Tensor pad_reflect_to_multiple(const Tensor& img, int multiple);
Tensor crop_top_left(const Tensor& img, int h, int w);

} // namespace rseed
