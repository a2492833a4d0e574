#pragma once

#include "rseed/decoder.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace rseed {

// Weight file layout (little-endian):
//   magic "RSWT" | version u32 = 1
//   arch: n_stages u32, seed_channels u32, out_channels u32,
//         stage_channels count u32 + entries u32
//   layer count u32
//   per layer: name length u32, name bytes, rank u32, dims u32 each, raw f32 data
//   CRC32 (zlib polynomial) of all preceding bytes, u32
std::vector<uint8_t> serialize_weights(const DecoderWeights& w);
DecoderWeights deserialize_weights(const uint8_t* data, size_t size);

void save_weights(const DecoderWeights& w, const std::string& path);
DecoderWeights load_weights(const std::string& path);

// load_weights plus an arch equality check; the error names both archs.
DecoderWeights import_weights(const std::string& path, const DecoderArch& expected);

// Hex SHA-256 of the serialized form; the frozen-weight checks compare these.
std::string weights_sha256(const DecoderWeights& w);

} // namespace rseed
