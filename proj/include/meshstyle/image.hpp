//
// PNG input and output. Images are 3-channel feature maps with values in
// [0, 1]; alpha is dropped on load.
//

#ifndef MESHSTYLE_IMAGE_HPP
#define MESHSTYLE_IMAGE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "network.hpp"

namespace meshstyle {

// Reads 8 or 16 bit gray, RGB or RGBA (palettes are expanded).
feature_map<float> load_png(const std::string& filename);

// Writes 8 bit RGB from interleaved bytes.
void save_png(const std::string& filename, int width, int height,
    const std::vector<uint8_t>& rgb);

// Bilinear resampling with half-pixel centers and clamped borders.
feature_map<float> resize_bilinear(const feature_map<float>& image, int width, int height);

// Clamp to [0, 1] then round half up to 8 bits.
uint8_t quantize(double value);

}  // namespace meshstyle

#endif
