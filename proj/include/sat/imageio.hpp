#pragma once

#include "sat/image.hpp"

#include <array>
#include <string>
#include <vector>

namespace sat::io {

// Frame images: PNG or JPEG by extension, returned as 8-bit RGB.
ImageU8 read_image_rgb(const std::string& path);

void write_png_rgb(const std::string& path, const ImageU8& img);

// Palette-indexed label maps (pixel value = object id, 0 = background).
struct LabelMap {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> ids;
};

LabelMap read_indexed_png(const std::string& path);
void write_indexed_png(const std::string& path, const LabelMap& labels);

// The standard segmentation-benchmark palette (bit-reversal color coding).
std::array<uint8_t, 3> palette_color(int id);

} // namespace sat::io
