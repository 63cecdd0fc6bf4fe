#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace sat {

// Planar (channel-major) floating point image, values nominally in [0, 1].
struct Image {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> data; // size = channels * height * width

    Image() = default;
    Image(int c, int h, int w, double fill = 0.0)
        : channels(c), height(h), width(w), data(static_cast<size_t>(c) * h * w, fill) {}

    bool empty() const { return data.empty(); }
    size_t plane() const { return static_cast<size_t>(height) * width; }

    double& at(int c, int y, int x) { return data[c * plane() + static_cast<size_t>(y) * width + x]; }
    double at(int c, int y, int x) const { return data[c * plane() + static_cast<size_t>(y) * width + x]; }
};

// 8-bit interleaved image as read from / written to files.
struct ImageU8 {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<uint8_t> data; // size = height * width * channels, row-major interleaved

    ImageU8() = default;
    ImageU8(int c, int h, int w, uint8_t fill = 0)
        : channels(c), height(h), width(w), data(static_cast<size_t>(c) * h * w, fill) {}

    bool empty() const { return data.empty(); }
    uint8_t& at(int y, int x, int c) { return data[(static_cast<size_t>(y) * width + x) * channels + c]; }
    uint8_t at(int y, int x, int c) const { return data[(static_cast<size_t>(y) * width + x) * channels + c]; }
};

Image to_float(const ImageU8& u8);
ImageU8 to_u8(const Image& img);

std::array<double, 3> channel_mean(const Image& img);

// Bilinear resize with align-corners sampling (endpoints map to endpoints).
Image resize_bilinear(const Image& src, int out_h, int out_w);

} // namespace sat
