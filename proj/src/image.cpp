#include "sat/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sat {

Image to_float(const ImageU8& u8) {
    Image out(u8.channels, u8.height, u8.width);
    const size_t plane = out.plane();
    for (int y = 0; y < u8.height; ++y)
        for (int x = 0; x < u8.width; ++x)
            for (int c = 0; c < u8.channels; ++c)
                out.data[c * plane + static_cast<size_t>(y) * u8.width + x] =
                    u8.data[(static_cast<size_t>(y) * u8.width + x) * u8.channels + c] / 255.0;
    return out;
}

ImageU8 to_u8(const Image& img) {
    ImageU8 out(img.channels, img.height, img.width);
    const size_t plane = img.plane();
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c) {
                double v = img.data[c * plane + static_cast<size_t>(y) * img.width + x];
                v = std::clamp(v, 0.0, 1.0);
                out.data[(static_cast<size_t>(y) * img.width + x) * img.channels + c] =
                    static_cast<uint8_t>(std::lround(v * 255.0));
            }
    return out;
}

std::array<double, 3> channel_mean(const Image& img) {
    std::array<double, 3> mean{0.0, 0.0, 0.0};
    if (img.empty()) return mean;
    const size_t plane = img.plane();
    for (int c = 0; c < std::min(img.channels, 3); ++c) {
        double s = 0.0;
        for (size_t i = 0; i < plane; ++i) s += img.data[c * plane + i];
        mean[c] = s / static_cast<double>(plane);
    }
    if (img.channels == 1) mean[1] = mean[2] = mean[0];
    return mean;
}

Image resize_bilinear(const Image& src, int out_h, int out_w) {
    if (src.empty()) throw std::invalid_argument("resize_bilinear: empty image");
    if (out_h <= 0 || out_w <= 0) throw std::invalid_argument("resize_bilinear: bad output size");
    Image out(src.channels, out_h, out_w);
    const double sy = out_h > 1 ? static_cast<double>(src.height - 1) / (out_h - 1) : 0.0;
    const double sx = out_w > 1 ? static_cast<double>(src.width - 1) / (out_w - 1) : 0.0;
    const size_t splane = src.plane();
    const size_t oplane = out.plane();
    for (int oy = 0; oy < out_h; ++oy) {
        const double fy = oy * sy;
        const int y0 = std::min(static_cast<int>(fy), src.height - 1);
        const int y1 = std::min(y0 + 1, src.height - 1);
        const double wy = fy - y0;
        for (int ox = 0; ox < out_w; ++ox) {
            const double fx = ox * sx;
            const int x0 = std::min(static_cast<int>(fx), src.width - 1);
            const int x1 = std::min(x0 + 1, src.width - 1);
            const double wx = fx - x0;
            for (int c = 0; c < src.channels; ++c) {
                const double* p = src.data.data() + c * splane;
                const double v00 = p[static_cast<size_t>(y0) * src.width + x0];
                const double v01 = p[static_cast<size_t>(y0) * src.width + x1];
                const double v10 = p[static_cast<size_t>(y1) * src.width + x0];
                const double v11 = p[static_cast<size_t>(y1) * src.width + x1];
                out.data[c * oplane + static_cast<size_t>(oy) * out_w + ox] =
                    (1 - wy) * ((1 - wx) * v00 + wx * v01) + wy * ((1 - wx) * v10 + wx * v11);
            }
        }
    }
    return out;
}

} // namespace sat
