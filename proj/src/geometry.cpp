#include "sat/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sat::geometry {

double box_iou(const Box& a, const Box& b) {
    if (!a.valid() || !b.valid()) return 0.0;
    const auto ca = a.corners();
    const auto cb = b.corners();
    const double iw = std::min(ca[2], cb[2]) - std::max(ca[0], cb[0]);
    const double ih = std::min(ca[3], cb[3]) - std::max(ca[1], cb[1]);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    const double uni = a.w * a.h + b.w * b.h - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

Box CropTransform::box_to_frame(const Box& b) const {
    const double s = side / output_size;
    return {to_frame_x(b.cx), to_frame_y(b.cy), b.w * s, b.h * s};
}

Box CropTransform::box_to_crop(const Box& b) const {
    const double s = scale();
    return {to_crop_x(b.cx), to_crop_y(b.cy), b.w * s, b.h * s};
}

CropTransform make_search_region(const Box& box, double context_factor, int output_size) {
    if (!box.valid()) throw std::invalid_argument("make_search_region: degenerate box");
    if (context_factor < 1.0) throw std::invalid_argument("make_search_region: context_factor must be >= 1");
    if (output_size <= 0) throw std::invalid_argument("make_search_region: output_size must be > 0");
    const double p = (box.w + box.h) / 2.0;
    const double side = context_factor * std::sqrt((box.w + p) * (box.h + p));
    return CropTransform{box.cx, box.cy, side, output_size};
}

namespace {

inline double sample_with_fill(const double* plane, int h, int w, double x, double y, double fill) {
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const double wx = x - x0;
    const double wy = y - y0;
    auto value = [&](int yy, int xx) -> double {
        if (yy < 0 || yy >= h || xx < 0 || xx >= w) return fill;
        return plane[static_cast<size_t>(yy) * w + xx];
    };
    const double v00 = value(y0, x0);
    const double v01 = value(y0, x0 + 1);
    const double v10 = value(y0 + 1, x0);
    const double v11 = value(y0 + 1, x0 + 1);
    return (1 - wy) * ((1 - wx) * v00 + wx * v01) + wy * ((1 - wx) * v10 + wx * v11);
}

inline double sample_clamped(const double* map, int n, double x, double y) {
    auto clamp_idx = [n](int i) { return std::clamp(i, 0, n - 1); };
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const double wx = x - x0;
    const double wy = y - y0;
    const int cx0 = clamp_idx(x0), cx1 = clamp_idx(x0 + 1);
    const int cy0 = clamp_idx(y0), cy1 = clamp_idx(y0 + 1);
    const double v00 = map[static_cast<size_t>(cy0) * n + cx0];
    const double v01 = map[static_cast<size_t>(cy0) * n + cx1];
    const double v10 = map[static_cast<size_t>(cy1) * n + cx0];
    const double v11 = map[static_cast<size_t>(cy1) * n + cx1];
    return (1 - wy) * ((1 - wx) * v00 + wx * v01) + wy * ((1 - wx) * v10 + wx * v11);
}

} // namespace

Image crop_and_resize(const Image& frame, const CropTransform& t, const std::array<double, 3>& fill) {
    if (frame.empty()) throw std::invalid_argument("crop_and_resize: empty frame");
    const int o = t.output_size;
    Image out(frame.channels, o, o);
    const size_t splane = frame.plane();
    const size_t oplane = out.plane();
    for (int v = 0; v < o; ++v) {
        const double y = t.to_frame_y(v);
        for (int u = 0; u < o; ++u) {
            const double x = t.to_frame_x(u);
            for (int c = 0; c < frame.channels; ++c) {
                out.data[c * oplane + static_cast<size_t>(v) * o + u] = sample_with_fill(
                    frame.data.data() + c * splane, frame.height, frame.width, x, y, fill[std::min(c, 2)]);
            }
        }
    }
    return out;
}

std::vector<double> paste_back(const std::vector<double>& crop_map, int crop_size, const CropTransform& t,
                               int frame_h, int frame_w) {
    if (crop_size != t.output_size || crop_map.size() != static_cast<size_t>(crop_size) * crop_size)
        throw std::invalid_argument("paste_back: crop map does not match transform output size");
    std::vector<double> out(static_cast<size_t>(frame_h) * frame_w, 0.0);
    const double o = t.output_size;
    for (int y = 0; y < frame_h; ++y) {
        const double v = t.to_crop_y(y);
        if (v < -0.5 || v > o - 0.5) continue; // center outside the source region
        for (int x = 0; x < frame_w; ++x) {
            const double u = t.to_crop_x(x);
            if (u < -0.5 || u > o - 0.5) continue;
            out[static_cast<size_t>(y) * frame_w + x] = sample_clamped(crop_map.data(), crop_size, u, v);
        }
    }
    return out;
}

} // namespace sat::geometry
