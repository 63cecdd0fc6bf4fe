#pragma once

// Brute-force reference implementations used to freeze expected values.
// Everything here is independent of the library's implementation paths.

#include "sat/maskops.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace oracles {

// Recursive-style flood fill (explicit queue, 8-connectivity), independent of
// the library's component labeling.
struct FloodRegion {
    std::vector<std::pair<int, int>> pixels;
    int min_row, min_col, max_row, max_col;
};

inline std::vector<FloodRegion> flood_fill_regions(const sat::maskops::BinaryMask& m) {
    const int h = m.height, w = m.width;
    std::vector<int> label(static_cast<size_t>(h) * w, -1);
    std::vector<FloodRegion> regions;
    for (int sy = 0; sy < h; ++sy)
        for (int sx = 0; sx < w; ++sx) {
            if (!m.at(sy, sx) || label[static_cast<size_t>(sy) * w + sx] >= 0) continue;
            FloodRegion r{{}, sy, sx, sy, sx};
            std::vector<std::pair<int, int>> queue{{sy, sx}};
            label[static_cast<size_t>(sy) * w + sx] = static_cast<int>(regions.size());
            size_t head = 0;
            while (head < queue.size()) {
                const auto [y, x] = queue[head++];
                r.pixels.emplace_back(y, x);
                r.min_row = std::min(r.min_row, y);
                r.max_row = std::max(r.max_row, y);
                r.min_col = std::min(r.min_col, x);
                r.max_col = std::max(r.max_col, x);
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (!dy && !dx) continue;
                        const int ny = y + dy, nx = x + dx;
                        if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                        if (!m.at(ny, nx) || label[static_cast<size_t>(ny) * w + nx] >= 0) continue;
                        label[static_cast<size_t>(ny) * w + nx] = static_cast<int>(regions.size());
                        queue.emplace_back(ny, nx);
                    }
            }
            regions.push_back(std::move(r));
        }
    return regions;
}

// Eq.-style scores by direct summation (row-major, same accumulation order the
// scores are defined with).
inline double confidence_oracle(const sat::maskops::ProbabilityMap& p, const sat::maskops::BinaryMask& m) {
    double num = 0.0;
    size_t den = 0;
    for (size_t i = 0; i < m.values.size(); ++i)
        if (m.values[i]) {
            num += p.values[i];
            ++den;
        }
    return den ? num / static_cast<double>(den) : 0.0;
}

inline double concentration_oracle(const sat::maskops::BinaryMask& m) {
    const auto regions = flood_fill_regions(m);
    if (regions.empty()) return 0.0;
    size_t largest = 0, total = 0;
    for (const auto& r : regions) {
        largest = std::max(largest, r.pixels.size());
        total += r.pixels.size();
    }
    return static_cast<double>(largest) / static_cast<double>(total);
}

// All-pairs boundary matching (the library uses a distance transform).
inline double boundary_f_oracle(const sat::maskops::BinaryMask& pred, const sat::maskops::BinaryMask& gt,
                                int tolerance) {
    auto boundary = [](const sat::maskops::BinaryMask& m) {
        std::vector<std::pair<int, int>> pts;
        for (int y = 0; y < m.height; ++y)
            for (int x = 0; x < m.width; ++x) {
                if (!m.at(y, x)) continue;
                const bool edge = (y > 0 && !m.at(y - 1, x)) || (y + 1 < m.height && !m.at(y + 1, x)) ||
                                  (x > 0 && !m.at(y, x - 1)) || (x + 1 < m.width && !m.at(y, x + 1));
                if (edge) pts.emplace_back(y, x);
            }
        return pts;
    };
    const auto pb = boundary(pred);
    const auto gb = boundary(gt);
    if (pb.empty() && gb.empty()) return 1.0;
    if (pb.empty() || gb.empty()) return 0.0;
    const double tol2 = static_cast<double>(tolerance) * tolerance;
    auto matched = [&](const std::vector<std::pair<int, int>>& from,
                       const std::vector<std::pair<int, int>>& to) {
        size_t count = 0;
        for (const auto& [y, x] : from) {
            bool hit = false;
            for (const auto& [gy, gx] : to) {
                const double d = static_cast<double>(y - gy) * (y - gy) + static_cast<double>(x - gx) * (x - gx);
                if (d <= tol2) {
                    hit = true;
                    break;
                }
            }
            count += hit;
        }
        return count;
    };
    const double precision = static_cast<double>(matched(pb, gb)) / pb.size();
    const double recall = static_cast<double>(matched(gb, pb)) / gb.size();
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

inline double region_j_oracle(const sat::maskops::BinaryMask& a, const sat::maskops::BinaryMask& b) {
    size_t inter = 0, uni = 0;
    for (size_t i = 0; i < a.values.size(); ++i) {
        inter += a.values[i] && b.values[i];
        uni += a.values[i] || b.values[i];
    }
    return uni ? static_cast<double>(inter) / uni : 1.0;
}

} // namespace oracles
