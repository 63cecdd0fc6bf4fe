#include "sat/maskops.hpp"

#include <algorithm>
#include <stdexcept>

namespace sat::maskops {

size_t BinaryMask::area() const {
    size_t n = 0;
    for (uint8_t v : values) n += v;
    return n;
}

BinaryMask binarize(const ProbabilityMap& p, double threshold) {
    if (threshold <= 0.0 || threshold >= 1.0) throw std::invalid_argument("binarize: threshold must be in (0,1)");
    BinaryMask m(p.height, p.width);
    for (size_t i = 0; i < p.values.size(); ++i) m.values[i] = p.values[i] >= threshold ? 1 : 0;
    return m;
}

std::vector<ConnectedRegion> connected_components(const BinaryMask& m) {
    std::vector<ConnectedRegion> regions;
    const int h = m.height, w = m.width;
    if (h == 0 || w == 0) return regions;
    std::vector<uint8_t> visited(static_cast<size_t>(h) * w, 0);
    std::vector<std::pair<int, int>> stack;
    static constexpr int kDy[8] = {-1, -1, -1, 0, 0, 1, 1, 1};
    static constexpr int kDx[8] = {-1, 0, 1, -1, 1, -1, 0, 1};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const size_t idx = static_cast<size_t>(y) * w + x;
            if (!m.values[idx] || visited[idx]) continue;
            ConnectedRegion r;
            r.seed = {y, x};
            r.min_row = r.max_row = y;
            r.min_col = r.max_col = x;
            stack.clear();
            stack.emplace_back(y, x);
            visited[idx] = 1;
            while (!stack.empty()) {
                auto [cy, cx] = stack.back();
                stack.pop_back();
                r.pixels.emplace_back(cy, cx);
                r.min_row = std::min(r.min_row, cy);
                r.max_row = std::max(r.max_row, cy);
                r.min_col = std::min(r.min_col, cx);
                r.max_col = std::max(r.max_col, cx);
                for (int k = 0; k < 8; ++k) {
                    const int ny = cy + kDy[k];
                    const int nx = cx + kDx[k];
                    if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                    const size_t nidx = static_cast<size_t>(ny) * w + nx;
                    if (m.values[nidx] && !visited[nidx]) {
                        visited[nidx] = 1;
                        stack.emplace_back(ny, nx);
                    }
                }
            }
            r.area = r.pixels.size();
            regions.push_back(std::move(r));
        }
    }
    // stable: ties keep row-major seed order, i.e. topmost-leftmost first
    std::stable_sort(regions.begin(), regions.end(),
                     [](const ConnectedRegion& a, const ConnectedRegion& b) { return a.area > b.area; });
    return regions;
}

double confidence_score(const ProbabilityMap& p, const BinaryMask& m) {
    if (p.height != m.height || p.width != m.width)
        throw std::invalid_argument("confidence_score: shape mismatch");
    double num = 0.0;
    size_t den = 0;
    for (size_t i = 0; i < m.values.size(); ++i) {
        if (m.values[i]) {
            num += p.values[i];
            ++den;
        }
    }
    if (den == 0) return 0.0;
    return num / static_cast<double>(den);
}

double concentration_score(const BinaryMask& m) {
    const auto regions = connected_components(m);
    if (regions.empty()) return 0.0;
    size_t total = 0;
    for (const auto& r : regions) total += r.area;
    return static_cast<double>(regions.front().area) / static_cast<double>(total);
}

StateEstimate make_state(double confidence, double concentration, double threshold) {
    StateEstimate s;
    s.confidence = confidence;
    s.concentration = concentration;
    s.state_score = confidence * concentration;
    s.is_normal = s.state_score > threshold;
    return s;
}

StateEstimate estimate_state(const ProbabilityMap& p, const BinaryMask& m, double threshold) {
    return make_state(confidence_score(p, m), concentration_score(m), threshold);
}

std::optional<geometry::Box> largest_component_box(const BinaryMask& m) {
    const auto regions = connected_components(m);
    if (regions.empty()) return std::nullopt;
    const auto& r = regions.front();
    return geometry::Box::from_pixel_extents(r.min_row, r.min_col, r.max_row, r.max_col);
}

std::optional<geometry::Box> mask_bounding_box(const BinaryMask& m) {
    int r0 = m.height, c0 = m.width, r1 = -1, c1 = -1;
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x)
            if (m.at(y, x)) {
                r0 = std::min(r0, y);
                c0 = std::min(c0, x);
                r1 = std::max(r1, y);
                c1 = std::max(c1, x);
            }
    if (r1 < 0) return std::nullopt;
    return geometry::Box::from_pixel_extents(r0, c0, r1, c1);
}

} // namespace sat::maskops
