#pragma once

#include "sat/geometry.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace sat::maskops {

// Per-pixel mask prediction scores in [0, 1].
struct ProbabilityMap {
    int height = 0;
    int width = 0;
    std::vector<double> values;

    ProbabilityMap() = default;
    ProbabilityMap(int h, int w, double fill = 0.0) : height(h), width(w), values(static_cast<size_t>(h) * w, fill) {}

    double& at(int y, int x) { return values[static_cast<size_t>(y) * width + x]; }
    double at(int y, int x) const { return values[static_cast<size_t>(y) * width + x]; }
};

struct BinaryMask {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> values; // 0 or 1

    BinaryMask() = default;
    BinaryMask(int h, int w, uint8_t fill = 0) : height(h), width(w), values(static_cast<size_t>(h) * w, fill) {}

    uint8_t& at(int y, int x) { return values[static_cast<size_t>(y) * width + x]; }
    uint8_t at(int y, int x) const { return values[static_cast<size_t>(y) * width + x]; }
    size_t area() const;
    bool empty_mask() const { return area() == 0; }
};

struct ConnectedRegion {
    std::vector<std::pair<int, int>> pixels; // (row, col), in discovery order
    size_t area = 0;
    int min_row = 0, min_col = 0, max_row = 0, max_col = 0;
    std::pair<int, int> seed; // topmost-leftmost pixel
};

struct StateEstimate {
    double confidence = 0.0;    // mean foreground prediction score
    double concentration = 0.0; // largest-component area fraction
    double state_score = 0.0;   // confidence * concentration
    bool is_normal = false;
};

inline constexpr double kDefaultBinarizeThreshold = 0.5;
inline constexpr double kDefaultStateThreshold = 0.85;

// value 1 iff p >= threshold (inclusive)
BinaryMask binarize(const ProbabilityMap& p, double threshold = kDefaultBinarizeThreshold);

// Maximal 8-connected foreground regions, ordered by area descending, ties by
// topmost-leftmost seed pixel.
std::vector<ConnectedRegion> connected_components(const BinaryMask& m);

// mean of p over foreground pixels of m; 0 for an empty mask
double confidence_score(const ProbabilityMap& p, const BinaryMask& m);

// largest component area / total foreground area; 0 for an empty mask
double concentration_score(const BinaryMask& m);

StateEstimate make_state(double confidence, double concentration, double threshold = kDefaultStateThreshold);

StateEstimate estimate_state(const ProbabilityMap& p, const BinaryMask& m, double threshold = kDefaultStateThreshold);

// Minimal bounding box of the largest 8-connected component; nullopt when the
// mask is empty (no mask-box available, callers fall back to regression).
std::optional<geometry::Box> largest_component_box(const BinaryMask& m);

// Minimal bounding box of all foreground pixels (union over components).
std::optional<geometry::Box> mask_bounding_box(const BinaryMask& m);

} // namespace sat::maskops
