#pragma once

#include "sat/geometry.hpp"
#include "sat/maskops.hpp"

#include <functional>
#include <string>
#include <vector>

namespace sat::feedback {

// Temporally smoothed regression box. Center is blended linearly, scale
// sqrt(w*h) and ratio w/h in the log domain, all with the same weight.
struct SmoothedBoxState {
    geometry::Box box;
    double smoothing = 0.3; // lambda, weight of the new observation
};

// Running target representation G updated by an EMA stepped with mu and
// weighted by the per-frame state score.
struct GlobalFeature {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> values;
    double step = 0.5; // mu
    bool initialized = false;
    int skipped_updates = 0; // non-finite inputs rejected so far
};

enum class BoxStrategy { kMask, kRegression };

inline const char* strategy_name(BoxStrategy s) { return s == BoxStrategy::kMask ? "mask" : "regression"; }

// Blend reg_box into the smoothed state and return the new smoothed box.
// A degenerate reg_box leaves the state unchanged.
geometry::Box smooth_box(SmoothedBoxState& sm, const geometry::Box& reg_box);

// Cropping-strategy switch: mask-box for normal states, smoothed
// regression-box otherwise. The smoothed state is advanced in both cases.
std::pair<geometry::Box, BoxStrategy> select_box(const maskops::StateEstimate& state,
                                                 const std::optional<geometry::Box>& mask_box,
                                                 const geometry::Box& reg_box, SmoothedBoxState& sm);

using FeatureExtractor = std::function<GlobalFeature(const Image&)>;

// G_t = (1 - s*mu) * G_{t-1} + s*mu * f. Returns false (and counts a skipped
// update) when f is non-finite.
bool update_global(GlobalFeature& g, const std::vector<double>& f, double s_state);

// Applies the initial ground-truth mask to the crop (broadcast over channels)
// and extracts G_0. The crop is resized to global_input before extraction.
GlobalFeature init_global(const Image& first_frame_crop, const maskops::BinaryMask& init_mask,
                          const FeatureExtractor& extractor, int global_input);

// Background filtering: per-channel elementwise product with the mask.
Image apply_mask_filter(const Image& crop, const maskops::BinaryMask& mask);

} // namespace sat::feedback
