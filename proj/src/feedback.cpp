#include "sat/feedback.hpp"

#include <cmath>
#include <stdexcept>

namespace sat::feedback {

geometry::Box smooth_box(SmoothedBoxState& sm, const geometry::Box& reg_box) {
    if (!reg_box.valid() || !std::isfinite(reg_box.cx) || !std::isfinite(reg_box.cy) ||
        !std::isfinite(reg_box.w) || !std::isfinite(reg_box.h))
        return sm.box;
    const double lam = sm.smoothing;
    const geometry::Box& prev = sm.box;
    const double cx = (1 - lam) * prev.cx + lam * reg_box.cx;
    const double cy = (1 - lam) * prev.cy + lam * reg_box.cy;
    const double log_s = (1 - lam) * std::log(std::sqrt(prev.w * prev.h)) +
                         lam * std::log(std::sqrt(reg_box.w * reg_box.h));
    const double log_r = (1 - lam) * std::log(prev.w / prev.h) + lam * std::log(reg_box.w / reg_box.h);
    const double s = std::exp(log_s);
    const double r = std::exp(log_r);
    // s = sqrt(w*h), r = w/h  =>  w = s*sqrt(r), h = s/sqrt(r)
    sm.box = {cx, cy, s * std::sqrt(r), s / std::sqrt(r)};
    return sm.box;
}

std::pair<geometry::Box, BoxStrategy> select_box(const maskops::StateEstimate& state,
                                                 const std::optional<geometry::Box>& mask_box,
                                                 const geometry::Box& reg_box, SmoothedBoxState& sm) {
    const geometry::Box smoothed = smooth_box(sm, reg_box); // keep the fallback warm
    if (state.is_normal && mask_box.has_value()) return {*mask_box, BoxStrategy::kMask};
    return {smoothed, BoxStrategy::kRegression};
}

bool update_global(GlobalFeature& g, const std::vector<double>& f, double s_state) {
    if (!g.initialized) throw std::logic_error("update_global: global feature not initialized");
    if (f.size() != g.values.size()) throw std::invalid_argument("update_global: shape mismatch");
    for (double v : f) {
        if (!std::isfinite(v)) {
            ++g.skipped_updates;
            return false;
        }
    }
    const double a = s_state * g.step;
    if (a == 0.0) return true;
    for (size_t i = 0; i < g.values.size(); ++i) g.values[i] = (1 - a) * g.values[i] + a * f[i];
    return true;
}

Image apply_mask_filter(const Image& crop, const maskops::BinaryMask& mask) {
    if (crop.height != mask.height || crop.width != mask.width)
        throw std::invalid_argument("apply_mask_filter: shape mismatch");
    Image out = crop;
    const size_t plane = crop.plane();
    for (int c = 0; c < crop.channels; ++c)
        for (size_t i = 0; i < plane; ++i) out.data[c * plane + i] *= mask.values[i];
    return out;
}

GlobalFeature init_global(const Image& first_frame_crop, const maskops::BinaryMask& init_mask,
                          const FeatureExtractor& extractor, int global_input) {
    if (init_mask.empty_mask()) throw std::invalid_argument("init_global: empty init mask");
    const Image filtered = apply_mask_filter(first_frame_crop, init_mask);
    GlobalFeature g = extractor(resize_bilinear(filtered, global_input, global_input));
    g.initialized = true;
    return g;
}

} // namespace sat::feedback
