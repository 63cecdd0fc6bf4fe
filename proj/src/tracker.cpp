#include "sat/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sat::tracker {

namespace {

Image prob_to_image(const maskops::ProbabilityMap& p) {
    Image img(1, p.height, p.width);
    img.data = p.values;
    return img;
}

maskops::BinaryMask binarize_image(const Image& img, double threshold) {
    maskops::BinaryMask m(img.height, img.width);
    for (size_t i = 0; i < img.data.size(); ++i) m.values[i] = img.data[i] >= threshold ? 1 : 0;
    return m;
}

// map-space box (align-corners grid over the crop) -> frame coordinates
geometry::Box map_box_to_frame(const geometry::Box& map_box, int map_size,
                               const geometry::CropTransform& t) {
    const double k = map_size > 1 ? static_cast<double>(t.output_size - 1) / (map_size - 1) : 1.0;
    const geometry::Box crop_box{map_box.cx * k, map_box.cy * k, map_box.w * k, map_box.h * k};
    return t.box_to_frame(crop_box);
}

geometry::Box clamp_box(const geometry::Box& b, int frame_h, int frame_w) {
    geometry::Box out = b;
    const double max_side = 2.0 * std::max(frame_h, frame_w);
    out.w = std::clamp(out.w, 4.0, max_side);
    out.h = std::clamp(out.h, 4.0, max_side);
    out.cx = std::clamp(out.cx, 0.0, frame_w - 1.0);
    out.cy = std::clamp(out.cy, 0.0, frame_h - 1.0);
    return out;
}

} // namespace

maskops::BinaryMask sample_mask_to_crop(const maskops::BinaryMask& frame_mask,
                                        const geometry::CropTransform& t, int map_size) {
    maskops::BinaryMask out(map_size, map_size);
    const double k = map_size > 1 ? t.output_size > 1 ? static_cast<double>(t.output_size - 1) / (map_size - 1)
                                                      : 0.0
                                  : 0.0;
    for (int i = 0; i < map_size; ++i) {
        const double y = t.to_frame_y(i * k);
        const int yi = static_cast<int>(std::lround(y));
        for (int j = 0; j < map_size; ++j) {
            const double x = t.to_frame_x(j * k);
            const int xi = static_cast<int>(std::lround(x));
            out.at(i, j) = (yi >= 0 && yi < frame_mask.height && xi >= 0 && xi < frame_mask.width)
                               ? frame_mask.at(yi, xi)
                               : 0;
        }
    }
    return out;
}

// ---- NetworkSegmenter ----

void NetworkSegmenter::init(TrackletState& ts, const Image& frame, const maskops::BinaryMask& init_mask,
                            const TrackerConfig& cfg) {
    const auto fill = channel_mean(frame);
    const auto template_t =
        geometry::make_search_region(ts.box, cfg.context_template, net_->config().template_input);
    const Image template_crop = geometry::crop_and_resize(frame, template_t, fill);
    ts.template_emb = nn::detach(net_->embed_template(segnet::SegNet::image_input(template_crop)));

    const auto saliency_t = geometry::make_search_region(ts.box, cfg.context_saliency, saliency_input());
    const Image saliency_crop = geometry::crop_and_resize(frame, saliency_t, fill);
    const maskops::BinaryMask mask_crop = sample_mask_to_crop(init_mask, saliency_t, saliency_input());
    ts.global = feedback::init_global(saliency_crop, mask_crop, net_->global_extractor(cfg.mu), global_input());
}

FramePrediction NetworkSegmenter::predict(TrackletState& ts, const Image& frame,
                                          const geometry::CropTransform& saliency_t,
                                          const geometry::CropTransform& similarity_t,
                                          const maskops::BinaryMask* /*gt_mask*/) {
    const auto fill = channel_mean(frame);
    const Image saliency_crop = geometry::crop_and_resize(frame, saliency_t, fill);
    const Image search_crop = geometry::crop_and_resize(frame, similarity_t, fill);

    nn::Var global_raw;
    if (ts.global.initialized) {
        nn::Tensor g({ts.global.channels, ts.global.height, ts.global.width});
        g.data = ts.global.values;
        global_raw = nn::constant(std::move(g));
    }
    const auto fwd = net_->forward(saliency_crop, search_crop, ts.template_emb, global_raw);

    FramePrediction pred;
    pred.prob_crop = fwd.output.prob_stride4;
    pred.reg_box_frame = similarity_t.box_to_frame(fwd.output.reg_box_crop);
    return pred;
}

feedback::GlobalFeature NetworkSegmenter::extract_global(const Image& crop) {
    return net_->extract_global_feature(crop);
}

// ---- OracleTrackerSegmenter ----

namespace {

feedback::GlobalFeature pooled_feature(const Image& crop, int cells) {
    feedback::GlobalFeature g;
    g.channels = crop.channels;
    g.height = cells;
    g.width = cells;
    g.values.assign(static_cast<size_t>(crop.channels) * cells * cells, 0.0);
    const int h = crop.height, w = crop.width;
    for (int c = 0; c < crop.channels; ++c)
        for (int cy = 0; cy < cells; ++cy) {
            const int y0 = cy * h / cells, y1 = (cy + 1) * h / cells;
            for (int cx = 0; cx < cells; ++cx) {
                const int x0 = cx * w / cells, x1 = (cx + 1) * w / cells;
                double s = 0.0;
                int n = 0;
                for (int y = y0; y < y1; ++y)
                    for (int x = x0; x < x1; ++x) {
                        s += crop.at(c, y, x);
                        ++n;
                    }
                g.values[(static_cast<size_t>(c) * cells + cy) * cells + cx] = n ? s / n : 0.0;
            }
        }
    return g;
}

} // namespace

void OracleTrackerSegmenter::init(TrackletState& ts, const Image& frame, const maskops::BinaryMask& init_mask,
                                  const TrackerConfig& cfg) {
    const auto fill = channel_mean(frame);
    const auto saliency_t = geometry::make_search_region(ts.box, cfg.context_saliency, opt_.saliency_size);
    const Image saliency_crop = geometry::crop_and_resize(frame, saliency_t, fill);
    const maskops::BinaryMask mask_crop = sample_mask_to_crop(init_mask, saliency_t, opt_.saliency_size);
    ts.global = feedback::init_global(
        saliency_crop, mask_crop,
        [this, mu = cfg.mu](const Image& img) {
            feedback::GlobalFeature g = pooled_feature(img, opt_.pooled_cells);
            g.step = mu;
            return g;
        },
        opt_.global_size);
}

FramePrediction OracleTrackerSegmenter::predict(TrackletState& ts, const Image& frame,
                                                const geometry::CropTransform& saliency_t,
                                                const geometry::CropTransform& similarity_t,
                                                const maskops::BinaryMask* gt_mask) {
    if (!gt_mask) throw std::invalid_argument("oracle segmenter requires per-frame ground truth");

    const maskops::BinaryMask gt_crop = sample_mask_to_crop(*gt_mask, saliency_t, opt_.crop_map_size);

    synthdata::OracleSegmenter oracle = opt_.oracle;
    oracle.seed = mix_seed(opt_.oracle.seed, static_cast<uint64_t>(ts.id) * 0x9e37 + 1);
    if (opt_.couple_to_global && ts.global.initialized) {
        const auto fill = channel_mean(frame);
        const Image saliency_crop = geometry::crop_and_resize(frame, saliency_t, fill);
        const maskops::BinaryMask ideal_mask =
            sample_mask_to_crop(*gt_mask, saliency_t, saliency_t.output_size);
        const Image ideal_input = resize_bilinear(feedback::apply_mask_filter(saliency_crop, ideal_mask),
                                                  opt_.global_size, opt_.global_size);
        const feedback::GlobalFeature ideal = pooled_feature(ideal_input, opt_.pooled_cells);
        double d = 0.0;
        for (size_t i = 0; i < ideal.values.size(); ++i) d += std::abs(ts.global.values[i] - ideal.values[i]);
        d /= static_cast<double>(ideal.values.size());
        const double fid = std::exp(-opt_.coupling_sharpness * d);
        const double q = oracle.quality_at(ts.frame_index) *
                         (opt_.coupling_quality_floor + (1.0 - opt_.coupling_quality_floor) * fid);
        oracle.quality_schedule = {{0, q}};
        oracle.flip_rate = std::min(0.5, oracle.flip_rate + opt_.coupling_flip_gain * (1.0 - fid));
    }

    FramePrediction pred;
    pred.prob_crop = synthdata::oracle_predict(gt_crop, oracle, ts.frame_index);

    // regression stand-in: the ground-truth box while the target stays inside
    // the similarity search region, otherwise hold the previous box
    const auto gt_box = maskops::mask_bounding_box(*gt_mask);
    geometry::Box reg = ts.box;
    if (gt_box) {
        const double half = similarity_t.side / 2;
        if (std::abs(gt_box->cx - similarity_t.cx) <= half && std::abs(gt_box->cy - similarity_t.cy) <= half) {
            reg = *gt_box;
            if (opt_.reg_noise > 0.0) {
                Rng rng(mix_seed(opt_.oracle.seed,
                                 0x4e6 + static_cast<uint64_t>(ts.frame_index) * 131 + ts.id));
                reg.cx += opt_.reg_noise * reg.w * rng.normal();
                reg.cy += opt_.reg_noise * reg.h * rng.normal();
                reg.w *= std::exp(opt_.reg_noise * rng.normal());
                reg.h *= std::exp(opt_.reg_noise * rng.normal());
            }
        }
    }
    pred.reg_box_frame = reg;
    return pred;
}

feedback::GlobalFeature OracleTrackerSegmenter::extract_global(const Image& crop) {
    return pooled_feature(crop, opt_.pooled_cells);
}

// ---- Tracker ----

TrackletState Tracker::init_tracklet(const Image& frame, const maskops::BinaryMask& init_mask, int id) const {
    if (init_mask.empty_mask()) throw std::invalid_argument("init_tracklet: empty init mask");
    if (init_mask.height != frame.height || init_mask.width != frame.width)
        throw std::invalid_argument("init_tracklet: mask does not match frame");
    TrackletState ts;
    ts.id = id;
    ts.box = *maskops::mask_bounding_box(init_mask); // union of components: init is ground truth
    ts.smoothed = {ts.box, cfg_.smoothing_lambda};
    ts.last_estimate = maskops::make_state(1.0, 1.0, cfg_.state_threshold);
    ts.frame_index = 0;
    seg_->init(ts, frame, init_mask, cfg_);
    return ts;
}

maskops::ProbabilityMap Tracker::step(TrackletState& ts, const Image& frame,
                                      const maskops::BinaryMask* gt_mask, FrameTelemetry* telemetry) const {
    // ground-truth crop anchor (upper-bound mode)
    if (cfg_.gt_box_mode && gt_mask) {
        if (const auto b = maskops::mask_bounding_box(*gt_mask)) ts.box = clamp_box(*b, frame.height, frame.width);
    }

    const auto saliency_t = geometry::make_search_region(ts.box, cfg_.context_saliency, seg_->saliency_input());
    const auto similarity_t =
        geometry::make_search_region(ts.box, cfg_.context_similarity, seg_->similarity_input());

    // (1) segmentation
    FramePrediction pred = seg_->predict(ts, frame, saliency_t, similarity_t, gt_mask);
    const int map_size = pred.prob_crop.height;

    // deferred global update (previous-frame mode)
    if (!cfg_.global_update_from_current && ts.pending_global) {
        if (cfg_.use_global_loop)
            feedback::update_global(ts.global, ts.pending_global->feature, ts.pending_global->s_state);
        ts.pending_global.reset();
    }

    // (2) estimation
    const maskops::BinaryMask mask_crop = binarize_image(prob_to_image(pred.prob_crop), cfg_.binarize_threshold);

    // paste to full frame
    const Image prob_full_res =
        resize_bilinear(prob_to_image(pred.prob_crop), saliency_t.output_size, saliency_t.output_size);
    maskops::ProbabilityMap full(frame.height, frame.width);
    full.values = geometry::paste_back(prob_full_res.data, saliency_t.output_size, saliency_t, frame.height,
                                       frame.width);

    maskops::StateEstimate est;
    if (cfg_.estimate_on_crop) {
        est = maskops::estimate_state(pred.prob_crop, mask_crop, cfg_.state_threshold);
    } else {
        est = maskops::estimate_state(full, maskops::binarize(full, cfg_.binarize_threshold),
                                      cfg_.state_threshold);
    }

    // (3) feedback: cropping strategy
    std::optional<geometry::Box> mask_box_frame;
    if (const auto mb = maskops::largest_component_box(mask_crop))
        mask_box_frame = map_box_to_frame(*mb, map_size, saliency_t);

    const geometry::Box reg_box = pred.reg_box_frame.value_or(ts.box);
    geometry::Box selected;
    feedback::BoxStrategy strategy;
    switch (cfg_.strategy) {
        case TrackerConfig::Strategy::kAuto:
            std::tie(selected, strategy) = feedback::select_box(est, mask_box_frame, reg_box, ts.smoothed);
            break;
        case TrackerConfig::Strategy::kMaskOnly:
            if (mask_box_frame) {
                selected = *mask_box_frame;
                strategy = feedback::BoxStrategy::kMask;
            } else {
                selected = ts.box;
                strategy = feedback::BoxStrategy::kRegression;
            }
            break;
        case TrackerConfig::Strategy::kRegressionOnly:
            selected = feedback::smooth_box(ts.smoothed, reg_box);
            strategy = feedback::BoxStrategy::kRegression;
            break;
        default:
            throw std::logic_error("unknown strategy");
    }
    if (!cfg_.gt_box_mode) ts.box = clamp_box(selected, frame.height, frame.width);
    if (strategy == feedback::BoxStrategy::kMask) ++ts.mask_selections;
    else ++ts.regression_selections;

    // (4) feedback: global modeling
    if (cfg_.use_global_loop && ts.global.initialized) {
        maskops::BinaryMask filter_mask;
        if (cfg_.gt_mask_filter && gt_mask) {
            filter_mask = sample_mask_to_crop(*gt_mask, saliency_t, saliency_t.output_size);
        } else {
            const Image up = resize_bilinear(prob_to_image(pred.prob_crop), saliency_t.output_size,
                                             saliency_t.output_size);
            filter_mask = binarize_image(up, cfg_.binarize_threshold);
        }
        const auto fill = channel_mean(frame);
        const Image saliency_crop = geometry::crop_and_resize(frame, saliency_t, fill);
        const Image masked = resize_bilinear(feedback::apply_mask_filter(saliency_crop, filter_mask),
                                             seg_->global_input(), seg_->global_input());
        const feedback::GlobalFeature f = seg_->extract_global(masked);
        if (cfg_.global_update_from_current) {
            feedback::update_global(ts.global, f.values, est.state_score);
        } else {
            ts.pending_global = PendingGlobalUpdate{f.values, est.state_score};
        }
    }

    ts.last_estimate = est;
    ts.frame_index += 1;
    if (telemetry) {
        telemetry->frame = ts.frame_index;
        telemetry->object_id = ts.id;
        telemetry->estimate = est;
        telemetry->strategy = strategy;
        telemetry->box = ts.box;
    }
    return full;
}

AggregatedLabels aggregate(const std::vector<maskops::ProbabilityMap>& per_object) {
    if (per_object.empty()) throw std::invalid_argument("aggregate: no maps");
    const int h = per_object.front().height, w = per_object.front().width;
    for (const auto& p : per_object)
        if (p.height != h || p.width != w) throw std::invalid_argument("aggregate: shape mismatch");

    AggregatedLabels out;
    out.height = h;
    out.width = w;
    out.label_map.assign(static_cast<size_t>(h) * w, 0);
    out.background_prob = maskops::ProbabilityMap(h, w);
    out.per_object_probs.assign(per_object.size(), maskops::ProbabilityMap(h, w));

    const size_t n = static_cast<size_t>(h) * w;
    for (size_t i = 0; i < n; ++i) {
        double b = 1.0;
        double sum = 0.0;
        for (const auto& p : per_object) {
            b *= 1.0 - p.values[i];
            sum += p.values[i];
        }
        const double denom = b + sum;
        const double bn = b / denom;
        out.background_prob.values[i] = bn;
        double best = bn;
        int label = 0;
        for (size_t k = 0; k < per_object.size(); ++k) {
            const double pn = per_object[k].values[i] / denom;
            out.per_object_probs[k].values[i] = pn;
            if (pn > best) { // ties go to background, then the lowest id
                best = pn;
                label = static_cast<int>(k) + 1;
            }
        }
        out.label_map[i] = static_cast<uint8_t>(label);
    }
    return out;
}

} // namespace sat::tracker
