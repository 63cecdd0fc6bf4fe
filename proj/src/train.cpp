#include "sat/train.hpp"

#include "sat/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace sat::train {

void TrainConfig::validate() const {
    if (warmup_epochs >= epochs) throw std::invalid_argument("TrainConfig: warmup_epochs must be < epochs");
    if (aux_weight_s8 < 0 || aux_weight_s16 < 0) throw std::invalid_argument("TrainConfig: negative aux weight");
    if (batch_size <= 0 || samples_per_epoch <= 0 || epochs <= 0)
        throw std::invalid_argument("TrainConfig: counts must be positive");
    if (lr_start <= 0 || lr_peak <= 0 || momentum < 0 || momentum >= 1)
        throw std::invalid_argument("TrainConfig: bad optimizer settings");
}

double lr_at(int step, const TrainConfig& cfg) {
    const int warm = cfg.warmup_steps();
    const int total = cfg.total_steps();
    if (step < warm) return cfg.lr_start + (cfg.lr_peak - cfg.lr_start) * static_cast<double>(step) / warm;
    const int rest = std::max(1, total - warm);
    const double u = std::min(1.0, static_cast<double>(step - warm) / rest);
    return cfg.lr_peak * 0.5 * (1.0 + std::cos(3.14159265358979323846 * u));
}

nn::Tensor downsample_mask(const maskops::BinaryMask& m, int out_size) {
    const int h = m.height, w = m.width;
    // separable fractional coverage weights: output cell u covers the input
    // span [u*S/O, (u+1)*S/O) in pixel-boundary space
    auto axis_weights = [](int in, int out) {
        std::vector<std::vector<std::pair<int, double>>> wts(out);
        const double ratio = static_cast<double>(in) / out;
        for (int u = 0; u < out; ++u) {
            const double lo = u * ratio, hi = (u + 1) * ratio;
            for (int i = static_cast<int>(std::floor(lo)); i < std::min(in, static_cast<int>(std::ceil(hi))); ++i) {
                const double overlap = std::min<double>(hi, i + 1) - std::max<double>(lo, i);
                if (overlap > 0) wts[u].emplace_back(i, overlap / ratio);
            }
        }
        return wts;
    };
    const auto wy = axis_weights(h, out_size);
    const auto wx = axis_weights(w, out_size);
    nn::Tensor out({1, out_size, out_size});
    for (int oy = 0; oy < out_size; ++oy)
        for (int ox = 0; ox < out_size; ++ox) {
            double v = 0.0;
            for (const auto& [iy, fy] : wy[oy])
                for (const auto& [ix, fx] : wx[ox]) v += fy * fx * m.at(iy, ix);
            out.data[static_cast<size_t>(oy) * out_size + ox] = v >= 0.5 ? 1.0 : 0.0;
        }
    return out;
}

namespace {

geometry::Box jittered_box(const geometry::Box& b, double jitter, Rng& rng) {
    if (jitter <= 0.0) return b;
    geometry::Box out = b;
    out.cx += jitter * b.w * rng.uniform(-1.0, 1.0);
    out.cy += jitter * b.h * rng.uniform(-1.0, 1.0);
    out.w *= std::exp(jitter * rng.uniform(-1.0, 1.0));
    out.h *= std::exp(jitter * rng.uniform(-1.0, 1.0));
    return out;
}

} // namespace

TrainingPair make_pair(const synthdata::Sequence& seq, int object, int target_frame, int search_frame,
                       const segnet::NetworkConfig& ncfg, double crop_jitter, Rng& rng) {
    const auto& target_img = seq.frames[target_frame];
    const auto& search_img = seq.frames[search_frame];
    const auto& target_mask = seq.masks[target_frame][object];
    const auto& search_mask = seq.masks[search_frame][object];
    const auto target_box = maskops::mask_bounding_box(target_mask);
    const auto search_box = maskops::mask_bounding_box(search_mask);
    if (!target_box || !search_box) throw std::invalid_argument("make_pair: empty mask");

    const auto fill_t = channel_mean(target_img);
    const auto fill_s = channel_mean(search_img);

    TrainingPair pair;

    // target side: template for correlation + background-filtered global input
    const auto template_t = geometry::make_search_region(*target_box, 1.0, ncfg.template_input);
    pair.template_crop = geometry::crop_and_resize(target_img, template_t, fill_t);
    const auto target_sal_t = geometry::make_search_region(*target_box, 1.0, ncfg.saliency_input);
    const Image target_sal = geometry::crop_and_resize(target_img, target_sal_t, fill_t);
    const maskops::BinaryMask target_mask_crop =
        tracker::sample_mask_to_crop(target_mask, target_sal_t, ncfg.saliency_input);
    pair.global_crop = resize_bilinear(feedback::apply_mask_filter(target_sal, target_mask_crop),
                                       ncfg.global_input, ncfg.global_input);

    // search side: jittered crops and per-stride supervision
    const geometry::Box anchor = jittered_box(*search_box, crop_jitter, rng);
    const auto sal_t = geometry::make_search_region(anchor, 1.0, ncfg.saliency_input);
    const auto sim_t = geometry::make_search_region(anchor, 2.0, ncfg.similarity_input);
    pair.saliency_crop = geometry::crop_and_resize(search_img, sal_t, fill_s);
    pair.search_crop = geometry::crop_and_resize(search_img, sim_t, fill_s);
    const maskops::BinaryMask mask_crop =
        tracker::sample_mask_to_crop(search_mask, sal_t, ncfg.saliency_input);
    pair.gt4 = downsample_mask(mask_crop, segnet::NetworkConfig::feature_size(ncfg.saliency_input, 4));
    pair.gt8 = downsample_mask(mask_crop, segnet::NetworkConfig::feature_size(ncfg.saliency_input, 8));
    pair.gt16 = downsample_mask(mask_crop, segnet::NetworkConfig::feature_size(ncfg.saliency_input, 16));
    pair.gt_box_search_crop = sim_t.box_to_crop(*search_box);
    return pair;
}

std::optional<TrainingPair> sample_pair(const std::vector<synthdata::Sequence>& data,
                                        const segnet::NetworkConfig& ncfg, double crop_jitter, Rng& rng) {
    for (int attempt = 0; attempt < 32; ++attempt) {
        const auto& seq = data[rng.index(data.size())];
        if (seq.frames.empty() || seq.object_count() == 0) continue;
        const int object = static_cast<int>(rng.index(seq.object_count()));
        const int ft = static_cast<int>(rng.index(seq.frames.size()));
        const int fs = static_cast<int>(rng.index(seq.frames.size()));
        if (seq.masks[ft][object].empty_mask() || seq.masks[fs][object].empty_mask()) continue;
        return make_pair(seq, object, ft, fs, ncfg, crop_jitter, rng);
    }
    return std::nullopt;
}

nn::Var loss_graph(const segnet::ForwardGraph& g, const nn::Tensor& gt4, const nn::Tensor& gt8,
                   const nn::Tensor& gt16, double w8, double w16) {
    nn::Var l = nn::bce_with_logits_mean(g.logits4, gt4);
    l = nn::add(l, nn::scale(nn::bce_with_logits_mean(g.logits8, gt8), w8));
    l = nn::add(l, nn::scale(nn::bce_with_logits_mean(g.logits16, gt16), w16));
    return l;
}

double soft_iou(const maskops::ProbabilityMap& p, const nn::Tensor& target) {
    if (p.values.size() != target.size()) throw std::invalid_argument("soft_iou: shape mismatch");
    double inter = 0.0, uni = 0.0;
    for (size_t i = 0; i < p.values.size(); ++i) {
        const double a = p.values[i], b = target.data[i];
        inter += a * b;
        uni += a + b - a * b;
    }
    return uni > 0.0 ? inter / uni : 1.0;
}

segnet::ForwardGraph forward_pair(const segnet::SegNet& net, const TrainingPair& pair) {
    const nn::Var templ = net.embed_template(segnet::SegNet::image_input(pair.template_crop));
    const nn::Var global_raw = net.global_encode(segnet::SegNet::image_input(pair.global_crop));
    return net.forward(pair.saliency_crop, pair.search_crop, templ, global_raw);
}

TrainState::TrainState(segnet::SegNet& net, const TrainConfig& cfg)
    : cfg_(cfg), opt_(net.params(), cfg.momentum), rng_(mix_seed(cfg.seed, 0x42a1)) {
    cfg_.validate();
}

EpochMetrics TrainState::train_epoch(segnet::SegNet& net, const std::vector<synthdata::Sequence>& data,
                                     const std::vector<TrainingPair>* holdout) {
    EpochMetrics em;
    const int steps = cfg_.steps_per_epoch();
    for (int s = 0; s < steps; ++s) {
        const double lr = lr_at(step_, cfg_);
        opt_.zero_grad();
        StepMetrics sm;
        sm.step = step_;
        sm.lr = lr;
        for (int b = 0; b < cfg_.batch_size; ++b) {
            const auto pair = sample_pair(data, net.config(), cfg_.crop_jitter, rng_);
            if (!pair) throw std::runtime_error("train_epoch: could not sample a non-empty pair");
            const auto g = forward_pair(net, *pair);
            const nn::Var l4 = nn::bce_with_logits_mean(g.logits4, pair->gt4);
            const nn::Var l8 = nn::bce_with_logits_mean(g.logits8, pair->gt8);
            const nn::Var l16 = nn::bce_with_logits_mean(g.logits16, pair->gt16);
            nn::Var total = nn::add(l4, nn::add(nn::scale(l8, cfg_.aux_weight_s8),
                                                nn::scale(l16, cfg_.aux_weight_s16)));
            sm.loss_s4 += l4->value.data[0] / cfg_.batch_size;
            sm.loss_s8 += l8->value.data[0] / cfg_.batch_size;
            sm.loss_s16 += l16->value.data[0] / cfg_.batch_size;
            sm.loss += total->value.data[0] / cfg_.batch_size;
            nn::backward(nn::scale(total, 1.0 / cfg_.batch_size));
        }
        if (!std::isfinite(sm.loss)) {
            std::ostringstream os;
            os << "train_epoch: non-finite loss at step " << step_ << " (lr " << lr << ")";
            throw std::runtime_error(os.str());
        }
        opt_.step(lr);
        ++step_;
        em.mean_loss += sm.loss / steps;
        em.mean_s4 += sm.loss_s4 / steps;
        em.mean_s8 += sm.loss_s8 / steps;
        em.mean_s16 += sm.loss_s16 / steps;
        em.steps.push_back(sm);
    }
    if (holdout && !holdout->empty()) {
        double iou = 0.0;
        for (const auto& pair : *holdout) {
            const auto g = forward_pair(net, pair);
            iou += soft_iou(g.output.prob_stride4, pair.gt4);
        }
        em.val_soft_iou = iou / holdout->size();
    }
    return em;
}

void freeze_stage1(segnet::SegNet& net) {
    net.set_trainable("similarity.", false);
    net.set_trainable("reg.", false);
}

double pretrain_similarity(segnet::SegNet& net, const std::vector<synthdata::Sequence>& data, int steps,
                           double lr, double momentum, int batch_size, double crop_jitter, Rng& rng) {
    nn::SgdMomentum opt(net.params(), momentum);
    const int rsz = net.response_size();
    double last_loss = 0.0;
    for (int s = 0; s < steps; ++s) {
        opt.zero_grad();
        last_loss = 0.0;
        for (int b = 0; b < batch_size; ++b) {
            const auto pair = sample_pair(data, net.config(), crop_jitter, rng);
            if (!pair) continue;
            const auto g = forward_pair(net, *pair);

            // positives: response locations inside the half-shrunk target box
            const auto box = pair->gt_box_search_crop;
            nn::Tensor cls({1, rsz, rsz});
            nn::Tensor ltrb({4, rsz, rsz});
            nn::Tensor pos({rsz, rsz});
            int num_pos = 0;
            double best_d = 1e18;
            int best_i = 0;
            for (int i = 0; i < rsz; ++i)
                for (int j = 0; j < rsz; ++j) {
                    const double y = net.response_to_crop(i);
                    const double x = net.response_to_crop(j);
                    const double dx = std::abs(x - box.cx), dy = std::abs(y - box.cy);
                    const double d = dx * dx + dy * dy;
                    if (d < best_d) {
                        best_d = d;
                        best_i = i * rsz + j;
                    }
                    if (dx <= box.w / 4 && dy <= box.h / 4) {
                        cls.data[static_cast<size_t>(i) * rsz + j] = 1.0;
                        pos.data[static_cast<size_t>(i) * rsz + j] = 1.0;
                        ++num_pos;
                    }
                }
            if (num_pos == 0) {
                cls.data[best_i] = 1.0;
                pos.data[best_i] = 1.0;
            }
            const int plane = rsz * rsz;
            for (int i = 0; i < plane; ++i) {
                if (pos.data[i] == 0.0) continue;
                const double y = net.response_to_crop(i / rsz);
                const double x = net.response_to_crop(i % rsz);
                const auto c = box.corners();
                // offsets trained in log space against the stride-16 scale
                ltrb.data[0 * plane + i] = std::log(std::max(1.0, x - c[0]) / 16.0);
                ltrb.data[1 * plane + i] = std::log(std::max(1.0, y - c[1]) / 16.0);
                ltrb.data[2 * plane + i] = std::log(std::max(1.0, c[2] - x) / 16.0);
                ltrb.data[3 * plane + i] = std::log(std::max(1.0, c[3] - y) / 16.0);
            }
            nn::Var loss = nn::add(nn::bce_with_logits_mean(g.quality_logits, cls),
                                   nn::masked_l1_mean(g.ltrb_raw, ltrb, pos));
            last_loss += loss->value.data[0] / batch_size;
            nn::backward(nn::scale(loss, 1.0 / batch_size));
        }
        opt.step(lr);
    }
    return last_loss;
}

} // namespace sat::train
