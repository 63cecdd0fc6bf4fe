#pragma once

#include "sat/feedback.hpp"
#include "sat/geometry.hpp"
#include "sat/image.hpp"
#include "sat/maskops.hpp"
#include "sat/segnet.hpp"
#include "sat/synthdata.hpp"

#include <memory>
#include <optional>
#include <vector>

namespace sat::tracker {

struct TrackerConfig {
    double state_threshold = maskops::kDefaultStateThreshold;
    double binarize_threshold = maskops::kDefaultBinarizeThreshold;
    double smoothing_lambda = 0.3;
    double mu = 0.5;
    double context_saliency = 1.0;
    double context_similarity = 2.0;
    double context_template = 1.0;

    enum class Strategy { kAuto, kMaskOnly, kRegressionOnly };
    Strategy strategy = Strategy::kAuto;

    bool use_global_loop = true;
    bool gt_box_mode = false;            // crop from ground-truth boxes (upper bound)
    bool gt_mask_filter = false;         // filter the global branch with ground truth
    bool global_update_from_current = true; // false: use the previous frame's prediction
    bool estimate_on_crop = true;           // false: estimate on the pasted full-frame map
};

struct PendingGlobalUpdate {
    std::vector<double> feature;
    double s_state = 0.0;
};

struct TrackletState {
    int id = 0;
    geometry::Box box;
    feedback::SmoothedBoxState smoothed;
    feedback::GlobalFeature global;
    nn::Var template_emb; // cached first-frame embedding (network segmenter)
    maskops::StateEstimate last_estimate;
    int frame_index = 0;

    // telemetry
    int mask_selections = 0;
    int regression_selections = 0;
    std::optional<PendingGlobalUpdate> pending_global;
};

struct FrameTelemetry {
    int frame = 0;
    int object_id = 0;
    maskops::StateEstimate estimate;
    feedback::BoxStrategy strategy = feedback::BoxStrategy::kMask;
    geometry::Box box;
};

struct FramePrediction {
    maskops::ProbabilityMap prob_crop; // square map spanning the saliency crop
    std::optional<geometry::Box> reg_box_frame;
};

// Produces per-frame predictions in saliency-crop space. Implementations: the
// joint segmentation network, and a ground-truth oracle for harness runs.
class Segmenter {
public:
    virtual ~Segmenter() = default;

    virtual void init(TrackletState& ts, const Image& frame, const maskops::BinaryMask& init_mask,
                      const TrackerConfig& cfg) = 0;
    virtual FramePrediction predict(TrackletState& ts, const Image& frame,
                                    const geometry::CropTransform& saliency_t,
                                    const geometry::CropTransform& similarity_t,
                                    const maskops::BinaryMask* gt_mask) = 0;
    virtual feedback::GlobalFeature extract_global(const Image& masked_global_crop) = 0;

    virtual int saliency_input() const = 0;
    virtual int similarity_input() const = 0;
    virtual int global_input() const = 0;
};

class NetworkSegmenter : public Segmenter {
public:
    explicit NetworkSegmenter(std::shared_ptr<segnet::SegNet> net) : net_(std::move(net)) {}

    void init(TrackletState& ts, const Image& frame, const maskops::BinaryMask& init_mask,
              const TrackerConfig& cfg) override;
    FramePrediction predict(TrackletState& ts, const Image& frame, const geometry::CropTransform& saliency_t,
                            const geometry::CropTransform& similarity_t,
                            const maskops::BinaryMask* gt_mask) override;
    feedback::GlobalFeature extract_global(const Image& crop) override;

    int saliency_input() const override { return net_->config().saliency_input; }
    int similarity_input() const override { return net_->config().similarity_input; }
    int global_input() const override { return net_->config().global_input; }

    segnet::SegNet& net() { return *net_; }

private:
    std::shared_ptr<segnet::SegNet> net_;
};

// Ground-truth-driven stand-in segmenter. Optionally couples prediction
// quality to the fidelity of the tracklet's global feature so that the
// Global Modeling Loop has a measurable effect in harness runs.
class OracleTrackerSegmenter : public Segmenter {
public:
    struct Options {
        synthdata::OracleSegmenter oracle;
        double reg_noise = 0.0;  // relative box jitter of the regression stand-in
        bool couple_to_global = false;
        double coupling_quality_floor = 0.55;
        double coupling_flip_gain = 0.35;
        double coupling_sharpness = 8.0;
        int crop_map_size = 65;
        int saliency_size = 257;
        int similarity_size = 303;
        int global_size = 33;
        int pooled_cells = 8;
    };

    explicit OracleTrackerSegmenter(Options opt) : opt_(std::move(opt)) {}

    void init(TrackletState& ts, const Image& frame, const maskops::BinaryMask& init_mask,
              const TrackerConfig& cfg) override;
    FramePrediction predict(TrackletState& ts, const Image& frame, const geometry::CropTransform& saliency_t,
                            const geometry::CropTransform& similarity_t,
                            const maskops::BinaryMask* gt_mask) override;
    feedback::GlobalFeature extract_global(const Image& crop) override;

    int saliency_input() const override { return opt_.saliency_size; }
    int similarity_input() const override { return opt_.similarity_size; }
    int global_input() const override { return opt_.global_size; }

private:
    Options opt_;
};

// Samples a full-frame mask into crop space at the given map resolution.
maskops::BinaryMask sample_mask_to_crop(const maskops::BinaryMask& frame_mask,
                                        const geometry::CropTransform& t, int map_size);

class Tracker {
public:
    Tracker(std::shared_ptr<Segmenter> segmenter, TrackerConfig cfg)
        : seg_(std::move(segmenter)), cfg_(std::move(cfg)) {
        cfg_.strategy = cfg.strategy;
    }

    const TrackerConfig& config() const { return cfg_; }
    Segmenter& segmenter() { return *seg_; }

    TrackletState init_tracklet(const Image& frame, const maskops::BinaryMask& init_mask, int id) const;

    // One Segmentation - Estimation - Feedback step. gt_mask is only consulted
    // by the oracle segmenter and by the ground-truth upper-bound modes.
    maskops::ProbabilityMap step(TrackletState& ts, const Image& frame,
                                 const maskops::BinaryMask* gt_mask = nullptr,
                                 FrameTelemetry* telemetry = nullptr) const;

private:
    std::shared_ptr<Segmenter> seg_;
    TrackerConfig cfg_;
};

struct AggregatedLabels {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> label_map; // 0 = background, 1..K = object ids
    maskops::ProbabilityMap background_prob;             // normalized
    std::vector<maskops::ProbabilityMap> per_object_probs; // normalized, per id
};

// Softmax-style aggregation: background = product of complements, then
// per-pixel normalization; ties go to background, then the lowest id.
AggregatedLabels aggregate(const std::vector<maskops::ProbabilityMap>& per_object);

} // namespace sat::tracker
