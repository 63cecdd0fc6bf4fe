#pragma once

#include "sat/segnet.hpp"
#include "sat/synthdata.hpp"

#include <optional>
#include <string>
#include <vector>

namespace sat::train {

struct TrainConfig {
    int epochs = 20;
    int warmup_epochs = 2;
    double lr_start = 1e-5;
    double lr_peak = 1e-2;
    double momentum = 0.9;
    int batch_size = 4; // desk default; reference setting is 16
    double aux_weight_s8 = 0.5;
    double aux_weight_s16 = 0.3;
    int samples_per_epoch = 100; // desk-scale; schedule shape is preserved
    double crop_jitter = 0.08;   // relative shift/scale jitter of search crops
    uint64_t seed = 0;

    int steps_per_epoch() const { return std::max(1, samples_per_epoch / std::max(1, batch_size)); }
    int total_steps() const { return epochs * steps_per_epoch(); }
    int warmup_steps() const { return warmup_epochs * steps_per_epoch(); }

    void validate() const;
};

// Linear warmup from lr_start to lr_peak, then cosine annealing to zero.
double lr_at(int step, const TrainConfig& cfg);

// Exact fractional-coverage area downsampling, then inclusive 0.5 threshold.
nn::Tensor downsample_mask(const maskops::BinaryMask& m, int out_size);

struct TrainingPair {
    Image saliency_crop;  // search image, saliency resolution
    Image search_crop;    // search image, similarity resolution
    Image template_crop;  // target image, template resolution
    Image global_crop;    // target image, background-filtered, global resolution
    nn::Tensor gt4, gt8, gt16;
    geometry::Box gt_box_search_crop; // search-frame target box in similarity-crop coords
};

// Samples target/search frames from one sequence and builds all crops. The
// target's ground-truth mask filters the global-branch input.
TrainingPair make_pair(const synthdata::Sequence& seq, int object, int target_frame, int search_frame,
                       const segnet::NetworkConfig& ncfg, double crop_jitter, Rng& rng);

// draws (sequence, frames) uniformly; frames with an empty mask are skipped
std::optional<TrainingPair> sample_pair(const std::vector<synthdata::Sequence>& data,
                                        const segnet::NetworkConfig& ncfg, double crop_jitter, Rng& rng);

// L = CE(stride4) + w8*CE(stride8) + w16*CE(stride16), pixel averaged
nn::Var loss_graph(const segnet::ForwardGraph& g, const nn::Tensor& gt4, const nn::Tensor& gt8,
                   const nn::Tensor& gt16, double w8, double w16);

double soft_iou(const maskops::ProbabilityMap& p, const nn::Tensor& target);

segnet::ForwardGraph forward_pair(const segnet::SegNet& net, const TrainingPair& pair);

struct StepMetrics {
    double loss = 0.0, loss_s4 = 0.0, loss_s8 = 0.0, loss_s16 = 0.0;
    double lr = 0.0;
    int step = 0;
};

struct EpochMetrics {
    double mean_loss = 0.0, mean_s4 = 0.0, mean_s8 = 0.0, mean_s16 = 0.0;
    double val_soft_iou = 0.0;
    std::vector<StepMetrics> steps;
};

class TrainState {
public:
    TrainState(segnet::SegNet& net, const TrainConfig& cfg);

    // One pass of samples_per_epoch pairs with SGD-momentum updates on the
    // unfrozen parameters. Throws on a non-finite loss.
    EpochMetrics train_epoch(segnet::SegNet& net, const std::vector<synthdata::Sequence>& data,
                             const std::vector<TrainingPair>* holdout);

    int global_step() const { return step_; }
    nn::SgdMomentum& optimizer() { return opt_; }
    Rng& rng() { return rng_; }

private:
    TrainConfig cfg_;
    nn::SgdMomentum opt_;
    Rng rng_;
    int step_ = 0;
};

// Freezes the similarity encoder and the regression head for stage-2 training.
void freeze_stage1(segnet::SegNet& net);

// Synthetic-pairs pretraining of the similarity encoder and regression head
// (quality classification + log-space box offsets). A small stand-in for
// full-scale tracker pretraining.
double pretrain_similarity(segnet::SegNet& net, const std::vector<synthdata::Sequence>& data, int steps,
                           double lr, double momentum, int batch_size, double crop_jitter, Rng& rng);

} // namespace sat::train
