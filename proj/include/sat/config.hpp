#pragma once

#include "sat/segnet.hpp"
#include "sat/tracker.hpp"
#include "sat/train.hpp"

#include <string>

namespace sat::config {

// Flat documented key set shared by all commands. Unknown keys are rejected;
// defaults match the tracker/train module defaults.
struct RunConfig {
    // state estimation & feedback
    double state_threshold = 0.85;
    double binarize_threshold = 0.5;
    double smoothing_lambda = 0.3;
    double mu = 0.5;
    double context_saliency = 1.0;
    double context_similarity = 2.0;
    double context_template = 1.0;
    std::string strategy = "auto";       // auto | mask_only | regression_only
    bool use_global_loop = true;
    bool gt_box_mode = false;
    bool gt_mask_filter = false;
    std::string global_update = "current"; // current | previous
    std::string estimate_on = "crop";      // crop | frame

    // segmenter
    std::string segmenter = "network"; // network | oracle
    std::string weights;               // checkpoint path ("" = random init)
    std::string network_preset = "desk";
    double oracle_flip = 0.0;
    int oracle_jitter = 0;
    double oracle_quality = 1.0;
    double oracle_reg_noise = 0.0;
    bool oracle_couple_global = false;

    // training
    int epochs = 20;
    int warmup_epochs = 2;
    double lr_start = 1e-5;
    double lr_peak = 1e-2;
    double momentum = 0.9;
    int batch_size = 4;
    double aux_weight_s8 = 0.5;
    double aux_weight_s16 = 0.3;
    int samples_per_epoch = 100;
    double crop_jitter = 0.08;
    int pretrain_steps = 120;
    double pretrain_lr = 5e-3;
    int holdout_pairs = 16;

    uint64_t seed = 0;
    int jobs = 1;

    void set(const std::string& key, const std::string& value);

    tracker::TrackerConfig tracker_config() const;
    train::TrainConfig train_config() const;
};

// key = value lines, '#' comments
RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& text);

// SAT_NUM_THREADS caps the per-command parallelism
int effective_jobs(int requested);

} // namespace sat::config
