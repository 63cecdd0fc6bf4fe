#pragma once

// Sequence-level driving helpers shared by the tracker tests and the
// acceptance suite.

#include "sat/eval.hpp"
#include "sat/tracker.hpp"
#include "sat/synthdata.hpp"

#include <memory>
#include <vector>

namespace harness {

struct RunResult {
    std::vector<sat::maskops::BinaryMask> pred_masks; // per frame (frame 0 = init copy)
    std::vector<sat::tracker::FrameTelemetry> telemetry;
    double mean_iou = 0.0; // frames 1..N-1 against ground truth
};

inline RunResult run_oracle_single(const sat::synthdata::Sequence& seq, const sat::tracker::TrackerConfig& cfg,
                                   const sat::tracker::OracleTrackerSegmenter::Options& opt, int object = 0) {
    sat::tracker::Tracker trk(std::make_shared<sat::tracker::OracleTrackerSegmenter>(opt), cfg);
    RunResult out;
    auto ts = trk.init_tracklet(seq.frames[0], seq.masks[0][object], object + 1);
    out.pred_masks.push_back(seq.masks[0][object]);
    double iou_sum = 0.0;
    int scored = 0;
    for (size_t f = 1; f < seq.frames.size(); ++f) {
        sat::tracker::FrameTelemetry tele;
        const auto prob = trk.step(ts, seq.frames[f], &seq.masks[f][object], &tele);
        const auto mask = sat::maskops::binarize(prob, cfg.binarize_threshold);
        iou_sum += sat::eval::region_J(mask, seq.masks[f][object]);
        ++scored;
        out.pred_masks.push_back(mask);
        out.telemetry.push_back(tele);
    }
    out.mean_iou = scored ? iou_sum / scored : 0.0;
    return out;
}

inline double suite_mean_iou(const std::vector<sat::synthdata::SceneScript>& suite,
                             const sat::tracker::TrackerConfig& cfg,
                             const sat::tracker::OracleTrackerSegmenter::Options& opt) {
    double total = 0.0;
    for (const auto& script : suite) {
        const auto seq = sat::synthdata::render(script);
        total += run_oracle_single(seq, cfg, opt).mean_iou;
    }
    return total / suite.size();
}

inline sat::tracker::OracleTrackerSegmenter::Options default_oracle_options(uint64_t seed = 0) {
    sat::tracker::OracleTrackerSegmenter::Options opt;
    opt.oracle.flip_rate = 0.02;
    opt.oracle.jitter_radius = 1;
    opt.oracle.seed = seed;
    opt.reg_noise = 0.02;
    opt.couple_to_global = true;
    return opt;
}

} // namespace harness
