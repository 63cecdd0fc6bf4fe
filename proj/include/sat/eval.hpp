#pragma once

#include "sat/maskops.hpp"

#include <string>
#include <vector>

namespace sat::eval {

struct SequenceResult {
    std::string sequence;
    int object_id = 0;
    std::vector<double> per_frame_J;
    std::vector<double> per_frame_F;
    double J_mean = 0.0;
    double F_mean = 0.0;
    double JF_mean = 0.0;
    double J_decay = 0.0;
};

struct DatasetReport {
    double J_mean = 0.0;
    double F_mean = 0.0;
    double JF_mean = 0.0;
    double J_decay = 0.0;
    int sequences = 0;
};

// intersection over union; both masks empty -> 1
double region_J(const maskops::BinaryMask& pred, const maskops::BinaryMask& gt);

int default_boundary_tolerance(int height, int width); // ceil(0.008 * diagonal)

// Bipartite boundary matching within a pixel tolerance; boundary pixels are
// foreground pixels 4-adjacent to background. F = 2PR/(P+R).
double boundary_F(const maskops::BinaryMask& pred, const maskops::BinaryMask& gt, int tolerance);
inline double boundary_F(const maskops::BinaryMask& pred, const maskops::BinaryMask& gt) {
    return boundary_F(pred, gt, default_boundary_tolerance(gt.height, gt.width));
}

// mean(first quartile) - mean(last quartile); bins of floor(n/4) frames,
// remainder assigned to the last bin
double decay_of(const std::vector<double>& per_frame);

// The first (ground-truth-initialized) frame of each list is excluded from
// scoring.
SequenceResult evaluate_sequence(const std::vector<maskops::BinaryMask>& preds,
                                 const std::vector<maskops::BinaryMask>& gts);

DatasetReport evaluate_dataset(const std::vector<SequenceResult>& results);

void write_sequence_csv(const std::string& path, const std::vector<SequenceResult>& results);
void write_dataset_json(const std::string& path, const DatasetReport& report,
                        const std::vector<SequenceResult>& results);

} // namespace sat::eval
