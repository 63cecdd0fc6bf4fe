#pragma once

#include "sat/config.hpp"

#include <string>
#include <vector>

namespace sat::commands {

struct TrackOptions {
    std::string sequence_dir;
    std::string annotations_dir;
    std::string out_dir;
    std::string config_file;
    std::vector<std::string> overrides; // key=value
    bool overlay = false;
    int jobs = 0;       // 0: from config
    long long seed = -1; // -1: from config
};

struct EvalOptions {
    std::string pred_dir;
    std::string gt_dir;
    std::string out_file; // JSON summary; per-sequence CSV written alongside
};

struct SynthOptions {
    std::string script_file;
    std::string out_dir;
    std::string config_file;
    std::vector<std::string> overrides;
    long long seed = -1;
};

struct TrainOptions {
    std::string config_file;
    std::string data_dir;
    std::string out_dir;
    std::vector<std::string> overrides;
    long long seed = -1;
};

int cmd_track(const TrackOptions& opt);
int cmd_eval(const EvalOptions& opt);
int cmd_synth(const SynthOptions& opt);
int cmd_train(const TrainOptions& opt);

// shared by cmd_track and the test harnesses
config::RunConfig resolve_config(const std::string& config_file, const std::vector<std::string>& overrides,
                                 long long seed_override);

} // namespace sat::commands
