#include "sat/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sat::config {

namespace {

bool parse_bool(const std::string& v) {
    if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "off" || v == "no") return false;
    throw std::invalid_argument("config: expected boolean, got '" + v + "'");
}

} // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
    if (key == "state_threshold") state_threshold = std::stod(value);
    else if (key == "binarize_threshold") binarize_threshold = std::stod(value);
    else if (key == "smoothing_lambda") smoothing_lambda = std::stod(value);
    else if (key == "mu") mu = std::stod(value);
    else if (key == "context_saliency") context_saliency = std::stod(value);
    else if (key == "context_similarity") context_similarity = std::stod(value);
    else if (key == "context_template") context_template = std::stod(value);
    else if (key == "strategy") strategy = value;
    else if (key == "use_global_loop") use_global_loop = parse_bool(value);
    else if (key == "gt_box_mode") gt_box_mode = parse_bool(value);
    else if (key == "gt_mask_filter") gt_mask_filter = parse_bool(value);
    else if (key == "global_update") global_update = value;
    else if (key == "estimate_on") estimate_on = value;
    else if (key == "segmenter") segmenter = value;
    else if (key == "weights") weights = value;
    else if (key == "network_preset") network_preset = value;
    else if (key == "oracle_flip") oracle_flip = std::stod(value);
    else if (key == "oracle_jitter") oracle_jitter = std::stoi(value);
    else if (key == "oracle_quality") oracle_quality = std::stod(value);
    else if (key == "oracle_reg_noise") oracle_reg_noise = std::stod(value);
    else if (key == "oracle_couple_global") oracle_couple_global = parse_bool(value);
    else if (key == "epochs") epochs = std::stoi(value);
    else if (key == "warmup_epochs") warmup_epochs = std::stoi(value);
    else if (key == "lr_start") lr_start = std::stod(value);
    else if (key == "lr_peak") lr_peak = std::stod(value);
    else if (key == "momentum") momentum = std::stod(value);
    else if (key == "batch_size") batch_size = std::stoi(value);
    else if (key == "aux_weight_s8") aux_weight_s8 = std::stod(value);
    else if (key == "aux_weight_s16") aux_weight_s16 = std::stod(value);
    else if (key == "samples_per_epoch") samples_per_epoch = std::stoi(value);
    else if (key == "crop_jitter") crop_jitter = std::stod(value);
    else if (key == "pretrain_steps") pretrain_steps = std::stoi(value);
    else if (key == "pretrain_lr") pretrain_lr = std::stod(value);
    else if (key == "holdout_pairs") holdout_pairs = std::stoi(value);
    else if (key == "seed") seed = std::stoull(value);
    else if (key == "jobs") jobs = std::stoi(value);
    else throw std::invalid_argument("config: unknown key '" + key + "'");
}

tracker::TrackerConfig RunConfig::tracker_config() const {
    tracker::TrackerConfig tc;
    tc.state_threshold = state_threshold;
    tc.binarize_threshold = binarize_threshold;
    tc.smoothing_lambda = smoothing_lambda;
    tc.mu = mu;
    tc.context_saliency = context_saliency;
    tc.context_similarity = context_similarity;
    tc.context_template = context_template;
    if (strategy == "auto") tc.strategy = tracker::TrackerConfig::Strategy::kAuto;
    else if (strategy == "mask_only") tc.strategy = tracker::TrackerConfig::Strategy::kMaskOnly;
    else if (strategy == "regression_only") tc.strategy = tracker::TrackerConfig::Strategy::kRegressionOnly;
    else throw std::invalid_argument("config: strategy must be auto|mask_only|regression_only");
    tc.use_global_loop = use_global_loop;
    tc.gt_box_mode = gt_box_mode;
    tc.gt_mask_filter = gt_mask_filter;
    if (global_update == "current") tc.global_update_from_current = true;
    else if (global_update == "previous") tc.global_update_from_current = false;
    else throw std::invalid_argument("config: global_update must be current|previous");
    if (estimate_on == "crop") tc.estimate_on_crop = true;
    else if (estimate_on == "frame") tc.estimate_on_crop = false;
    else throw std::invalid_argument("config: estimate_on must be crop|frame");
    return tc;
}

train::TrainConfig RunConfig::train_config() const {
    train::TrainConfig tc;
    tc.epochs = epochs;
    tc.warmup_epochs = warmup_epochs;
    tc.lr_start = lr_start;
    tc.lr_peak = lr_peak;
    tc.momentum = momentum;
    tc.batch_size = batch_size;
    tc.aux_weight_s8 = aux_weight_s8;
    tc.aux_weight_s16 = aux_weight_s16;
    tc.samples_per_epoch = samples_per_epoch;
    tc.crop_jitter = crop_jitter;
    tc.seed = seed;
    tc.validate();
    return tc;
}

RunConfig parse_config(const std::string& text) {
    RunConfig rc;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto eq = line.find('=');
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        if (eq == std::string::npos) {
            if (!trim(line).empty())
                throw std::invalid_argument("config: expected 'key = value' at line " + std::to_string(lineno));
            continue;
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw std::invalid_argument("config: empty key at line " + std::to_string(lineno));
        rc.set(key, value);
    }
    return rc;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

int effective_jobs(int requested) {
    int jobs = std::max(1, requested);
    if (const char* env = std::getenv("SAT_NUM_THREADS")) {
        try {
            const int cap = std::stoi(env);
            if (cap >= 1) jobs = std::min(jobs, cap);
        } catch (...) {
            // ignore malformed values
        }
    }
    return jobs;
}

} // namespace sat::config
