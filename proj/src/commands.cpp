#include "sat/commands.hpp"

#include "sat/davis.hpp"
#include "sat/eval.hpp"
#include "sat/imageio.hpp"
#include "sat/tracker.hpp"
#include "sat/train.hpp"

#include "json.hpp"

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

namespace sat::commands {

namespace fs = std::filesystem;

config::RunConfig resolve_config(const std::string& config_file, const std::vector<std::string>& overrides,
                                 long long seed_override) {
    config::RunConfig rc = config_file.empty() ? config::RunConfig{} : config::load_config(config_file);
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("override must be key=value: " + kv);
        rc.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed_override >= 0) rc.seed = static_cast<uint64_t>(seed_override);
    return rc;
}

namespace {

std::string frame_name(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%05d", index);
    return buf;
}

std::shared_ptr<tracker::Segmenter> make_segmenter(const config::RunConfig& rc) {
    if (rc.segmenter == "network") {
        std::shared_ptr<segnet::SegNet> net;
        if (!rc.weights.empty()) {
            net = segnet::SegNet::load_checkpoint(rc.weights);
        } else {
            auto cfg = segnet::NetworkConfig::named_preset(rc.network_preset);
            cfg.seed = rc.seed + 1;
            net = std::make_shared<segnet::SegNet>(cfg);
        }
        return std::make_shared<tracker::NetworkSegmenter>(net);
    }
    if (rc.segmenter == "oracle") {
        tracker::OracleTrackerSegmenter::Options opt;
        opt.oracle.flip_rate = rc.oracle_flip;
        opt.oracle.jitter_radius = rc.oracle_jitter;
        opt.oracle.quality_schedule = {{0, rc.oracle_quality}};
        opt.oracle.seed = rc.seed;
        opt.reg_noise = rc.oracle_reg_noise;
        opt.couple_to_global = rc.oracle_couple_global;
        return std::make_shared<tracker::OracleTrackerSegmenter>(opt);
    }
    throw std::invalid_argument("config: segmenter must be network|oracle");
}

void write_overlay(const fs::path& path, const Image& frame, const io::LabelMap& labels) {
    ImageU8 img = to_u8(frame);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const uint8_t id = labels.ids[static_cast<size_t>(y) * img.width + x];
            if (!id) continue;
            const auto c = io::palette_color(id);
            for (int ch = 0; ch < 3; ++ch)
                img.at(y, x, ch) = static_cast<uint8_t>((img.at(y, x, ch) + 2 * c[ch]) / 3);
        }
    io::write_png_rgb(path.string(), img);
}

} // namespace

int cmd_track(const TrackOptions& opt) {
    config::RunConfig rc = resolve_config(opt.config_file, opt.overrides, opt.seed);
    if (opt.jobs > 0) rc.jobs = opt.jobs;
    const int jobs = config::effective_jobs(rc.jobs);

    const auto frame_paths = davis::list_frames(opt.sequence_dir);
    if (frame_paths.empty()) throw std::runtime_error("no frames found in " + opt.sequence_dir);
    const auto ann_paths = davis::list_annotations(opt.annotations_dir);
    if (ann_paths.empty()) throw std::runtime_error("missing init annotation in " + opt.annotations_dir);

    const io::LabelMap init_labels = io::read_indexed_png(ann_paths.front().string());
    const auto ids = davis::object_ids(init_labels);
    if (ids.empty()) throw std::runtime_error("init annotation has no objects: " + ann_paths.front().string());

    // oracle mode and the ground-truth upper-bound modes consume per-frame
    // annotations when they exist
    const bool need_gt = rc.segmenter == "oracle" || rc.gt_box_mode || rc.gt_mask_filter;
    std::map<std::string, io::LabelMap> gt_by_stem;
    if (need_gt) {
        if (rc.segmenter == "oracle" && ann_paths.size() < frame_paths.size())
            throw std::runtime_error("oracle segmenter needs an annotation for every frame");
        for (const auto& p : ann_paths) gt_by_stem[p.stem().string()] = io::read_indexed_png(p.string());
    }

    const fs::path out_dir(opt.out_dir);
    fs::create_directories(out_dir);
    if (opt.overlay) fs::create_directories(out_dir / "overlay");

    const Image first = to_float(io::read_image_rgb(frame_paths.front().string()));
    if (first.height != init_labels.height || first.width != init_labels.width)
        throw std::runtime_error("annotation size does not match frames");

    tracker::Tracker trk(make_segmenter(rc), rc.tracker_config());
    std::vector<tracker::TrackletState> tracklets;
    for (int id : ids) tracklets.push_back(trk.init_tracklet(first, davis::mask_for_id(init_labels, id), id));

    // frame 0 output = the given annotation
    io::write_indexed_png((out_dir / (frame_paths.front().stem().string() + ".png")).string(), init_labels);

    std::ofstream telemetry(out_dir / "telemetry.csv");
    telemetry << "frame,object,S_cf,S_cc,S_state,strategy,cx,cy,w,h\n";
    telemetry.precision(9);

    for (size_t f = 1; f < frame_paths.size(); ++f) {
        Image frame;
        try {
            frame = to_float(io::read_image_rgb(frame_paths[f].string()));
        } catch (const std::exception& e) {
            throw std::runtime_error("unreadable frame " + frame_paths[f].string() + ": " + e.what());
        }

        const io::LabelMap* gt = nullptr;
        if (need_gt) {
            const auto it = gt_by_stem.find(frame_paths[f].stem().string());
            if (it != gt_by_stem.end()) gt = &it->second;
            else if (rc.segmenter == "oracle")
                throw std::runtime_error("missing annotation for frame " + frame_paths[f].string());
        }

        std::vector<maskops::ProbabilityMap> maps(tracklets.size());
        std::vector<tracker::FrameTelemetry> tele(tracklets.size());
        std::vector<maskops::BinaryMask> gt_masks(tracklets.size());
        for (size_t k = 0; k < tracklets.size(); ++k)
            if (gt) gt_masks[k] = davis::mask_for_id(*gt, tracklets[k].id);

        auto run_tracklet = [&](size_t k) {
            maps[k] = trk.step(tracklets[k], frame, gt ? &gt_masks[k] : nullptr, &tele[k]);
        };
        if (jobs <= 1 || tracklets.size() <= 1) {
            for (size_t k = 0; k < tracklets.size(); ++k) run_tracklet(k);
        } else {
            std::vector<std::thread> pool;
            std::atomic<size_t> next{0};
            const int n = std::min<int>(jobs, static_cast<int>(tracklets.size()));
            for (int t = 0; t < n; ++t)
                pool.emplace_back([&] {
                    for (size_t k = next.fetch_add(1); k < tracklets.size(); k = next.fetch_add(1))
                        run_tracklet(k);
                });
            for (auto& th : pool) th.join();
        }

        const auto agg = tracker::aggregate(maps);
        io::LabelMap labels;
        labels.height = agg.height;
        labels.width = agg.width;
        labels.ids.resize(agg.label_map.size());
        for (size_t i = 0; i < agg.label_map.size(); ++i) {
            const uint8_t l = agg.label_map[i];
            labels.ids[i] = l ? static_cast<uint8_t>(ids[l - 1]) : 0;
        }
        io::write_indexed_png((out_dir / (frame_paths[f].stem().string() + ".png")).string(), labels);
        if (opt.overlay) write_overlay(out_dir / "overlay" / (frame_paths[f].stem().string() + ".png"), frame, labels);

        for (const auto& t : tele) {
            telemetry << t.frame << "," << t.object_id << "," << t.estimate.confidence << ","
                      << t.estimate.concentration << "," << t.estimate.state_score << ","
                      << feedback::strategy_name(t.strategy) << "," << t.box.cx << "," << t.box.cy << ","
                      << t.box.w << "," << t.box.h << "\n";
        }
    }

    nlohmann::json stats;
    stats["sequence"] = fs::path(opt.sequence_dir).filename().string();
    stats["frames"] = frame_paths.size();
    nlohmann::json per_object;
    for (const auto& ts : tracklets) {
        const int total = ts.mask_selections + ts.regression_selections;
        per_object.push_back({{"object", ts.id},
                              {"mask_selections", ts.mask_selections},
                              {"regression_selections", ts.regression_selections},
                              {"normal_rate", total ? static_cast<double>(ts.mask_selections) / total : 0.0},
                              {"global_updates_skipped", ts.global.skipped_updates}});
    }
    stats["objects"] = per_object;
    std::ofstream(out_dir / "stats.json") << stats.dump(2) << "\n";
    return 0;
}

int cmd_eval(const EvalOptions& opt) {
    const fs::path pred_root(opt.pred_dir), gt_root(opt.gt_dir);

    // single sequence (PNGs directly inside) or a directory of sequences
    std::vector<std::pair<fs::path, fs::path>> pairs;
    if (!davis::list_annotations(gt_root).empty()) {
        pairs.emplace_back(pred_root, gt_root);
    } else {
        for (const auto& entry : fs::directory_iterator(gt_root))
            if (entry.is_directory()) pairs.emplace_back(pred_root / entry.path().filename(), entry.path());
        std::sort(pairs.begin(), pairs.end());
    }
    if (pairs.empty()) throw std::runtime_error("no ground-truth sequences under " + opt.gt_dir);

    std::vector<eval::SequenceResult> results;
    for (const auto& [pred_dir, gt_dir] : pairs) {
        const auto gt_files = davis::list_annotations(gt_dir);
        if (gt_files.empty()) continue;
        const auto first = io::read_indexed_png(gt_files.front().string());
        for (int id : davis::object_ids(first)) {
            std::vector<maskops::BinaryMask> preds, gts;
            for (const auto& gt_file : gt_files) {
                const fs::path pred_file = pred_dir / gt_file.filename();
                if (!fs::exists(pred_file))
                    throw std::runtime_error("missing prediction " + pred_file.string());
                gts.push_back(davis::mask_for_id(io::read_indexed_png(gt_file.string()), id));
                preds.push_back(davis::mask_for_id(io::read_indexed_png(pred_file.string()), id));
            }
            auto r = eval::evaluate_sequence(preds, gts);
            r.sequence = gt_dir.filename().string();
            r.object_id = id;
            results.push_back(std::move(r));
        }
    }

    const auto report = eval::evaluate_dataset(results);
    const fs::path out(opt.out_file);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    eval::write_dataset_json(out.string(), report, results);
    fs::path csv = out;
    csv.replace_extension(".csv");
    eval::write_sequence_csv(csv.string(), results);
    std::cout << "J_mean " << report.J_mean << "  F_mean " << report.F_mean << "  JF_mean " << report.JF_mean
              << "  J_decay " << report.J_decay << "\n";
    return 0;
}

int cmd_synth(const SynthOptions& opt) {
    std::ifstream in(opt.script_file);
    if (!in) throw std::runtime_error("cannot open script: " + opt.script_file);
    std::ostringstream ss;
    ss << in.rdbuf();
    auto script = synthdata::SceneScript::from_text(ss.str());
    if (opt.seed >= 0) script.seed = static_cast<uint64_t>(opt.seed);
    const auto seq = synthdata::render(script);
    davis::write_sequence(seq, opt.out_dir);
    std::cout << "wrote " << seq.frames.size() << " frames to " << opt.out_dir << "/JPEGImages/" << seq.name
              << "\n";
    return 0;
}

int cmd_train(const TrainOptions& opt) {
    config::RunConfig rc = resolve_config(opt.config_file, opt.overrides, opt.seed);
    const auto data = davis::load_dataset(opt.data_dir);
    if (data.empty()) throw std::runtime_error("no training sequences under " + opt.data_dir);

    auto ncfg = segnet::NetworkConfig::named_preset(rc.network_preset);
    ncfg.seed = rc.seed + 1;
    segnet::SegNet net(ncfg);

    const fs::path out_dir(opt.out_dir);
    fs::create_directories(out_dir);

    Rng rng(mix_seed(rc.seed, 0x7214));
    if (rc.pretrain_steps > 0) {
        const double loss = train::pretrain_similarity(net, data, rc.pretrain_steps, rc.pretrain_lr,
                                                       rc.momentum, rc.batch_size, rc.crop_jitter, rng);
        std::cout << "similarity pretraining: final loss " << loss << "\n";
    }
    train::freeze_stage1(net);

    const train::TrainConfig tcfg = rc.train_config();
    train::TrainState state(net, tcfg);

    std::vector<train::TrainingPair> holdout;
    Rng hrng(mix_seed(rc.seed, 0x901d));
    for (int i = 0; i < rc.holdout_pairs; ++i)
        if (auto p = train::sample_pair(data, ncfg, 0.0, hrng)) holdout.push_back(std::move(*p));

    std::ofstream curves(out_dir / "curves.csv");
    curves << "step,lr,loss,loss_s4,loss_s8,loss_s16,val_soft_iou\n";
    curves.precision(9);

    for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
        train::EpochMetrics em;
        try {
            em = state.train_epoch(net, data, &holdout);
        } catch (const std::exception& e) {
            const auto snapshot = (out_dir / "diagnostic.ckpt").string();
            net.save_checkpoint(snapshot);
            std::cerr << "training aborted: " << e.what() << " (snapshot: " << snapshot << ")\n";
            return 1;
        }
        for (const auto& s : em.steps)
            curves << s.step << "," << s.lr << "," << s.loss << "," << s.loss_s4 << "," << s.loss_s8 << ","
                   << s.loss_s16 << ",\n";
        curves << state.global_step() - 1 << "," << em.steps.back().lr << "," << em.mean_loss << ","
               << em.mean_s4 << "," << em.mean_s8 << "," << em.mean_s16 << "," << em.val_soft_iou << "\n";
        std::cout << "epoch " << epoch << ": loss " << em.mean_loss << "  val soft-IoU " << em.val_soft_iou
                  << "\n";
    }

    net.save_checkpoint((out_dir / "weights.ckpt").string());
    std::cout << "checkpoint: " << (out_dir / "weights.ckpt").string() << "\n";
    return 0;
}

} // namespace sat::commands
