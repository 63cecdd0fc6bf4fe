#include "sat/commands.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"State-aware tracklet segmentation for video object segmentation"};
    app.require_subcommand(1);

    sat::commands::TrackOptions track;
    auto* track_cmd = app.add_subcommand("track", "Run the tracker over a sequence");
    track_cmd->add_option("--sequence", track.sequence_dir, "Frame directory (JPEGImages/<seq>)")->required();
    track_cmd->add_option("--annotations", track.annotations_dir, "Annotation directory (Annotations/<seq>)")
        ->required();
    track_cmd->add_option("--out", track.out_dir, "Output directory")->required();
    track_cmd->add_option("--config", track.config_file, "Config file (key = value lines)");
    track_cmd->add_option("--seed", track.seed, "Seed override");
    track_cmd->add_option("--jobs", track.jobs, "Max parallel tracklets");
    track_cmd->add_flag("--overlay", track.overlay, "Also write overlay images");
    track_cmd->add_option("--set", track.overrides, "Config override key=value (repeatable)");

    sat::commands::EvalOptions eval;
    auto* eval_cmd = app.add_subcommand("eval", "Score predictions against ground truth");
    eval_cmd->add_option("--pred", eval.pred_dir, "Prediction directory")->required();
    eval_cmd->add_option("--gt", eval.gt_dir, "Ground-truth annotation directory")->required();
    eval_cmd->add_option("--out", eval.out_file, "Report JSON path (CSV written alongside)")->required();

    sat::commands::SynthOptions synth;
    auto* synth_cmd = app.add_subcommand("synth", "Render a synthetic sequence script");
    synth_cmd->add_option("--script", synth.script_file, "Scene script file")->required();
    synth_cmd->add_option("--out", synth.out_dir, "Output dataset root")->required();
    synth_cmd->add_option("--config", synth.config_file, "Config file");
    synth_cmd->add_option("--seed", synth.seed, "Seed override");
    synth_cmd->add_option("--set", synth.overrides, "Config override key=value (repeatable)");

    sat::commands::TrainOptions train;
    auto* train_cmd = app.add_subcommand("train", "Train the segmentation network");
    train_cmd->add_option("--config", train.config_file, "Config file");
    train_cmd->add_option("--data", train.data_dir, "Training dataset root (DAVIS layout)")->required();
    train_cmd->add_option("--out", train.out_dir, "Output directory")->required();
    train_cmd->add_option("--seed", train.seed, "Seed override");
    train_cmd->add_option("--set", train.overrides, "Config override key=value (repeatable)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*track_cmd) return sat::commands::cmd_track(track);
        if (*eval_cmd) return sat::commands::cmd_eval(eval);
        if (*synth_cmd) return sat::commands::cmd_synth(synth);
        if (*train_cmd) return sat::commands::cmd_train(train);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
