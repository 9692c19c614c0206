// osfd: open-set facial-forgery detection experiment harness.
//
// Subcommands: synth-gen, train, calibrate, eval, ablate, explain, report.
// Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "osfd/config.hpp"
#include "osfd/gradcam.hpp"
#include "osfd/manifest.hpp"
#include "osfd/model.hpp"
#include "osfd/openset.hpp"
#include "osfd/pipeline.hpp"
#include "osfd/projection.hpp"
#include "osfd/protocol.hpp"
#include "osfd/report.hpp"
#include "osfd/rng.hpp"
#include "osfd/splits.hpp"
#include "osfd/synth.hpp"

namespace fs = std::filesystem;
using namespace osfd;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::int64_t seed = -1;
    double lambda = -1.0;
    double alpha = -1.0;
};

RunConfig resolve_config(const CommonOpts& opts) {
    RunConfig cfg;
    if (!opts.config_path.empty()) cfg = RunConfig::load(opts.config_path);
    if (opts.seed >= 0) cfg.seed = static_cast<std::uint64_t>(opts.seed);
    if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
    if (opts.lambda >= 0.0) cfg.lambda_percentile = opts.lambda;
    if (opts.alpha > 0.0) cfg.loss.alpha = opts.alpha;
    cfg.validate();
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "run config file (key = value lines)");
    cmd->add_option("--seed", opts.seed, "root seed override");
    cmd->add_option("--out", opts.out_dir, "output directory override");
    cmd->add_option("--lambda", opts.lambda, "rejection percentile override");
    cmd->add_option("--alpha", opts.alpha, "real-class emphasis override");
}

/// Full single-model pipeline on all classes: stages 1-2 plus checkpointing.
void train_full(const RunConfig& cfg) {
    const DatasetManifest manifest = DatasetManifest::load(cfg.dataset_root);
    const auto methods = manifest.methods();
    const ProtocolSplits splits = make_protocol_splits(manifest, cfg.split_ratios,
                                                       cfg.frames_per_video,
                                                       derive_seed(cfg.seed, "splits"));
    const LabelSpace space1 = LabelSpace::make(cfg.scheme_stage1, methods);
    const LabelSpace space2 = LabelSpace::make(cfg.scheme_stage2, methods);
    ModelStack model = ModelStack::build(cfg.encoder, space2.num_classes(), cfg.projection_bias,
                                         derive_seed(cfg.seed, "model"));
    Stage1Result s1 = stage1_train(cfg, model, splits.train, space1);
    if (s1.log.aborted) fail("stage-1 training diverged");
    apply_swa(cfg, model, s1.snapshots, splits.train);
    Stage2Result s2 = stage2_finetune(cfg, model, splits.train, space2);

    fs::create_directories(cfg.out_dir);
    s1.log.append_csv(fs::path(cfg.out_dir) / "train_log.csv");
    s2.log.append_csv(fs::path(cfg.out_dir) / "train_log.csv");
    CheckpointMeta meta;
    meta.epoch = cfg.stage1_epochs;
    meta.seed = std::to_string(cfg.seed);
    meta.config_hash = cfg.config_hash();
    meta.stage = "stage2";
    save_checkpoint(fs::path(cfg.out_dir) / "model.ckpt", model.snapshot_all(), meta);
    std::cout << "trained on " << splits.train.size() << " samples; stage-2 train accuracy "
              << s2.train_accuracy << "\n";
}

ModelStack load_model(const RunConfig& cfg, const fs::path& ckpt, int num_classes) {
    ModelStack model = ModelStack::build(cfg.encoder, num_classes, cfg.projection_bias,
                                         derive_seed(cfg.seed, "model"));
    model.load_all(load_checkpoint(ckpt));
    return model;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"open-set facial-forgery detection pipeline"};
    app.require_subcommand(1);

    CommonOpts opts;

    auto* synth_cmd = app.add_subcommand("synth-gen", "generate the synthetic forgery benchmark");
    std::int64_t synth_seed = 7;
    int n_videos = 25, frames = 6, side = 64;
    std::string synth_out = "data/synth";
    synth_cmd->add_option("--seed", synth_seed, "dataset seed");
    synth_cmd->add_option("--n-videos", n_videos, "number of pristine videos");
    synth_cmd->add_option("--frames", frames, "frames per video");
    synth_cmd->add_option("--side", side, "image side length");
    synth_cmd->add_option("--out", synth_out, "output directory");

    auto* train_cmd = app.add_subcommand("train", "stages 1-2 on all dataset classes");
    add_common(train_cmd, opts);

    auto* calib_cmd = app.add_subcommand("calibrate", "estimate class-wise rejection thresholds");
    add_common(calib_cmd, opts);
    std::string calib_ckpt;
    calib_cmd->add_option("--model", calib_ckpt, "model checkpoint (defaults to <out>/model.ckpt)");

    auto* eval_cmd = app.add_subcommand("eval", "run an evaluation protocol");
    add_common(eval_cmd, opts);
    std::string protocol = "CROSS_MANIPULATION";
    eval_cmd->add_option("--protocol", protocol, "CROSS_MANIPULATION or CROSS_DATASET");

    auto* ablate_cmd = app.add_subcommand("ablate", "comparative runs along one axis");
    add_common(ablate_cmd, opts);
    std::string axis = "ALPHA";
    std::vector<std::string> settings;
    ablate_cmd->add_option("--axis", axis, "ALPHA, SCHEME_STAGE1, SCHEME_STAGE3, REPR_METHOD");
    ablate_cmd->add_option("--settings", settings,
                           "axis values (defaults per axis, e.g. the alpha list 1,1.21,2.25,4)");

    auto* explain_cmd = app.add_subcommand("explain", "activation maps and 2D projections");
    add_common(explain_cmd, opts);
    std::string explain_ckpt, proj_method = "TSNE_STYLE";
    int n_maps = 8;
    explain_cmd->add_option("--model", explain_ckpt, "model checkpoint");
    explain_cmd->add_option("--projection", proj_method, "TSNE_STYLE or UMAP_STYLE");
    explain_cmd->add_option("--n-maps", n_maps, "activation maps to render");

    auto* report_cmd = app.add_subcommand("report", "render report tables and plots");
    std::string report_dir = "runs/default";
    report_cmd->add_option("--dir", report_dir, "directory containing report.json files");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth_cmd->parsed()) {
            const DatasetManifest m = generate_synthetic_benchmark(
                static_cast<std::uint64_t>(synth_seed), n_videos, frames, synth_out, side);
            std::cout << "wrote " << m.rows.size() << " frames ("
                      << m.methods().size() + 1 << " classes) under " << synth_out << "\n";
        } else if (train_cmd->parsed()) {
            train_full(resolve_config(opts));
        } else if (calib_cmd->parsed()) {
            const RunConfig cfg = resolve_config(opts);
            const DatasetManifest manifest = DatasetManifest::load(cfg.dataset_root);
            const auto methods = manifest.methods();
            const LabelSpace space2 = LabelSpace::make(cfg.scheme_stage2, methods);
            const fs::path ckpt = calib_ckpt.empty() ? fs::path(cfg.out_dir) / "model.ckpt"
                                                     : fs::path(calib_ckpt);
            ModelStack model = load_model(cfg, ckpt, space2.num_classes());
            const ProtocolSplits splits = make_protocol_splits(manifest, cfg.split_ratios,
                                                               cfg.frames_per_video,
                                                               derive_seed(cfg.seed, "splits"));
            const ThresholdTable table = estimate_thresholds(model, splits.train, space2,
                                                             cfg.lambda_percentile);
            fs::create_directories(cfg.out_dir);
            table.save(fs::path(cfg.out_dir) / "thresholds.json");
            std::cout << "thresholds written to " << cfg.out_dir << "/thresholds.json\n";
        } else if (eval_cmd->parsed()) {
            const RunConfig cfg = resolve_config(opts);
            if (protocol == "CROSS_MANIPULATION") {
                const ProtocolOutcome outcome = run_cross_manipulation(cfg);
                std::cout << render_report_table(outcome.reports);
            } else if (protocol == "CROSS_DATASET") {
                const EvalReport report = run_cross_dataset(cfg);
                std::cout << render_report_table({report});
            } else {
                std::cerr << "unknown protocol '" << protocol << "'\n";
                return 1;
            }
        } else if (ablate_cmd->parsed()) {
            const RunConfig cfg = resolve_config(opts);
            const AblationAxis ax = ablation_axis_from_string(axis);
            if (settings.empty()) {
                switch (ax) {
                    case AblationAxis::kAlpha: settings = {"1", "1.21", "2.25", "4"}; break;
                    case AblationAxis::kSchemeStage1:
                    case AblationAxis::kSchemeStage3:
                        settings = {"FORGERY_SPECIFIC", "BINARY"};
                        break;
                    case AblationAxis::kReprMethod:
                        settings = {"WEIGHTED_SUPCON", "SUPCON", "SIMCLR", "CROSS_ENTROPY"};
                        break;
                }
            }
            const AblationTable table = run_ablation(cfg, ax, settings);
            std::cout << table.to_text();
        } else if (explain_cmd->parsed()) {
            const RunConfig cfg = resolve_config(opts);
            const DatasetManifest manifest = DatasetManifest::load(cfg.dataset_root);
            const auto methods = manifest.methods();
            const LabelSpace space2 = LabelSpace::make(cfg.scheme_stage2, methods);
            const fs::path ckpt = explain_ckpt.empty() ? fs::path(cfg.out_dir) / "model.ckpt"
                                                       : fs::path(explain_ckpt);
            ModelStack model = load_model(cfg, ckpt, space2.num_classes());
            const ProtocolSplits splits = make_protocol_splits(manifest, cfg.split_ratios,
                                                               cfg.frames_per_video,
                                                               derive_seed(cfg.seed, "splits"));
            const fs::path out = fs::path(cfg.out_dir) / "explain";
            fs::create_directories(out);

            int written = 0;
            for (const Sample& s : splits.test) {
                if (written >= n_maps) break;
                const int target = space2.label_of(s);
                const ActivationMap map = gradcam(model, s.image, target);
                char name[128];
                std::snprintf(name, sizeof(name), "cam_%s_%s_%d.png", s.method_label.c_str(),
                              s.video_id.c_str(), s.frame_idx);
                write_png(out / name, overlay_heatmap(s.image, map));
                std::cout << name << " spatial_entropy=" << map.spatial_entropy() << "\n";
                ++written;
            }

            std::vector<int> idx(splits.test.size());
            for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
            const Tensor batch = samples_to_batch(splits.test, idx);
            const Tensor r = model.encode(batch, nn::Mode::kEval);
            std::vector<std::string> labels;
            for (const Sample& s : splits.test) labels.push_back(s.method_label);
            const Projection2D proj = project_embeddings(
                r, labels, projection_method_from_string(proj_method),
                derive_seed(cfg.seed, "projection"));
            proj.save_csv(out / "projection.csv");
            write_png(out / "projection.png", proj.render_scatter());
            std::cout << "projection written to " << (out / "projection.csv").string() << "\n";
        } else if (report_cmd->parsed()) {
            render_report_directory(report_dir);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
