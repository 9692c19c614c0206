#include "osfd/protocol.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include "osfd/error.hpp"
#include "osfd/manifest.hpp"
#include "osfd/metrics.hpp"
#include "osfd/rng.hpp"

namespace osfd {

namespace {

const std::vector<double> kLambdaSweep = {0, 5, 10, 25, 50, 75, 90, 95};

std::uint64_t str_hash(const std::string& s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

std::vector<Sample> filter_by_methods(const std::vector<Sample>& samples,
                                      const std::set<std::string>& allowed) {
    std::vector<Sample> out;
    for (const Sample& s : samples) {
        if (allowed.count(s.method_label)) out.push_back(s);
    }
    return out;
}

std::string sample_id(const Sample& s) {
    return s.method_label + "/" + s.video_id + "/" + std::to_string(s.frame_idx);
}

/// Per-combination seed stream: stable across ablation settings, distinct
/// across combinations.
RunConfig combo_config(const RunConfig& base, const std::string& unknown_method) {
    RunConfig cfg = base;
    cfg.seed = derive_seed(base.seed, "combo:" + unknown_method);
    return cfg;
}

}  // namespace

std::string now_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json j;
    j["protocol"] = protocol;
    j["known_methods"] = known_methods;
    j["unknown_method"] = unknown_method;
    j["unknown_auroc"] = unknown_auroc;
    j["unknown_auroc_inverted"] = unknown_auroc_inverted;
    j["known_class_auroc"] = known_class_auroc;
    j["tosc_accuracy"] = tosc_accuracy;
    j["tosc_merged"] = tosc_merged;
    j["closed_set_accuracy"] = closed_set_accuracy;
    nlohmann::json sweep = nlohmann::json::array();
    for (const auto& [lambda, value] : lambda_sweep_tosc) {
        sweep.push_back({{"lambda", lambda},
                         {"tosc", value},
                         {"unknown_rate", lambda_sweep_unknown_rate.at(lambda)}});
    }
    j["lambda_sweep"] = sweep;
    j["config_hash"] = config_hash;
    j["seed"] = std::to_string(seed);
    j["dataset_seed"] = std::to_string(dataset_seed);
    j["timestamp"] = timestamp;
    return j;
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
    EvalReport r;
    r.protocol = j.at("protocol").get<std::string>();
    r.known_methods = j.at("known_methods").get<std::vector<std::string>>();
    r.unknown_method = j.at("unknown_method").get<std::string>();
    r.unknown_auroc = j.at("unknown_auroc").get<double>();
    r.unknown_auroc_inverted = j.at("unknown_auroc_inverted").get<double>();
    r.known_class_auroc = j.at("known_class_auroc").get<std::map<std::string, double>>();
    r.tosc_accuracy = j.at("tosc_accuracy").get<double>();
    r.tosc_merged = j.at("tosc_merged").get<double>();
    r.closed_set_accuracy = j.at("closed_set_accuracy").get<double>();
    for (const auto& row : j.at("lambda_sweep")) {
        const double lambda = row.at("lambda").get<double>();
        r.lambda_sweep_tosc[lambda] = row.at("tosc").get<double>();
        r.lambda_sweep_unknown_rate[lambda] = row.at("unknown_rate").get<double>();
    }
    r.config_hash = j.at("config_hash").get<std::string>();
    r.seed = std::stoull(j.at("seed").get<std::string>());
    r.dataset_seed = std::stoull(j.at("dataset_seed").get<std::string>());
    r.timestamp = j.at("timestamp").get<std::string>();
    return r;
}

void EvalReport::save(const std::filesystem::path& dir, const std::string& stem) const {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    OSFD_REQUIRE(!ec, "cannot create report directory ", dir.string());
    {
        std::ofstream os(dir / (stem + ".json"));
        OSFD_REQUIRE(os.good(), "cannot write report JSON");
        os << to_json().dump(2) << "\n";
    }
    {
        std::ofstream os(dir / (stem + "_scores.csv"));
        OSFD_REQUIRE(os.good(), "cannot write score dump");
        os << "sample_id,true_label,pred_label,max_score,is_unknown_truth\n";
        for (const ScoreRecord& rec : scores) {
            os << rec.sample_id << "," << rec.true_label << "," << rec.pred_label << ","
               << rec.max_score << "," << (rec.is_unknown_truth ? 1 : 0) << "\n";
        }
    }
}

ComboResult run_combination(const RunConfig& base_config, const ProtocolSplits& splits,
                            const std::vector<std::string>& known_methods,
                            const std::string& unknown_method) {
    OSFD_REQUIRE(known_methods.size() >= 2, "combination needs at least 2 known forgery classes, "
                 "got ", known_methods.size());
    const RunConfig config = combo_config(base_config, unknown_method);

    std::set<std::string> known_set(known_methods.begin(), known_methods.end());
    known_set.insert(kRealLabel);
    std::set<std::string> test_set = known_set;
    if (!unknown_method.empty()) test_set.insert(unknown_method);

    const std::vector<Sample> train = filter_by_methods(splits.train, known_set);
    const std::vector<Sample> test = filter_by_methods(splits.test, test_set);
    OSFD_REQUIRE(!train.empty() && !test.empty(), "combination has empty train or test set");

    // Audit: no unknown-method sample may reach training/calibration, and
    // train/test never share a sample id.
    std::set<std::string> train_ids;
    for (const Sample& s : train) {
        OSFD_REQUIRE(s.method_label != unknown_method,
                     "unknown-class sample leaked into training: ", sample_id(s));
        train_ids.insert(sample_id(s));
    }
    for (const Sample& s : test) {
        OSFD_REQUIRE(!train_ids.count(sample_id(s)), "train/test leak: ", sample_id(s));
    }

    const LabelSpace space1 = LabelSpace::make(config.scheme_stage1, known_methods);
    const LabelSpace space2 = LabelSpace::make(config.scheme_stage2, known_methods);

    ComboResult result;
    result.space2 = space2;
    result.model = ModelStack::build(config.encoder, space2.num_classes(), config.projection_bias,
                                     derive_seed(config.seed, "model"));

    Stage1Result s1 = stage1_train(config, result.model, train, space1);
    OSFD_REQUIRE(!s1.log.aborted, "stage-1 training diverged for combination '", unknown_method,
                 "'");
    apply_swa(config, result.model, s1.snapshots, train);
    Stage2Result s2 = stage2_finetune(config, result.model, train, space2);
    result.stage1_log = std::move(s1.log);
    result.stage2_log = std::move(s2.log);

    // Stage 3: calibration on training data only.
    std::vector<int> train_labels;
    train_labels.reserve(train.size());
    for (const Sample& s : train) train_labels.push_back(space2.label_of(s));
    const auto train_probs = model_probs(result.model, train, config.batch_size);
    result.thresholds = estimate_thresholds(train_probs, train_labels, space2.classes(),
                                            config.lambda_percentile);

    // Evaluation.
    EvalReport& report = result.report;
    report.protocol = "CROSS_MANIPULATION";
    report.known_methods = known_methods;
    report.unknown_method = unknown_method;
    report.config_hash = base_config.config_hash();
    report.seed = base_config.seed;
    report.timestamp = now_timestamp();

    const auto test_probs = model_probs(result.model, test, config.batch_size);

    std::vector<double> familiarity;
    std::vector<char> is_known_truth;
    std::vector<std::string> y_true, y_pred;
    familiarity.reserve(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
        const Sample& s = test[i];
        const bool unknown_truth = (s.method_label == unknown_method && !unknown_method.empty());
        const OpenSetPrediction pred = classify_open_set(test_probs[i], result.thresholds);
        familiarity.push_back(unknown_detection_score(test_probs[i]));
        is_known_truth.push_back(unknown_truth ? 0 : 1);
        y_true.push_back(unknown_truth ? kUnknownLabel
                                       : space2.class_name(space2.label_of(s)));
        y_pred.push_back(pred.is_unknown() ? kUnknownLabel
                                           : space2.class_name(pred.predicted_class));

        ScoreRecord rec;
        rec.sample_id = sample_id(s);
        rec.true_label = unknown_truth ? kUnknownLabel : s.method_label;
        rec.pred_label = y_pred.back();
        rec.max_score = pred.max_score;
        rec.is_unknown_truth = unknown_truth;
        report.scores.push_back(std::move(rec));
    }

    report.unknown_auroc = auroc(familiarity, is_known_truth);
    report.unknown_auroc_inverted = 1.0 - report.unknown_auroc;

    std::vector<std::string> tosc_classes = space2.classes();
    tosc_classes.push_back(kUnknownLabel);
    report.tosc_accuracy = tosc(y_true, y_pred, tosc_classes);
    report.tosc_merged = tosc_deepfake_merged(y_true, y_pred);

    // Closed-set accuracy over known test samples (argmax, no rejection).
    {
        std::size_t correct = 0, total = 0;
        for (std::size_t i = 0; i < test.size(); ++i) {
            if (!is_known_truth[i]) continue;
            ++total;
            if (argmax_class(test_probs[i]) == space2.label_of(test[i])) ++correct;
        }
        report.closed_set_accuracy = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
    }

    // Known-class binary AUROC: real vs each known method on an equal split,
    // scored by P(method) renormalized against P(REAL).
    if (config.scheme_stage2 == LabelScheme::kForgerySpecific) {
        std::vector<std::size_t> real_idx;
        for (std::size_t i = 0; i < test.size(); ++i) {
            if (test[i].is_real) real_idx.push_back(i);
        }
        for (const std::string& method : known_methods) {
            std::vector<std::size_t> meth_idx;
            for (std::size_t i = 0; i < test.size(); ++i) {
                if (test[i].method_label == method) meth_idx.push_back(i);
            }
            if (real_idx.empty() || meth_idx.empty()) continue;
            const std::size_t n_take = std::min(real_idx.size(), meth_idx.size());
            auto subsample = [&](std::vector<std::size_t> idx, const char* tag) {
                if (idx.size() == n_take) return idx;
                Rng rng(derive_seed(config.seed, tag, str_hash(method)));
                auto picks = rng.sample_without_replacement(static_cast<std::int64_t>(idx.size()),
                                                            static_cast<std::int64_t>(n_take));
                std::vector<std::size_t> out;
                for (auto p : picks) out.push_back(idx[static_cast<std::size_t>(p)]);
                return out;
            };
            const auto reals = subsample(real_idx, "knownauc.real");
            const auto meths = subsample(meth_idx, "knownauc.meth");
            const int mclass = space2.label_of(method, false);
            std::vector<double> scores;
            std::vector<char> pos;
            auto push = [&](std::size_t i, bool is_method) {
                const double pm = test_probs[i][static_cast<std::size_t>(mclass)];
                const double pr = test_probs[i][0];
                scores.push_back(pm / std::max(pm + pr, 1e-300));
                pos.push_back(is_method ? 1 : 0);
            };
            for (std::size_t i : reals) push(i, false);
            for (std::size_t i : meths) push(i, true);
            report.known_class_auroc[method] = auroc(scores, pos);
        }
    }

    // Lambda sweep from the cached train/test probabilities.
    for (double lambda : kLambdaSweep) {
        const ThresholdTable sweep_table =
            estimate_thresholds(train_probs, train_labels, space2.classes(), lambda);
        std::vector<std::string> swept_pred;
        std::size_t rejected = 0;
        for (std::size_t i = 0; i < test.size(); ++i) {
            const OpenSetPrediction p = classify_open_set(test_probs[i], sweep_table);
            if (p.is_unknown()) ++rejected;
            swept_pred.push_back(p.is_unknown() ? kUnknownLabel
                                                : space2.class_name(p.predicted_class));
        }
        report.lambda_sweep_tosc[lambda] = tosc(y_true, swept_pred, tosc_classes);
        report.lambda_sweep_unknown_rate[lambda] =
            static_cast<double>(rejected) / static_cast<double>(test.size());
    }
    return result;
}

ProtocolOutcome run_cross_manipulation(const RunConfig& config, bool persist,
                                       std::vector<ComboResult>* keep_models) {
    config.validate();
    OSFD_REQUIRE(!config.dataset_root.empty(), "dataset.root is required");
    const DatasetManifest manifest = DatasetManifest::load(config.dataset_root);
    const std::vector<std::string> methods = manifest.methods();
    OSFD_REQUIRE(methods.size() >= 3, "cross-manipulation needs >= 3 forgery methods so every "
                 "combination keeps >= 2 known ones; dataset has ", methods.size());

    const ProtocolSplits splits = make_protocol_splits(manifest, config.split_ratios,
                                                       config.frames_per_video,
                                                       derive_seed(config.seed, "splits"));

    ProtocolOutcome outcome;
    for (const LeaveOneOutCombo& combo : leave_one_out_combinations(methods)) {
        ComboResult result = run_combination(config, splits, combo.known_methods,
                                             combo.unknown_method);
        result.report.dataset_seed = manifest.dataset_seed;
        if (persist) {
            const std::filesystem::path dir =
                std::filesystem::path(config.out_dir) / ("unknown_" + combo.unknown_method);
            result.report.save(dir, "report");
            result.thresholds.save(dir / "thresholds.json");
            result.stage1_log.append_csv(dir / "train_log.csv");
            result.stage2_log.append_csv(dir / "train_log.csv");
            CheckpointMeta meta;
            meta.epoch = config.stage1_epochs;
            meta.seed = std::to_string(config.seed);
            meta.config_hash = config.config_hash();
            meta.stage = "final";
            save_checkpoint(dir / "model.ckpt", result.model.snapshot_all(), meta);
        }
        outcome.reports.push_back(result.report);
        if (keep_models) keep_models->push_back(std::move(result));
    }
    return outcome;
}

EvalReport run_cross_dataset(const RunConfig& config, bool persist) {
    config.validate();
    OSFD_REQUIRE(!config.dataset_root.empty() && !config.dataset_root_b.empty(),
                 "cross-dataset evaluation needs dataset.root and dataset.root_b");
    const DatasetManifest manifest_a = DatasetManifest::load(config.dataset_root);
    const DatasetManifest manifest_b = DatasetManifest::load(config.dataset_root_b);
    const std::vector<std::string> methods_a = manifest_a.methods();
    OSFD_REQUIRE(methods_a.size() >= 2, "dataset A needs >= 2 forgery methods");

    const ProtocolSplits splits_a = make_protocol_splits(manifest_a, config.split_ratios,
                                                         config.frames_per_video,
                                                         derive_seed(config.seed, "splits"));
    const ProtocolSplits splits_b = make_protocol_splits(manifest_b, config.split_ratios,
                                                         config.frames_per_video,
                                                         derive_seed(config.seed, "splitsB"));

    // Train on all classes of A.
    const RunConfig cfg = combo_config(config, "dataset_b");
    const LabelSpace space1 = LabelSpace::make(cfg.scheme_stage1, methods_a);
    const LabelSpace space2 = LabelSpace::make(cfg.scheme_stage2, methods_a);
    ModelStack model = ModelStack::build(cfg.encoder, space2.num_classes(), cfg.projection_bias,
                                         derive_seed(cfg.seed, "model"));
    Stage1Result s1 = stage1_train(cfg, model, splits_a.train, space1);
    OSFD_REQUIRE(!s1.log.aborted, "stage-1 training diverged in cross-dataset run");
    apply_swa(cfg, model, s1.snapshots, splits_a.train);
    stage2_finetune(cfg, model, splits_a.train, space2);

    std::vector<int> train_labels;
    for (const Sample& s : splits_a.train) train_labels.push_back(space2.label_of(s));
    const auto train_probs = model_probs(model, splits_a.train, cfg.batch_size);
    const ThresholdTable thresholds = estimate_thresholds(train_probs, train_labels,
                                                          space2.classes(), cfg.lambda_percentile);

    // Evaluate on B: its real class is known REAL, every forgery is unknown.
    const std::vector<Sample>& test = splits_b.test;
    OSFD_REQUIRE(!test.empty(), "dataset B test split is empty");
    const auto test_probs = model_probs(model, test, cfg.batch_size);

    EvalReport report;
    report.protocol = "CROSS_DATASET";
    report.known_methods = methods_a;
    report.unknown_method = "dataset_b";
    report.config_hash = config.config_hash();
    report.seed = config.seed;
    report.dataset_seed = manifest_a.dataset_seed;
    report.timestamp = now_timestamp();

    std::vector<double> familiarity;
    std::vector<char> is_known_truth;
    std::vector<std::string> y_true, y_pred;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const Sample& s = test[i];
        const bool unknown_truth = !s.is_real;
        const OpenSetPrediction pred = classify_open_set(test_probs[i], thresholds);
        familiarity.push_back(unknown_detection_score(test_probs[i]));
        is_known_truth.push_back(unknown_truth ? 0 : 1);
        y_true.push_back(unknown_truth ? kUnknownLabel : kRealLabel);
        y_pred.push_back(pred.is_unknown() ? kUnknownLabel
                                           : space2.class_name(pred.predicted_class));
        ScoreRecord rec;
        rec.sample_id = sample_id(s);
        rec.true_label = y_true.back();
        rec.pred_label = y_pred.back();
        rec.max_score = pred.max_score;
        rec.is_unknown_truth = unknown_truth;
        report.scores.push_back(std::move(rec));
    }
    report.unknown_auroc = auroc(familiarity, is_known_truth);
    report.unknown_auroc_inverted = 1.0 - report.unknown_auroc;
    std::vector<std::string> tosc_classes = space2.classes();
    tosc_classes.push_back(kUnknownLabel);
    report.tosc_accuracy = tosc(y_true, y_pred, tosc_classes);
    report.tosc_merged = tosc_deepfake_merged(y_true, y_pred);
    {
        std::size_t correct = 0, total = 0;
        for (std::size_t i = 0; i < test.size(); ++i) {
            if (!test[i].is_real) continue;
            ++total;
            if (argmax_class(test_probs[i]) == 0) ++correct;
        }
        report.closed_set_accuracy =
            total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
    }
    for (double lambda : kLambdaSweep) {
        const ThresholdTable sweep_table =
            estimate_thresholds(train_probs, train_labels, space2.classes(), lambda);
        std::vector<std::string> swept_pred;
        std::size_t rejected = 0;
        for (std::size_t i = 0; i < test.size(); ++i) {
            const OpenSetPrediction p = classify_open_set(test_probs[i], sweep_table);
            if (p.is_unknown()) ++rejected;
            swept_pred.push_back(p.is_unknown() ? kUnknownLabel
                                                : space2.class_name(p.predicted_class));
        }
        report.lambda_sweep_tosc[lambda] = tosc(y_true, swept_pred, tosc_classes);
        report.lambda_sweep_unknown_rate[lambda] =
            static_cast<double>(rejected) / static_cast<double>(test.size());
    }

    if (persist) {
        const std::filesystem::path dir = std::filesystem::path(config.out_dir) / "cross_dataset";
        report.save(dir, "report");
        thresholds.save(dir / "thresholds.json");
    }
    return report;
}

AblationAxis ablation_axis_from_string(const std::string& s) {
    if (s == "ALPHA") return AblationAxis::kAlpha;
    if (s == "SCHEME_STAGE1") return AblationAxis::kSchemeStage1;
    if (s == "SCHEME_STAGE3") return AblationAxis::kSchemeStage3;
    if (s == "REPR_METHOD") return AblationAxis::kReprMethod;
    fail("unknown ablation axis '", s, "' (ALPHA, SCHEME_STAGE1, SCHEME_STAGE3, REPR_METHOD)");
}

std::string to_string(AblationAxis axis) {
    switch (axis) {
        case AblationAxis::kAlpha: return "ALPHA";
        case AblationAxis::kSchemeStage1: return "SCHEME_STAGE1";
        case AblationAxis::kSchemeStage3: return "SCHEME_STAGE3";
        case AblationAxis::kReprMethod: return "REPR_METHOD";
    }
    return "?";
}

nlohmann::json AblationTable::to_json() const {
    nlohmann::json j;
    j["axis"] = to_string(axis);
    nlohmann::json cols = nlohmann::json::array();
    for (const AblationColumn& c : columns) {
        cols.push_back({{"setting", c.setting},
                        {"unknown_auroc_by_method", c.unknown_auroc_by_method},
                        {"mean_unknown_auroc", c.mean_unknown_auroc},
                        {"mean_tosc", c.mean_tosc}});
    }
    j["columns"] = cols;
    return j;
}

std::string AblationTable::to_text() const {
    std::ostringstream os;
    os << "ablation axis: " << to_string(axis) << "\n";
    std::vector<std::string> methods;
    if (!columns.empty()) {
        for (const auto& [m, v] : columns.front().unknown_auroc_by_method) methods.push_back(m);
    }
    os << "unknown_class";
    for (const AblationColumn& c : columns) os << "\t" << c.setting;
    os << "\n";
    for (const std::string& m : methods) {
        os << m;
        for (const AblationColumn& c : columns) {
            char buf[16];
            std::snprintf(buf, sizeof(buf), "%.4f", c.unknown_auroc_by_method.at(m));
            os << "\t" << buf;
        }
        os << "\n";
    }
    os << "mean";
    for (const AblationColumn& c : columns) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%.4f", c.mean_unknown_auroc);
        os << "\t" << buf;
    }
    os << "\n";
    return os.str();
}

AblationTable run_ablation(const RunConfig& config, AblationAxis axis,
                           const std::vector<std::string>& settings, bool persist) {
    OSFD_REQUIRE(!settings.empty(), "ablation needs a non-empty settings list");
    AblationTable table;
    table.axis = axis;

    for (const std::string& setting : settings) {
        RunConfig cfg = config;  // shared seed: columns differ only in the axis
        std::string label = setting;
        switch (axis) {
            case AblationAxis::kAlpha:
                cfg.loss.variant = LossVariant::kWeightedSupCon;
                cfg.loss.alpha = std::stod(setting);
                label = "alpha=" + setting;
                break;
            case AblationAxis::kSchemeStage1:
                cfg.scheme_stage1 = label_scheme_from_string(setting);
                break;
            case AblationAxis::kSchemeStage3:
                cfg.scheme_stage2 = label_scheme_from_string(setting);
                break;
            case AblationAxis::kReprMethod:
                cfg.loss.variant = loss_variant_from_string(setting);
                break;
        }
        cfg.out_dir = (std::filesystem::path(config.out_dir) /
                       ("ablate_" + to_string(axis)) / label)
                          .string();
        const ProtocolOutcome outcome = run_cross_manipulation(cfg, persist);

        AblationColumn col;
        col.setting = label;
        double auroc_sum = 0.0, tosc_sum = 0.0;
        for (const EvalReport& r : outcome.reports) {
            col.unknown_auroc_by_method[r.unknown_method] = r.unknown_auroc;
            auroc_sum += r.unknown_auroc;
            tosc_sum += r.tosc_accuracy;
        }
        col.mean_unknown_auroc = auroc_sum / static_cast<double>(outcome.reports.size());
        col.mean_tosc = tosc_sum / static_cast<double>(outcome.reports.size());
        table.columns.push_back(std::move(col));
    }

    if (persist) {
        const std::filesystem::path dir =
            std::filesystem::path(config.out_dir) / ("ablate_" + to_string(axis));
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        std::ofstream js(dir / "ablation.json");
        js << table.to_json().dump(2) << "\n";
        std::ofstream txt(dir / "ablation.txt");
        txt << table.to_text();
    }
    return table;
}

}  // namespace osfd
