#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "osfd/config.hpp"
#include "osfd/model.hpp"
#include "osfd/openset.hpp"
#include "osfd/pipeline.hpp"
#include "osfd/splits.hpp"

#include <json.hpp>

namespace osfd {

/// One row of the persisted per-sample score dump.
struct ScoreRecord {
    std::string sample_id;    // video/frame
    std::string true_label;   // method name or UNKNOWN
    std::string pred_label;   // class name or UNKNOWN
    double max_score = 0.0;
    bool is_unknown_truth = false;
};

/// Per-combination evaluation result; everything in it is regenerable from
/// (config hash, seeds, dataset seed).
struct EvalReport {
    std::string protocol;                           // CROSS_MANIPULATION / CROSS_DATASET
    std::vector<std::string> known_methods;
    std::string unknown_method;                     // or dataset-B tag
    double unknown_auroc = 0.0;
    double unknown_auroc_inverted = 0.0;            // 1 - unknown_auroc, polarity cross-check
    std::map<std::string, double> known_class_auroc;  // per known forgery method
    double tosc_accuracy = 0.0;
    double tosc_merged = 0.0;
    double closed_set_accuracy = 0.0;
    std::map<double, double> lambda_sweep_tosc;     // lambda -> TOSC
    std::map<double, double> lambda_sweep_unknown_rate;  // lambda -> rejected fraction
    std::string config_hash;
    std::uint64_t seed = 0;
    std::uint64_t dataset_seed = 0;
    std::string timestamp;
    std::vector<ScoreRecord> scores;                // per-sample dump (also saved as CSV)

    nlohmann::json to_json() const;
    static EvalReport from_json(const nlohmann::json& j);
    void save(const std::filesystem::path& dir, const std::string& stem) const;
};

/// Artifacts of one trained combination, kept so downstream consumers
/// (explain, criterion checks) can reuse the model without retraining.
struct ComboResult {
    EvalReport report;
    ModelStack model;
    ThresholdTable thresholds;
    LabelSpace space2;
    TrainLog stage1_log;
    TrainLog stage2_log;
};

/// Trains stages 1-3 on the known classes and evaluates open-set metrics on
/// the test split (known classes + the unknown method). Unknown-class
/// samples never reach training or calibration; this is audited by
/// construction and again by id-set intersection.
ComboResult run_combination(const RunConfig& config, const ProtocolSplits& splits,
                            const std::vector<std::string>& known_methods,
                            const std::string& unknown_method);

struct ProtocolOutcome {
    std::vector<EvalReport> reports;
};

/// Leave-one-method-out protocol over every forgery method in the config.
ProtocolOutcome run_cross_manipulation(const RunConfig& config, bool persist = true,
                                       std::vector<ComboResult>* keep_models = nullptr);

/// Trains on every class of dataset A and evaluates real-vs-fake on dataset
/// B, whose forged samples are all treated as unknown.
EvalReport run_cross_dataset(const RunConfig& config, bool persist = true);

enum class AblationAxis { kAlpha, kSchemeStage1, kSchemeStage3, kReprMethod };

AblationAxis ablation_axis_from_string(const std::string& s);
std::string to_string(AblationAxis axis);

struct AblationColumn {
    std::string setting;                       // e.g. "alpha=1.21" or "SCHEME_1"
    std::map<std::string, double> unknown_auroc_by_method;
    double mean_unknown_auroc = 0.0;
    double mean_tosc = 0.0;
};

struct AblationTable {
    AblationAxis axis;
    std::vector<AblationColumn> columns;

    nlohmann::json to_json() const;
    std::string to_text() const;
};

/// One cross-manipulation run per axis setting, sharing the root seed so
/// columns differ only in the ablated knob.
AblationTable run_ablation(const RunConfig& config, AblationAxis axis,
                           const std::vector<std::string>& settings, bool persist = true);

std::string now_timestamp();

}  // namespace osfd
