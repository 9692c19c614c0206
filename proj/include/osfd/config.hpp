#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "osfd/augment.hpp"
#include "osfd/datamodel.hpp"
#include "osfd/losses.hpp"

namespace osfd {

/// Full experiment configuration. Serialized as a flat `key = value` file;
/// unknown keys are rejected so typos never silently fall back to defaults.
struct RunConfig {
    // dataset
    std::string dataset_root;
    std::string dataset_root_b;  // cross-dataset evaluation target
    std::vector<std::string> methods = {"M1", "M2", "M3", "M4"};
    int side = 64;
    std::array<double, 3> split_ratios = {0.6, 0.2, 0.2};
    int frames_per_video = 6;

    // label schemes (stage 1 = representation, stage 2 = classifier/thresholds)
    LabelScheme scheme_stage1 = LabelScheme::kForgerySpecific;
    LabelScheme scheme_stage2 = LabelScheme::kForgerySpecific;

    // stage-1 loss
    LossConfig loss;

    // model
    std::string encoder = "small_conv";
    bool projection_bias = false;

    // optimization
    double lr = 0.05;
    double stage2_lr = 0.1;
    double weight_decay = 1e-4;
    double momentum = 0.9;
    int batch_size = 64;  // samples per batch; the view batch is twice this
    int stage1_epochs = 20;
    int stage2_epochs = 10;
    double swa_window = 0.25;  // trailing fraction of stage-1 epochs snapshotted

    // open-set calibration
    double lambda_percentile = 5.0;

    // augmentation
    AugmentPolicy augment;           // stage-1 two-view policy
    bool stage2_flip_augment = true; // light flips while fitting the classifier

    // run
    std::uint64_t seed = 42;
    std::string out_dir = "runs/default";

    void validate() const;

    /// Sorted `key = value` dump; the canonical form behind config_hash().
    std::string to_canonical_string() const;
    /// 16-hex-digit FNV-1a of the canonical form.
    std::string config_hash() const;

    void save(const std::filesystem::path& file) const;
    static RunConfig load(const std::filesystem::path& file);
    /// Applies one `key = value` assignment (used by file parsing and CLI
    /// overrides alike).
    void set(const std::string& key, const std::string& value);
};

}  // namespace osfd
