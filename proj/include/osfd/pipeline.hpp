#pragma once

#include <filesystem>
#include <vector>

#include "osfd/checkpoint.hpp"
#include "osfd/config.hpp"
#include "osfd/datamodel.hpp"
#include "osfd/model.hpp"

namespace osfd {

struct TrainLogRow {
    int epoch = 0;        // 1-based
    double loss_mean = 0.0;
    double lr = 0.0;
    double wall_seconds = 0.0;
};

struct TrainLog {
    std::string stage;
    std::vector<TrainLogRow> rows;
    bool aborted = false;  // non-finite loss encountered; last good weights kept

    void append_csv(const std::filesystem::path& file) const;
};

struct Stage1Result {
    CheckpointSet snapshots;  // encoder weights, trailing-window cadence
    TrainLog log;
};

/// Representation learning: minimizes the configured stage-1 loss over
/// two-view batches. Trains encoder+projection for the contrastive variants,
/// encoder+classifier for the cross-entropy variant. Snapshots the encoder
/// each epoch over the trailing swa_window fraction of epochs.
Stage1Result stage1_train(const RunConfig& config, ModelStack& model,
                          const std::vector<Sample>& train_samples, const LabelSpace& space);

/// Loads the snapshot average into the encoder and recomputes normalization
/// statistics with one pass over the training set.
void apply_swa(const RunConfig& config, ModelStack& model, const CheckpointSet& snapshots,
               const std::vector<Sample>& train_samples);

struct Stage2Result {
    TrainLog log;
    double train_accuracy = 0.0;
};

/// Classifier fine-tuning on the frozen encoder: only the (re-initialized)
/// classifier head is updated; encoder weights are bit-identical afterwards.
Stage2Result stage2_finetune(const RunConfig& config, ModelStack& model,
                             const std::vector<Sample>& train_samples, const LabelSpace& space);

/// Stacks sample images (optionally flip-augmented) into an NHWC batch.
Tensor samples_to_batch(const std::vector<Sample>& samples, const std::vector<int>& indices);

/// Closed-set accuracy of argmax classification, no augmentation.
double closed_set_accuracy(ModelStack& model, const std::vector<Sample>& samples,
                           const LabelSpace& space, int batch_size = 128);

}  // namespace osfd
