#pragma once

#include <memory>
#include <string>

#include "osfd/checkpoint.hpp"
#include "osfd/layers.hpp"
#include "osfd/tensor.hpp"

namespace osfd {

inline constexpr int kEmbeddingDim = 128;

/// Encoder + projection head + classifier head.
///
/// encoder:    [N,S,S,3] image batch -> [N,128] embedding r
/// projection: r -> z, 128-d and unit-norm (contrastive training target)
/// classifier: r -> K logits
///
/// The encoder is backbone-agnostic; "small_conv" (six conv blocks) is the
/// desk-scale default and "densenet" selects a densely connected variant.
class ModelStack {
public:
    static ModelStack build(const std::string& encoder_kind, int num_classes,
                            bool projection_bias, std::uint64_t seed);

    Tensor encode(const Tensor& images, nn::Mode mode);
    Tensor project(const Tensor& r, nn::Mode mode);
    Tensor classify(const Tensor& r, nn::Mode mode);

    Tensor encoder_backward(const Tensor& d_r);
    Tensor projection_backward(const Tensor& d_z);   // returns d_r
    Tensor classifier_backward(const Tensor& d_logits);  // returns d_r

    std::vector<nn::Param*> encoder_params();
    std::vector<nn::Param*> projection_params();
    std::vector<nn::Param*> classifier_params();

    int num_classes() const { return num_classes_; }
    const std::string& encoder_kind() const { return encoder_kind_; }

    nn::Sequential& encoder() { return encoder_; }
    /// Index of the encoder layer whose output is the final convolutional
    /// feature grid (activation-map target). Negative if the encoder has
    /// no spatial grid.
    int feature_grid_layer() const { return feature_grid_layer_; }

    /// Replaces the classifier head (e.g. when the class count changes
    /// between stages).
    void reset_classifier(int num_classes, std::uint64_t seed);

    NamedTensors snapshot_encoder() const;
    void load_encoder(const NamedTensors& weights);
    NamedTensors snapshot_all() const;
    void load_all(const NamedTensors& weights);

    std::uint64_t encoder_hash() const { return named_tensors_hash(snapshot_encoder()); }

    /// BatchNorm running-statistics recompute pass: reset accumulators, run
    /// forward(kStats) over the data, then finalize.
    void begin_bn_stats();
    void finalize_bn_stats();

private:
    nn::Sequential encoder_;
    std::unique_ptr<nn::Linear> proj_linear_;
    std::unique_ptr<nn::L2Normalize> proj_norm_;
    std::unique_ptr<nn::Linear> classifier_;
    int num_classes_ = 0;
    int feature_grid_layer_ = -1;
    std::string encoder_kind_;
};

}  // namespace osfd
