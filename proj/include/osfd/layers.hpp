#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "osfd/tensor.hpp"

namespace osfd::nn {

/// Forward-pass mode.
///  kTrain  - batch statistics, caches kept for backward
///  kEval   - running statistics, no caches
///  kRecord - running statistics, caches kept (backward through a frozen
///            model, e.g. activation-map extraction)
///  kStats  - batch statistics accumulated into normalization layers
///            (post-averaging statistics recomputation), no caches
enum class Mode { kTrain, kEval, kRecord, kStats };

struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
    bool trainable = true;
};

class Layer {
public:
    explicit Layer(std::string name) : name_(std::move(name)) {}
    virtual ~Layer() = default;

    virtual Tensor forward(const Tensor& x, Mode mode) = 0;
    /// Gradient w.r.t. the layer input; fills param grads as a side effect.
    /// Valid only after forward with kTrain or kRecord.
    virtual Tensor backward(const Tensor& dy) = 0;
    virtual void collect_params(std::vector<Param*>& out) { (void)out; }

    /// Normalization-statistics recompute hooks; no-ops for stateless layers.
    virtual void begin_bn_stats() {}
    virtual void finalize_bn_stats() {}

    const std::string& name() const { return name_; }

private:
    std::string name_;
};

/// 2D convolution, NHWC, square kernel, "same" padding for odd kernels.
class Conv2d : public Layer {
public:
    Conv2d(std::string name, int in_ch, int out_ch, int ksize, int stride, bool bias,
           std::uint64_t init_seed);

    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& dy) override;
    void collect_params(std::vector<Param*>& out) override;

    int in_channels() const { return in_ch_; }
    int out_channels() const { return out_ch_; }

private:
    int in_ch_, out_ch_, ksize_, stride_, pad_;
    bool has_bias_;
    Param weight_;  // [k*k*in_ch, out_ch]
    Param bias_;    // [out_ch]
    Tensor x_cache_;
    Tensor cols_cache_;
    std::vector<std::int64_t> out_shape_cache_;
};

/// Per-channel batch normalization over N*H*W (NHWC input).
class BatchNorm2d : public Layer {
public:
    BatchNorm2d(std::string name, int channels, float momentum = 0.1f, float eps = 1e-5f);

    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& dy) override;
    void collect_params(std::vector<Param*>& out) override;

    /// kStats accumulation control: reset before a recompute pass, finalize
    /// after it to overwrite the running statistics.
    void begin_bn_stats() override;
    void finalize_bn_stats() override;

private:
    int channels_;
    float momentum_, eps_;
    Param gamma_, beta_;
    Param run_mean_, run_var_;  // trainable=false, checkpointed
    // caches (train / record)
    Tensor xhat_cache_;
    std::vector<float> inv_std_cache_;
    bool record_mode_ = false;
    std::int64_t batch_count_ = 0;
    // stats accumulation
    double stat_count_ = 0.0;
    std::vector<double> stat_sum_, stat_sumsq_;
};

class ReLU : public Layer {
public:
    explicit ReLU(std::string name) : Layer(std::move(name)) {}
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& dy) override;

private:
    std::vector<char> mask_;
};

/// 2x2 max pooling, stride 2. Spatial dims must be even.
class MaxPool2x2 : public Layer {
public:
    explicit MaxPool2x2(std::string name) : Layer(std::move(name)) {}
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& dy) override;

private:
    std::vector<std::uint8_t> argmax_;
    std::vector<std::int64_t> in_shape_;
};

/// 2x2 average pooling, stride 2.
class AvgPool2x2 : public Layer {
public:
    explicit AvgPool2x2(std::string name) : Layer(std::move(name)) {}
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& dy) override;

private:
    std::vector<std::int64_t> in_shape_;
};

/// [N,H,W,C] -> [N,C] spatial mean.
class GlobalAvgPool : public Layer {
public:
    explicit GlobalAvgPool(std::string name) : Layer(std::move(name)) {}
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& dy) override;

private:
    std::vector<std::int64_t> in_shape_;
};

class Linear : public Layer {
public:
    Linear(std::string name, int in_dim, int out_dim, bool bias, std::uint64_t init_seed);

    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& dy) override;
    void collect_params(std::vector<Param*>& out) override;

    int in_dim() const { return in_dim_; }
    int out_dim() const { return out_dim_; }

private:
    int in_dim_, out_dim_;
    bool has_bias_;
    Param weight_;  // [in_dim, out_dim]
    Param bias_;
    Tensor x_cache_;
};

/// Row-wise L2 normalization with a clamped norm, so a zero row never
/// divides by zero.
class L2Normalize : public Layer {
public:
    explicit L2Normalize(std::string name, float eps = 1e-8f)
        : Layer(std::move(name)), eps_(eps) {}
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& dy) override;

private:
    float eps_;
    Tensor x_cache_;
    std::vector<float> norm_cache_;
};

/// Dense connectivity block: `steps` rounds of BN-ReLU-Conv3x3(growth),
/// each consuming the channel-concatenation of everything before it.
class DenseBlock : public Layer {
public:
    DenseBlock(std::string name, int in_ch, int growth, int steps, std::uint64_t init_seed);

    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& dy) override;
    void collect_params(std::vector<Param*>& out) override;
    void begin_bn_stats() override;
    void finalize_bn_stats() override;

    int out_channels() const { return in_ch_ + growth_ * steps_; }

private:
    int in_ch_, growth_, steps_;
    std::vector<std::unique_ptr<BatchNorm2d>> bns_;
    std::vector<std::unique_ptr<ReLU>> relus_;
    std::vector<std::unique_ptr<Conv2d>> convs_;
    std::vector<std::int64_t> in_shape_;
};

class Sequential {
public:
    Sequential() = default;
    Sequential(Sequential&&) = default;
    Sequential& operator=(Sequential&&) = default;

    void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

    Tensor forward(const Tensor& x, Mode mode);
    Tensor backward(const Tensor& dy);
    void collect_params(std::vector<Param*>& out);
    std::vector<Param*> params();

    std::size_t size() const { return layers_.size(); }
    Layer& layer(std::size_t i) { return *layers_[i]; }
    const Layer& layer(std::size_t i) const { return *layers_[i]; }

private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

/// SGD with classical momentum and L2 weight decay folded into the gradient.
class SgdMomentum {
public:
    SgdMomentum(double momentum, double weight_decay)
        : momentum_(momentum), weight_decay_(weight_decay) {}

    void step(const std::vector<Param*>& params, double lr);
    static void zero_grad(const std::vector<Param*>& params);

private:
    double momentum_, weight_decay_;
    std::vector<Tensor> velocity_;
    std::vector<Param*> bound_;  // velocity slot i belongs to bound_[i]
};

/// Cosine decay from base_lr to zero over total_epochs.
double cosine_lr(double base_lr, int epoch, int total_epochs);

}  // namespace osfd::nn
