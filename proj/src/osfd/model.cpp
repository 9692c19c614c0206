#include "osfd/model.hpp"

#include "osfd/error.hpp"
#include "osfd/rng.hpp"

namespace osfd {

namespace {

void add_conv_block(nn::Sequential& seq, const std::string& tag, int in_ch, int out_ch,
                    int stride, std::uint64_t seed) {
    seq.add(std::make_unique<nn::Conv2d>("encoder." + tag + ".conv", in_ch, out_ch, 3, stride,
                                         /*bias=*/false, derive_seed(seed, tag)));
    seq.add(std::make_unique<nn::BatchNorm2d>("encoder." + tag + ".bn", out_ch));
    seq.add(std::make_unique<nn::ReLU>("encoder." + tag + ".relu"));
}

}  // namespace

ModelStack ModelStack::build(const std::string& encoder_kind, int num_classes,
                             bool projection_bias, std::uint64_t seed) {
    OSFD_REQUIRE(num_classes >= 2, "ModelStack needs at least 2 classes, got ", num_classes);
    ModelStack m;
    m.encoder_kind_ = encoder_kind;
    m.num_classes_ = num_classes;

    if (encoder_kind == "small_conv") {
        add_conv_block(m.encoder_, "b1", 3, 16, 2, seed);
        add_conv_block(m.encoder_, "b2", 16, 32, 1, seed);
        m.encoder_.add(std::make_unique<nn::MaxPool2x2>("encoder.pool1"));
        add_conv_block(m.encoder_, "b3", 32, 48, 1, seed);
        add_conv_block(m.encoder_, "b4", 48, 64, 1, seed);
        m.encoder_.add(std::make_unique<nn::MaxPool2x2>("encoder.pool2"));
        add_conv_block(m.encoder_, "b5", 64, 96, 1, seed);
        add_conv_block(m.encoder_, "b6", 96, kEmbeddingDim, 1, seed);
        m.feature_grid_layer_ = static_cast<int>(m.encoder_.size()) - 1;  // b6 relu
        m.encoder_.add(std::make_unique<nn::GlobalAvgPool>("encoder.gap"));
    } else if (encoder_kind == "densenet") {
        add_conv_block(m.encoder_, "stem", 3, 24, 2, seed);
        m.encoder_.add(std::make_unique<nn::MaxPool2x2>("encoder.stem.pool"));
        m.encoder_.add(std::make_unique<nn::DenseBlock>("encoder.dense1", 24, 12, 4,
                                                        derive_seed(seed, "dense1")));
        m.encoder_.add(std::make_unique<nn::BatchNorm2d>("encoder.t1.bn", 72));
        m.encoder_.add(std::make_unique<nn::ReLU>("encoder.t1.relu"));
        m.encoder_.add(std::make_unique<nn::Conv2d>("encoder.t1.conv", 72, 36, 1, 1, false,
                                                    derive_seed(seed, "t1")));
        m.encoder_.add(std::make_unique<nn::AvgPool2x2>("encoder.t1.pool"));
        m.encoder_.add(std::make_unique<nn::DenseBlock>("encoder.dense2", 36, 12, 4,
                                                        derive_seed(seed, "dense2")));
        m.encoder_.add(std::make_unique<nn::BatchNorm2d>("encoder.t2.bn", 84));
        m.encoder_.add(std::make_unique<nn::ReLU>("encoder.t2.relu"));
        m.encoder_.add(std::make_unique<nn::Conv2d>("encoder.t2.conv", 84, 42, 1, 1, false,
                                                    derive_seed(seed, "t2")));
        m.encoder_.add(std::make_unique<nn::AvgPool2x2>("encoder.t2.pool"));
        m.encoder_.add(std::make_unique<nn::DenseBlock>("encoder.dense3", 42, 12, 4,
                                                        derive_seed(seed, "dense3")));
        m.encoder_.add(std::make_unique<nn::BatchNorm2d>("encoder.head.bn", 90));
        m.encoder_.add(std::make_unique<nn::ReLU>("encoder.head.relu"));
        m.encoder_.add(std::make_unique<nn::Conv2d>("encoder.head.conv", 90, kEmbeddingDim, 1, 1,
                                                    false, derive_seed(seed, "head")));
        m.encoder_.add(std::make_unique<nn::BatchNorm2d>("encoder.head.bn2", kEmbeddingDim));
        m.encoder_.add(std::make_unique<nn::ReLU>("encoder.head.relu2"));
        m.feature_grid_layer_ = static_cast<int>(m.encoder_.size()) - 1;
        m.encoder_.add(std::make_unique<nn::GlobalAvgPool>("encoder.gap"));
    } else {
        fail("unknown encoder kind '", encoder_kind, "' (expected small_conv or densenet)");
    }

    m.proj_linear_ = std::make_unique<nn::Linear>("projection.linear", kEmbeddingDim,
                                                  kEmbeddingDim, projection_bias,
                                                  derive_seed(seed, "projection"));
    m.proj_norm_ = std::make_unique<nn::L2Normalize>("projection.norm");
    m.classifier_ = std::make_unique<nn::Linear>("classifier.linear", kEmbeddingDim, num_classes,
                                                 /*bias=*/true, derive_seed(seed, "classifier"));
    return m;
}

Tensor ModelStack::encode(const Tensor& images, nn::Mode mode) {
    OSFD_REQUIRE(images.ndim() == 4 && images.dim(3) == 3,
                 "encode expects [N,H,W,3], got ", images.shape_str());
    OSFD_REQUIRE(images.dim(1) == images.dim(2), "encode expects square images, got ",
                 images.shape_str());
    OSFD_REQUIRE(images.dim(1) % 8 == 0, "image side must be a multiple of 8, got ",
                 images.dim(1));
    Tensor r = encoder_.forward(images, mode);
    OSFD_REQUIRE(r.ndim() == 2 && r.dim(1) == kEmbeddingDim, "encoder output shape ",
                 r.shape_str());
    OSFD_REQUIRE(r.all_finite(), "encoder produced non-finite embeddings");
    return r;
}

Tensor ModelStack::project(const Tensor& r, nn::Mode mode) {
    OSFD_REQUIRE(r.ndim() == 2 && r.dim(1) == kEmbeddingDim, "project expects [N,",
                 kEmbeddingDim, "], got ", r.shape_str());
    return proj_norm_->forward(proj_linear_->forward(r, mode), mode);
}

Tensor ModelStack::classify(const Tensor& r, nn::Mode mode) {
    OSFD_REQUIRE(r.ndim() == 2 && r.dim(1) == kEmbeddingDim, "classify expects [N,",
                 kEmbeddingDim, "], got ", r.shape_str());
    return classifier_->forward(r, mode);
}

Tensor ModelStack::encoder_backward(const Tensor& d_r) { return encoder_.backward(d_r); }

Tensor ModelStack::projection_backward(const Tensor& d_z) {
    return proj_linear_->backward(proj_norm_->backward(d_z));
}

Tensor ModelStack::classifier_backward(const Tensor& d_logits) {
    return classifier_->backward(d_logits);
}

std::vector<nn::Param*> ModelStack::encoder_params() { return encoder_.params(); }

std::vector<nn::Param*> ModelStack::projection_params() {
    std::vector<nn::Param*> out;
    proj_linear_->collect_params(out);
    return out;
}

std::vector<nn::Param*> ModelStack::classifier_params() {
    std::vector<nn::Param*> out;
    classifier_->collect_params(out);
    return out;
}

void ModelStack::reset_classifier(int num_classes, std::uint64_t seed) {
    OSFD_REQUIRE(num_classes >= 2, "classifier needs at least 2 classes");
    num_classes_ = num_classes;
    classifier_ = std::make_unique<nn::Linear>("classifier.linear", kEmbeddingDim, num_classes,
                                               true, seed);
}

namespace {
NamedTensors snapshot_params(const std::vector<nn::Param*>& params) {
    NamedTensors out;
    for (const nn::Param* p : params) out.emplace(p->name, p->value);
    return out;
}

void load_params(const std::vector<nn::Param*>& params, const NamedTensors& weights) {
    for (nn::Param* p : params) {
        auto it = weights.find(p->name);
        OSFD_REQUIRE(it != weights.end(), "missing parameter '", p->name, "' in weights");
        OSFD_REQUIRE(it->second.same_shape(p->value), "parameter '", p->name,
                     "' shape mismatch: have ", p->value.shape_str(), ", file has ",
                     it->second.shape_str());
        p->value = it->second;
    }
}
}  // namespace

NamedTensors ModelStack::snapshot_encoder() const {
    auto& self = const_cast<ModelStack&>(*this);
    return snapshot_params(self.encoder_params());
}

void ModelStack::load_encoder(const NamedTensors& weights) { load_params(encoder_params(), weights); }

NamedTensors ModelStack::snapshot_all() const {
    auto& self = const_cast<ModelStack&>(*this);
    NamedTensors out = snapshot_params(self.encoder_params());
    for (const auto& [k, v] : snapshot_params(self.projection_params())) out.emplace(k, v);
    for (const auto& [k, v] : snapshot_params(self.classifier_params())) out.emplace(k, v);
    return out;
}

void ModelStack::load_all(const NamedTensors& weights) {
    load_params(encoder_params(), weights);
    load_params(projection_params(), weights);
    load_params(classifier_params(), weights);
}

void ModelStack::begin_bn_stats() {
    for (std::size_t i = 0; i < encoder_.size(); ++i) encoder_.layer(i).begin_bn_stats();
}

void ModelStack::finalize_bn_stats() {
    for (std::size_t i = 0; i < encoder_.size(); ++i) encoder_.layer(i).finalize_bn_stats();
}

}  // namespace osfd
