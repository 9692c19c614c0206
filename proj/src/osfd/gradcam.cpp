#include "osfd/gradcam.hpp"

#include <algorithm>
#include <cmath>

#include "osfd/error.hpp"

namespace osfd {

double ActivationMap::spatial_entropy() const {
    double total = 0.0;
    for (float v : heatmap) total += v;
    if (total <= 0.0) return 1.0;  // flat map carries no localization
    double h = 0.0;
    for (float v : heatmap) {
        if (v <= 0.0f) continue;
        const double p = v / total;
        h -= p * std::log(p);
    }
    return h / std::log(static_cast<double>(heatmap.size()));
}

ActivationMap gradcam(ModelStack& model, const Image& image, int target_class) {
    OSFD_REQUIRE(target_class >= 0 && target_class < model.num_classes(),
                 "gradcam: target class ", target_class, " out of range");
    const int grid_layer = model.feature_grid_layer();
    OSFD_REQUIRE(grid_layer >= 0, "gradcam: encoder has no convolutional feature grid");

    Tensor batch({1, image.height, image.width, 3});
    std::copy(image.px.begin(), image.px.end(), batch.data());

    // Forward with frozen statistics but caches kept, recording the grid
    // activation on the way.
    nn::Sequential& enc = model.encoder();
    Tensor h = batch;
    Tensor grid_activation;
    for (std::size_t i = 0; i < enc.size(); ++i) {
        h = enc.layer(i).forward(h, nn::Mode::kRecord);
        if (static_cast<int>(i) == grid_layer) grid_activation = h;
    }
    OSFD_REQUIRE(grid_activation.ndim() == 4, "gradcam: feature grid is not spatial");
    Tensor logits = model.classify(h, nn::Mode::kRecord);

    // Seed the backward pass with the one-hot target.
    Tensor d_logits(logits.shape());
    d_logits[target_class] = 1.0f;
    Tensor g = model.classifier_backward(d_logits);
    for (std::size_t i = enc.size(); i-- > static_cast<std::size_t>(grid_layer) + 1;) {
        g = enc.layer(i).backward(g);
    }
    OSFD_REQUIRE(g.shape() == grid_activation.shape(), "gradcam: gradient/activation mismatch");

    const std::int64_t gh = grid_activation.dim(1), gw = grid_activation.dim(2),
                       gc = grid_activation.dim(3);
    // Channel weights: spatial mean of the gradient.
    std::vector<double> weights(static_cast<std::size_t>(gc), 0.0);
    for (std::int64_t pos = 0; pos < gh * gw; ++pos) {
        for (std::int64_t c = 0; c < gc; ++c) {
            weights[static_cast<std::size_t>(c)] += g[pos * gc + c];
        }
    }
    for (double& w : weights) w /= static_cast<double>(gh * gw);

    Image raw(static_cast<int>(gh), static_cast<int>(gw));
    float lo = std::numeric_limits<float>::infinity();
    float hi = -std::numeric_limits<float>::infinity();
    for (std::int64_t pos = 0; pos < gh * gw; ++pos) {
        double acc = 0.0;
        for (std::int64_t c = 0; c < gc; ++c) {
            acc += weights[static_cast<std::size_t>(c)] * grid_activation[pos * gc + c];
        }
        const float v = static_cast<float>(std::max(acc, 0.0));  // rectified
        raw.px[static_cast<std::size_t>(pos) * 3 + 0] = v;
        raw.px[static_cast<std::size_t>(pos) * 3 + 1] = v;
        raw.px[static_cast<std::size_t>(pos) * 3 + 2] = v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    // Normalize unless the map is constant.
    if (hi > lo) {
        for (float& v : raw.px) v = (v - lo) / (hi - lo);
    } else {
        for (float& v : raw.px) v = 0.0f;
    }

    const Image up = resize_bilinear(raw, image.height, image.width);
    ActivationMap map;
    map.height = image.height;
    map.width = image.width;
    map.target_class = target_class;
    map.heatmap.resize(static_cast<std::size_t>(image.height) * image.width);
    for (std::size_t p = 0; p < map.heatmap.size(); ++p) {
        map.heatmap[p] = std::clamp(up.px[p * 3], 0.0f, 1.0f);
    }
    OSFD_REQUIRE(std::all_of(map.heatmap.begin(), map.heatmap.end(),
                             [](float v) { return std::isfinite(v); }),
                 "gradcam: non-finite heatmap");
    return map;
}

Image overlay_heatmap(const Image& image, const ActivationMap& map) {
    OSFD_REQUIRE(map.height == image.height && map.width == image.width,
                 "overlay_heatmap: size mismatch");
    Image out(image.height, image.width);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            const float v = map.at(y, x);
            // Blue -> green -> red ramp.
            const float r = std::clamp(1.5f * v - 0.25f, 0.0f, 1.0f);
            const float g = std::clamp(1.5f - std::abs(2.0f * v - 1.0f) * 1.5f, 0.0f, 1.0f);
            const float b = std::clamp(1.25f - 1.5f * v, 0.0f, 1.0f);
            const float* src = image.at(y, x);
            float* dst = out.at(y, x);
            dst[0] = 0.5f * src[0] + 0.5f * r;
            dst[1] = 0.5f * src[1] + 0.5f * g;
            dst[2] = 0.5f * src[2] + 0.5f * b;
        }
    }
    clip01(out);
    return out;
}

}  // namespace osfd
