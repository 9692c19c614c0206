#pragma once

#include <filesystem>

#include "osfd/image.hpp"
#include "osfd/model.hpp"

namespace osfd {

/// Gradient-weighted class activation map, normalized to [0,1] and upsampled
/// to the input size.
struct ActivationMap {
    std::vector<float> heatmap;  // height x width, row-major
    int height = 0;
    int width = 0;
    int target_class = -1;

    float at(int y, int x) const { return heatmap[static_cast<std::size_t>(y) * width + x]; }

    /// Shannon entropy of the normalized map divided by log(cells): 1 is
    /// perfectly diffuse, small values mean concentrated activations.
    double spatial_entropy() const;
};

/// Backpropagates the target logit to the encoder's final convolutional
/// grid, weights each channel by its average gradient, and rectifies the
/// weighted sum. Deterministic in eval statistics. Rejects encoders without
/// a convolutional feature grid.
ActivationMap gradcam(ModelStack& model, const Image& image, int target_class);

/// 0.5-alpha overlay of the heatmap (blue->red ramp) on the input image.
Image overlay_heatmap(const Image& image, const ActivationMap& map);

}  // namespace osfd
