#pragma once

#include <cstdint>

#include "osfd/image.hpp"

namespace osfd {

/// Stochastic view-augmentation policy. Operates on pixels only, so labels
/// are untouched by construction. All fields off (crop range (1,1), zero
/// probabilities and strength) is the identity.
struct AugmentPolicy {
    float crop_lo = 0.8f;           // random resized crop, side-scale range
    float crop_hi = 1.0f;
    float flip_prob = 0.5f;
    float color_jitter = 0.4f;      // brightness/contrast/saturation strength
    float grayscale_prob = 0.1f;

    static AugmentPolicy identity() { return {1.0f, 1.0f, 0.0f, 0.0f, 0.0f}; }
    static AugmentPolicy defaults() { return {}; }
    /// Flip-only policy for the classifier fine-tuning stage.
    static AugmentPolicy light() { return {1.0f, 1.0f, 0.5f, 0.0f, 0.0f}; }

    void validate() const;
};

/// Applies the policy to one image. Deterministic for a fixed seed; output
/// has the input's shape and values clipped to [0,1].
Image apply_augment(const AugmentPolicy& policy, const Image& img, std::uint64_t seed);

}  // namespace osfd
