#include "osfd/augment.hpp"

#include <algorithm>
#include <cmath>

#include "osfd/error.hpp"
#include "osfd/rng.hpp"

namespace osfd {

void AugmentPolicy::validate() const {
    OSFD_REQUIRE(crop_lo > 0.0f && crop_lo <= crop_hi && crop_hi <= 1.0f,
                 "crop scale range must satisfy 0 < lo <= hi <= 1, got (", crop_lo, ", ", crop_hi, ")");
    OSFD_REQUIRE(flip_prob >= 0.0f && flip_prob <= 1.0f, "flip_prob must be in [0,1]");
    OSFD_REQUIRE(grayscale_prob >= 0.0f && grayscale_prob <= 1.0f, "grayscale_prob must be in [0,1]");
    OSFD_REQUIRE(color_jitter >= 0.0f, "color_jitter must be >= 0");
}

namespace {

void jitter_colors(Image& img, Rng& rng, float strength) {
    float lo = std::max(0.0f, 1.0f - strength);
    float hi = 1.0f + strength;
    float fb = static_cast<float>(rng.uniform(lo, hi));  // brightness
    float fc = static_cast<float>(rng.uniform(lo, hi));  // contrast
    float fs = static_cast<float>(rng.uniform(lo, hi));  // saturation

    // Contrast pivots on the mean luma of the brightness-adjusted image.
    double mean_luma = 0.0;
    for (std::size_t p = 0; p < img.px.size(); p += 3) {
        mean_luma += luminance(img.px.data() + p) * fb;
    }
    mean_luma /= static_cast<double>(img.px.size() / 3);
    const float pivot = static_cast<float>(mean_luma);

    for (std::size_t p = 0; p < img.px.size(); p += 3) {
        float* rgb = img.px.data() + p;
        float r = rgb[0] * fb, g = rgb[1] * fb, b = rgb[2] * fb;
        r = pivot + (r - pivot) * fc;
        g = pivot + (g - pivot) * fc;
        b = pivot + (b - pivot) * fc;
        float gray = 0.299f * r + 0.587f * g + 0.114f * b;
        rgb[0] = gray + (r - gray) * fs;
        rgb[1] = gray + (g - gray) * fs;
        rgb[2] = gray + (b - gray) * fs;
    }
}

void to_grayscale(Image& img) {
    for (std::size_t p = 0; p < img.px.size(); p += 3) {
        float* rgb = img.px.data() + p;
        float gray = luminance(rgb);
        rgb[0] = rgb[1] = rgb[2] = gray;
    }
}

}  // namespace

Image apply_augment(const AugmentPolicy& policy, const Image& img, std::uint64_t seed) {
    policy.validate();
    OSFD_REQUIRE(img.height > 0 && img.width > 0, "apply_augment: empty image");
    Rng rng(seed);
    Image out = img;

    // Random resized crop (skipped entirely when the range pins scale at 1).
    if (policy.crop_lo < 1.0f) {
        float scale = static_cast<float>(rng.uniform(policy.crop_lo, policy.crop_hi));
        int ch = std::max(1, static_cast<int>(std::lround(scale * img.height)));
        int cw = std::max(1, static_cast<int>(std::lround(scale * img.width)));
        ch = std::min(ch, img.height);
        cw = std::min(cw, img.width);
        int y0 = static_cast<int>(rng.uniform_int(0, img.height - ch));
        int x0 = static_cast<int>(rng.uniform_int(0, img.width - cw));
        out = resize_bilinear(crop(out, y0, x0, ch, cw), img.height, img.width);
    }

    if (policy.flip_prob > 0.0f && rng.chance(policy.flip_prob)) {
        out = hflip(out);
    }
    if (policy.color_jitter > 0.0f) {
        jitter_colors(out, rng, policy.color_jitter);
    }
    if (policy.grayscale_prob > 0.0f && rng.chance(policy.grayscale_prob)) {
        to_grayscale(out);
    }

    clip01(out);
    return out;
}

}  // namespace osfd
