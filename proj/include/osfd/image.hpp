#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "osfd/tensor.hpp"

namespace osfd {

/// RGB image, float pixels in [0,1], row-major H x W x 3.
struct Image {
    int height = 0;
    int width = 0;
    std::vector<float> px;  // height * width * 3

    Image() = default;
    Image(int h, int w) : height(h), width(w), px(static_cast<std::size_t>(h) * w * 3, 0.0f) {}

    float* at(int y, int x) { return px.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
    const float* at(int y, int x) const {
        return px.data() + (static_cast<std::size_t>(y) * width + x) * 3;
    }
    std::size_t size() const { return px.size(); }
};

/// Reads any PNG as 8-bit RGB and scales to [0,1]. Throws osfd::Error with
/// the file name on unreadable or malformed input.
Image read_png(const std::filesystem::path& file);

/// Writes 8-bit RGB PNG; pixels are clipped to [0,1] and rounded.
/// Byte-identical output for identical pixel content.
void write_png(const std::filesystem::path& file, const Image& img);

Image resize_bilinear(const Image& img, int out_h, int out_w);
Image hflip(const Image& img);
Image crop(const Image& img, int y0, int x0, int h, int w);

/// Separable box blur, odd radius window (2r+1).
Image box_blur(const Image& img, int radius);

void clip01(Image& img);

/// Rec.601 luma.
float luminance(const float* rgb);

Tensor image_to_tensor(const Image& img);             // [H, W, 3]
Image tensor_to_image(const Tensor& t);               // from [H, W, 3]

/// Mean absolute per-pixel-channel difference. Shapes must match.
double mean_abs_diff(const Image& a, const Image& b);

/// Fraction of pixels (any channel) differing by more than tol.
double fraction_pixels_changed(const Image& a, const Image& b, float tol = 1.0f / 512.0f);

}  // namespace osfd
