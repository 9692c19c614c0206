#include "osfd/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

#include "osfd/error.hpp"

namespace osfd {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline std::uint8_t to_byte(float v) {
    float c = std::min(1.0f, std::max(0.0f, v));
    return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

}  // namespace

Image read_png(const std::filesystem::path& file) {
    FilePtr fp(std::fopen(file.string().c_str(), "rb"));
    OSFD_REQUIRE(fp != nullptr, "cannot open image file: ", file.string());

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    OSFD_REQUIRE(png != nullptr, "libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        fail("libpng info init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail("malformed PNG: ", file.string());
    }

    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    int color_type = png_get_color_type(png, info);
    int bit_depth = png_get_bit_depth(png, info);

    // Normalize every PNG variant to 8-bit RGB.
    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_set_interlace_handling(png);
    png_read_update_info(png, info);

    std::size_t row_bytes = png_get_rowbytes(png, info);
    OSFD_REQUIRE(row_bytes == static_cast<std::size_t>(w) * 3,
                 "unexpected PNG row size in ", file.string());

    std::vector<std::uint8_t> raw(static_cast<std::size_t>(h) * row_bytes);
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = raw.data() + y * row_bytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Image img(static_cast<int>(h), static_cast<int>(w));
    for (std::size_t i = 0; i < img.px.size(); ++i) img.px[i] = raw[i] / 255.0f;
    return img;
}

void write_png(const std::filesystem::path& file, const Image& img) {
    OSFD_REQUIRE(img.height > 0 && img.width > 0, "write_png: empty image");
    FilePtr fp(std::fopen(file.string().c_str(), "wb"));
    OSFD_REQUIRE(fp != nullptr, "cannot open for writing: ", file.string());

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    OSFD_REQUIRE(png != nullptr, "libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        fail("libpng info init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail("PNG write failed: ", file.string());
    }

    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<std::uint8_t> row(static_cast<std::size_t>(img.width) * 3);
    for (int y = 0; y < img.height; ++y) {
        const float* src = img.at(y, 0);
        for (int i = 0; i < img.width * 3; ++i) row[static_cast<std::size_t>(i)] = to_byte(src[i]);
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Image resize_bilinear(const Image& img, int out_h, int out_w) {
    OSFD_REQUIRE(out_h > 0 && out_w > 0, "resize_bilinear: bad target size");
    if (out_h == img.height && out_w == img.width) return img;
    Image out(out_h, out_w);
    const float sy = static_cast<float>(img.height) / out_h;
    const float sx = static_cast<float>(img.width) / out_w;
    for (int y = 0; y < out_h; ++y) {
        // Pixel-center sampling keeps the mapping symmetric.
        float fy = (y + 0.5f) * sy - 0.5f;
        int y0 = static_cast<int>(std::floor(fy));
        float wy = fy - y0;
        int y0c = std::clamp(y0, 0, img.height - 1);
        int y1c = std::clamp(y0 + 1, 0, img.height - 1);
        for (int x = 0; x < out_w; ++x) {
            float fx = (x + 0.5f) * sx - 0.5f;
            int x0 = static_cast<int>(std::floor(fx));
            float wx = fx - x0;
            int x0c = std::clamp(x0, 0, img.width - 1);
            int x1c = std::clamp(x0 + 1, 0, img.width - 1);
            const float* p00 = img.at(y0c, x0c);
            const float* p01 = img.at(y0c, x1c);
            const float* p10 = img.at(y1c, x0c);
            const float* p11 = img.at(y1c, x1c);
            float* dst = out.at(y, x);
            for (int c = 0; c < 3; ++c) {
                float top = p00[c] + (p01[c] - p00[c]) * wx;
                float bot = p10[c] + (p11[c] - p10[c]) * wx;
                dst[c] = top + (bot - top) * wy;
            }
        }
    }
    return out;
}

Image hflip(const Image& img) {
    Image out(img.height, img.width);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const float* src = img.at(y, img.width - 1 - x);
            float* dst = out.at(y, x);
            dst[0] = src[0];
            dst[1] = src[1];
            dst[2] = src[2];
        }
    }
    return out;
}

Image crop(const Image& img, int y0, int x0, int h, int w) {
    OSFD_REQUIRE(y0 >= 0 && x0 >= 0 && h > 0 && w > 0 && y0 + h <= img.height && x0 + w <= img.width,
                 "crop window out of bounds");
    Image out(h, w);
    for (int y = 0; y < h; ++y) {
        std::memcpy(out.at(y, 0), img.at(y0 + y, x0), static_cast<std::size_t>(w) * 3 * sizeof(float));
    }
    return out;
}

Image box_blur(const Image& img, int radius) {
    OSFD_REQUIRE(radius >= 1, "box_blur: radius must be >= 1");
    Image tmp(img.height, img.width);
    Image out(img.height, img.width);
    const int n = 2 * radius + 1;
    // Horizontal pass.
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            float acc[3] = {0, 0, 0};
            for (int k = -radius; k <= radius; ++k) {
                int xc = std::clamp(x + k, 0, img.width - 1);
                const float* p = img.at(y, xc);
                acc[0] += p[0];
                acc[1] += p[1];
                acc[2] += p[2];
            }
            float* dst = tmp.at(y, x);
            dst[0] = acc[0] / n;
            dst[1] = acc[1] / n;
            dst[2] = acc[2] / n;
        }
    }
    // Vertical pass.
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            float acc[3] = {0, 0, 0};
            for (int k = -radius; k <= radius; ++k) {
                int yc = std::clamp(y + k, 0, img.height - 1);
                const float* p = tmp.at(yc, x);
                acc[0] += p[0];
                acc[1] += p[1];
                acc[2] += p[2];
            }
            float* dst = out.at(y, x);
            dst[0] = acc[0] / n;
            dst[1] = acc[1] / n;
            dst[2] = acc[2] / n;
        }
    }
    return out;
}

void clip01(Image& img) {
    for (float& v : img.px) v = std::min(1.0f, std::max(0.0f, v));
}

float luminance(const float* rgb) {
    return 0.299f * rgb[0] + 0.587f * rgb[1] + 0.114f * rgb[2];
}

Tensor image_to_tensor(const Image& img) {
    Tensor t({img.height, img.width, 3});
    std::copy(img.px.begin(), img.px.end(), t.data());
    return t;
}

Image tensor_to_image(const Tensor& t) {
    OSFD_REQUIRE(t.ndim() == 3 && t.dim(2) == 3, "tensor_to_image expects [H, W, 3], got ", t.shape_str());
    Image img(static_cast<int>(t.dim(0)), static_cast<int>(t.dim(1)));
    std::copy(t.data(), t.data() + t.numel(), img.px.begin());
    return img;
}

double mean_abs_diff(const Image& a, const Image& b) {
    OSFD_REQUIRE(a.height == b.height && a.width == b.width, "mean_abs_diff: shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.px.size(); ++i) acc += std::abs(a.px[i] - b.px[i]);
    return a.px.empty() ? 0.0 : acc / static_cast<double>(a.px.size());
}

double fraction_pixels_changed(const Image& a, const Image& b, float tol) {
    OSFD_REQUIRE(a.height == b.height && a.width == b.width, "fraction_pixels_changed: shape mismatch");
    std::size_t changed = 0;
    std::size_t total = static_cast<std::size_t>(a.height) * a.width;
    for (std::size_t p = 0; p < total; ++p) {
        const float* pa = a.px.data() + p * 3;
        const float* pb = b.px.data() + p * 3;
        if (std::abs(pa[0] - pb[0]) > tol || std::abs(pa[1] - pb[1]) > tol ||
            std::abs(pa[2] - pb[2]) > tol) {
            ++changed;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(changed) / static_cast<double>(total);
}

}  // namespace osfd
