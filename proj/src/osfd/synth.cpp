#include "osfd/synth.hpp"

#include <algorithm>
#include <cmath>

#include "osfd/error.hpp"
#include "osfd/datamodel.hpp"
#include "osfd/rng.hpp"

namespace osfd {

namespace {

struct VideoParams {
    // background
    float bg0[3], bg1[3];
    float bg_angle;
    float wave_amp, wave_freq, wave_phase;
    // face geometry (fractions of side)
    float cx, cy, ax, ay, rot;
    float skin[3];
    // eyes
    float eye_dx, eye_dy, eye_r;
    float iris[3];
    // mouth
    float mouth_dy, mouth_w, mouth_h;
    float lip[3];
};

VideoParams draw_video_params(std::uint64_t dataset_seed, int video_index) {
    Rng rng(derive_seed(dataset_seed, "video", static_cast<std::uint64_t>(video_index)));
    VideoParams p{};
    for (int c = 0; c < 3; ++c) p.bg0[c] = static_cast<float>(rng.uniform(0.15, 0.85));
    for (int c = 0; c < 3; ++c) p.bg1[c] = static_cast<float>(rng.uniform(0.15, 0.85));
    p.bg_angle = static_cast<float>(rng.uniform(0.0, 2.0 * M_PI));
    p.wave_amp = static_cast<float>(rng.uniform(0.02, 0.05));
    p.wave_freq = static_cast<float>(rng.uniform(1.0, 2.5));
    p.wave_phase = static_cast<float>(rng.uniform(0.0, 2.0 * M_PI));

    p.cx = static_cast<float>(0.50 + rng.uniform(-0.05, 0.05));
    p.cy = static_cast<float>(0.52 + rng.uniform(-0.05, 0.05));
    p.ax = static_cast<float>(rng.uniform(0.26, 0.36));
    p.ay = static_cast<float>(rng.uniform(0.36, 0.46));
    p.rot = static_cast<float>(rng.uniform(-0.15, 0.15));

    p.skin[0] = static_cast<float>(rng.uniform(0.55, 0.85));
    p.skin[1] = p.skin[0] * static_cast<float>(rng.uniform(0.72, 0.84));
    p.skin[2] = p.skin[1] * static_cast<float>(rng.uniform(0.70, 0.88));

    p.eye_dx = p.ax * static_cast<float>(rng.uniform(0.40, 0.52));
    p.eye_dy = -p.ay * static_cast<float>(rng.uniform(0.22, 0.34));
    p.eye_r = static_cast<float>(rng.uniform(0.035, 0.050));
    for (int c = 0; c < 3; ++c) p.iris[c] = static_cast<float>(rng.uniform(0.05, 0.30));

    p.mouth_dy = p.ay * static_cast<float>(rng.uniform(0.42, 0.55));
    p.mouth_w = p.ax * static_cast<float>(rng.uniform(0.45, 0.65));
    p.mouth_h = static_cast<float>(rng.uniform(0.020, 0.035));
    p.lip[0] = static_cast<float>(rng.uniform(0.45, 0.65));
    p.lip[1] = static_cast<float>(rng.uniform(0.12, 0.28));
    p.lip[2] = static_cast<float>(rng.uniform(0.12, 0.28));
    return p;
}

/// Normalized elliptical distance of pixel (x, y) from a rotated ellipse;
/// < 1 inside, 1 on the boundary.
inline float ellipse_dist(float x, float y, float cx, float cy, float ax, float ay, float rot) {
    const float dx = x - cx;
    const float dy = y - cy;
    const float cs = std::cos(rot), sn = std::sin(rot);
    const float u = (dx * cs + dy * sn) / ax;
    const float v = (-dx * sn + dy * cs) / ay;
    return std::sqrt(u * u + v * v);
}

inline float smooth_inside(float d, float edge = 1.0f, float width = 0.05f) {
    return std::clamp((edge + width - d) / (2.0f * width), 0.0f, 1.0f);
}

inline void blend(float* dst, const float* color, float a) {
    for (int c = 0; c < 3; ++c) dst[c] += (color[c] - dst[c]) * a;
}

float face_mask_at(const VideoParams& p, float x, float y) {
    return smooth_inside(ellipse_dist(x, y, p.cx, p.cy, p.ax, p.ay, p.rot));
}

}  // namespace

Image render_pristine_frame(std::uint64_t dataset_seed, int video_index, int frame_idx, int side) {
    OSFD_REQUIRE(side >= 16, "render_pristine_frame: side too small");
    const VideoParams p = draw_video_params(dataset_seed, video_index);
    Rng frng(derive_seed(dataset_seed, "frame", static_cast<std::uint64_t>(video_index),
                         static_cast<std::uint64_t>(frame_idx)));
    // Per-frame jitter keeps frames of one video similar but not identical.
    const float jx = static_cast<float>(frng.uniform(-0.02, 0.02));
    const float jy = static_cast<float>(frng.uniform(-0.02, 0.02));
    const float illum = static_cast<float>(frng.uniform(0.92, 1.08));
    const float eye_open = static_cast<float>(frng.uniform(0.55, 1.0));
    const float mouth_open = static_cast<float>(frng.uniform(0.7, 1.4));

    const float cx = p.cx + jx, cy = p.cy + jy;
    const float bg_cos = std::cos(p.bg_angle), bg_sin = std::sin(p.bg_angle);

    Image img(side, side);
    Rng noise(derive_seed(dataset_seed, "noise", static_cast<std::uint64_t>(video_index),
                          static_cast<std::uint64_t>(frame_idx)));
    for (int yi = 0; yi < side; ++yi) {
        for (int xi = 0; xi < side; ++xi) {
            const float x = (xi + 0.5f) / side;
            const float y = (yi + 0.5f) / side;
            float* px = img.at(yi, xi);

            // Background: directional gradient plus one low-frequency wave.
            float t = 0.5f + 0.5f * ((x - 0.5f) * bg_cos + (y - 0.5f) * bg_sin) * 2.0f;
            t = std::clamp(t, 0.0f, 1.0f);
            const float wave =
                p.wave_amp * std::sin(2.0f * static_cast<float>(M_PI) * p.wave_freq * (x + y) +
                                      p.wave_phase);
            for (int c = 0; c < 3; ++c) px[c] = p.bg0[c] + (p.bg1[c] - p.bg0[c]) * t + wave;

            // Face with simple vertical shading.
            const float fd = ellipse_dist(x, y, cx, cy, p.ax, p.ay, p.rot);
            const float fm = smooth_inside(fd);
            if (fm > 0.0f) {
                float shade = 1.0f - 0.18f * fd;
                float skin[3] = {p.skin[0] * shade, p.skin[1] * shade, p.skin[2] * shade};
                blend(px, skin, fm);
            }

            // Eyes.
            for (int sgn = -1; sgn <= 1; sgn += 2) {
                const float ex = cx + sgn * p.eye_dx;
                const float ey = cy + p.eye_dy;
                const float ed = ellipse_dist(x, y, ex, ey, p.eye_r, p.eye_r * eye_open, p.rot);
                const float em = smooth_inside(ed, 1.0f, 0.25f);
                if (em > 0.0f) blend(px, p.iris, em);
            }

            // Mouth.
            const float md = ellipse_dist(x, y, cx, cy + p.mouth_dy, p.mouth_w,
                                          p.mouth_h * mouth_open, p.rot);
            const float mm = smooth_inside(md, 1.0f, 0.2f);
            if (mm > 0.0f) blend(px, p.lip, mm);

            for (int c = 0; c < 3; ++c) {
                px[c] = px[c] * illum + 0.008f * static_cast<float>(noise.normal());
            }
        }
    }
    clip01(img);
    return img;
}

namespace {

// M1: low-frequency sinusoidal watermark plus a small uniform lift, face
// region only.
void op_watermark(Image& img, const VideoParams& p, Rng& rng) {
    const int side = img.height;
    const float theta = static_cast<float>(rng.uniform(0.0, M_PI));
    const float freq = static_cast<float>(rng.uniform(3.0, 6.0));
    const float phase = static_cast<float>(rng.uniform(0.0, 2.0 * M_PI));
    const float amp = static_cast<float>(rng.uniform(0.06, 0.10));
    const float lift = static_cast<float>(rng.uniform(0.02, 0.04));
    const float ct = std::cos(theta), st = std::sin(theta);
    for (int yi = 0; yi < side; ++yi) {
        for (int xi = 0; xi < side; ++xi) {
            const float x = (xi + 0.5f) / side, y = (yi + 0.5f) / side;
            const float m = face_mask_at(p, x, y);
            if (m <= 0.0f) continue;
            const float s =
                lift + amp * std::sin(2.0f * static_cast<float>(M_PI) * freq * (x * ct + y * st) +
                                      phase);
            float* px = img.at(yi, xi);
            for (int c = 0; c < 3; ++c) px[c] += m * s;
        }
    }
}

// M2: rectangular patch swapped between the face halves, mirrored content,
// alpha-blended edges, slightly darkened.
void op_patch_swap(Image& img, const VideoParams& p, Rng& rng) {
    const int side = img.height;
    const float hw = static_cast<float>(rng.uniform(0.09, 0.13));
    const float hh = static_cast<float>(rng.uniform(0.11, 0.16));
    const float off_x = p.ax * static_cast<float>(rng.uniform(0.35, 0.55));
    const float off_y = p.ay * static_cast<float>(rng.uniform(-0.20, 0.20));
    const float alpha = static_cast<float>(rng.uniform(0.75, 0.95));
    const float darken = static_cast<float>(rng.uniform(0.90, 0.96));

    const Image src = img;  // sample from the unmodified frame
    const float cxl = p.cx - off_x, cxr = p.cx + off_x, cy = p.cy + off_y;
    for (int yi = 0; yi < side; ++yi) {
        for (int xi = 0; xi < side; ++xi) {
            const float x = (xi + 0.5f) / side, y = (yi + 0.5f) / side;
            for (int half = 0; half < 2; ++half) {
                const float cx = half == 0 ? cxl : cxr;
                const float ox = half == 0 ? cxr : cxl;
                const float dx = std::abs(x - cx) / hw;
                const float dy = std::abs(y - cy) / hh;
                if (dx >= 1.0f || dy >= 1.0f) continue;
                // Soft border: full strength in the core, feathered rim.
                const float a = alpha * std::min(smooth_inside(dx, 1.0f, 0.15f),
                                                 smooth_inside(dy, 1.0f, 0.15f));
                // Mirrored sample from the opposite patch.
                const float sx = ox - (x - cx);
                int syi = yi;
                int sxi = std::clamp(static_cast<int>(sx * side), 0, side - 1);
                const float* sp = src.at(syi, sxi);
                float patch[3] = {sp[0] * darken, sp[1] * darken, sp[2] * darken};
                blend(img.at(yi, xi), patch, a);
            }
        }
    }
}

// M3: per-channel affine color transfer inside the face region. One channel
// is pulled down and another pushed up, so the cast is always asymmetric.
void op_color_shift(Image& img, const VideoParams& p, Rng& rng) {
    const int side = img.height;
    float mult[3] = {static_cast<float>(rng.uniform(0.80, 0.88)),
                     static_cast<float>(rng.uniform(0.97, 1.03)),
                     static_cast<float>(rng.uniform(1.12, 1.22))};
    // Random assignment of {low, mid, high} to channels.
    for (int i = 2; i > 0; --i) {
        const int j = static_cast<int>(rng.uniform_int(0, i));
        std::swap(mult[i], mult[j]);
    }
    float bias[3];
    for (int c = 0; c < 3; ++c) bias[c] = static_cast<float>(rng.uniform(-0.03, 0.03));
    for (int yi = 0; yi < side; ++yi) {
        for (int xi = 0; xi < side; ++xi) {
            const float x = (xi + 0.5f) / side, y = (yi + 0.5f) / side;
            const float m = face_mask_at(p, x, y);
            if (m <= 0.0f) continue;
            float* px = img.at(yi, xi);
            for (int c = 0; c < 3; ++c) {
                const float shifted = mult[c] * px[c] + bias[c];
                px[c] += m * (shifted - px[c]);
            }
        }
    }
}

// M4: blur-or-sharpen band hugging the face boundary, with a slight shadow.
void op_boundary_ring(Image& img, const VideoParams& p, Rng& rng) {
    const int side = img.height;
    const float width = static_cast<float>(rng.uniform(0.06, 0.10));
    const bool sharpen = rng.chance(0.5);
    const float k = static_cast<float>(rng.uniform(0.8, 1.4));
    const float strength = static_cast<float>(rng.uniform(0.7, 1.0));
    const float shadow = static_cast<float>(rng.uniform(0.02, 0.05));

    const Image blurred = box_blur(img, 2);
    for (int yi = 0; yi < side; ++yi) {
        for (int xi = 0; xi < side; ++xi) {
            const float x = (xi + 0.5f) / side, y = (yi + 0.5f) / side;
            const float d = ellipse_dist(x, y, p.cx, p.cy, p.ax, p.ay, p.rot);
            const float rel = (d - 1.0f) / width;
            const float ring = std::exp(-rel * rel);
            if (ring < 0.01f) continue;
            float* px = img.at(yi, xi);
            const float* bl = blurred.at(yi, xi);
            for (int c = 0; c < 3; ++c) {
                const float target = sharpen ? px[c] + k * (px[c] - bl[c]) : bl[c];
                px[c] += strength * ring * (target - px[c]) - shadow * ring;
            }
        }
    }
}

}  // namespace

Image apply_forgery(const Image& pristine, const std::string& method,
                    std::uint64_t dataset_seed, int video_index) {
    OSFD_REQUIRE(pristine.height == pristine.width && pristine.height >= 16,
                 "apply_forgery: bad frame");
    const VideoParams p = draw_video_params(dataset_seed, video_index);
    const auto& methods = synthetic_methods();
    const auto it = std::find(methods.begin(), methods.end(), method);
    OSFD_REQUIRE(it != methods.end(), "unknown forgery operator '", method, "'");
    Rng rng(derive_seed(dataset_seed, "op:" + method, static_cast<std::uint64_t>(video_index)));

    Image out = pristine;
    if (method == "M1") {
        op_watermark(out, p, rng);
    } else if (method == "M2") {
        op_patch_swap(out, p, rng);
    } else if (method == "M3") {
        op_color_shift(out, p, rng);
    } else {
        op_boundary_ring(out, p, rng);
    }
    clip01(out);
    return out;
}

DatasetManifest generate_synthetic_benchmark(std::uint64_t seed, int n_videos,
                                             int frames_per_video,
                                             const std::filesystem::path& out_dir, int side) {
    OSFD_REQUIRE(n_videos >= 5, "need at least 5 videos, got ", n_videos);
    OSFD_REQUIRE(frames_per_video >= 1, "need at least 1 frame per video, got ", frames_per_video);
    OSFD_REQUIRE(side >= 16 && side % 8 == 0, "side must be a multiple of 8 and >= 16, got ", side);

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    OSFD_REQUIRE(!ec && std::filesystem::is_directory(out_dir),
                 "cannot create output directory ", out_dir.string());

    DatasetManifest manifest;
    manifest.root = out_dir;
    manifest.dataset_seed = seed;
    manifest.side = side;

    for (int v = 0; v < n_videos; ++v) {
        char vid[16];
        std::snprintf(vid, sizeof(vid), "vid%04d", v);
        for (int f = 0; f < frames_per_video; ++f) {
            const Image pristine = render_pristine_frame(seed, v, f, side);
            const std::string frame_name = std::to_string(f) + ".png";

            auto emit = [&](const std::string& method, const Image& img) {
                const std::filesystem::path dir = out_dir / method / vid;
                std::filesystem::create_directories(dir, ec);
                OSFD_REQUIRE(!ec, "cannot create ", dir.string());
                write_png(dir / frame_name, img);
                manifest.rows.push_back(
                    {method + "/" + vid + "/" + frame_name, vid, f, method});
            };

            emit(kRealLabel, pristine);
            for (const std::string& method : synthetic_methods()) {
                emit(method, apply_forgery(pristine, method, seed, v));
            }
        }
    }
    manifest.save(out_dir);
    return manifest;
}

}  // namespace osfd
