#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "osfd/image.hpp"
#include "osfd/manifest.hpp"

namespace osfd {

/// The four parametric manipulation operators of the synthetic benchmark.
/// M1/M3 alter a global signal inside the face region (watermark texture,
/// color transfer); M2/M4 alter a local region (patch swap, boundary
/// blending artifact), so family-wise experiments have two of each kind.
inline const std::vector<std::string>& synthetic_methods() {
    static const std::vector<std::string> methods = {"M1", "M2", "M3", "M4"};
    return methods;
}

/// Renders one pristine face-like frame (smooth background, elliptical face,
/// eye/mouth blobs; geometry and palette vary per video, small jitter per
/// frame). Deterministic in (dataset_seed, video_index, frame_idx).
Image render_pristine_frame(std::uint64_t dataset_seed, int video_index, int frame_idx, int side);

/// Applies one manipulation operator to a pristine frame. Deterministic in
/// (dataset_seed, video_index, method); output stays in [0,1] and differs
/// from the input on at least 1% of pixels.
Image apply_forgery(const Image& pristine, const std::string& method,
                    std::uint64_t dataset_seed, int video_index);

/// Writes the full benchmark (n_videos pristine "videos" of frames_per_video
/// frames each, plus the four manipulated copies of every frame) under
/// out_dir and returns the manifest, which is also persisted there.
DatasetManifest generate_synthetic_benchmark(std::uint64_t seed, int n_videos,
                                             int frames_per_video,
                                             const std::filesystem::path& out_dir,
                                             int side = 64);

}  // namespace osfd
