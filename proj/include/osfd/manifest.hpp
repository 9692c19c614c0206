#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "osfd/image.hpp"

namespace osfd {

struct ManifestRow {
    std::string rel_path;      // relative to the dataset root
    std::string video_id;
    int frame_idx = 0;
    std::string method_label;  // REAL or a forgery method
};

/// On-disk dataset index. Layout: root/<method_label>/<video_id>/<frame_idx>.png
/// with a manifest.csv (path,video_id,frame_idx,method_label) and a
/// manifest.json sidecar carrying the dataset seed.
struct DatasetManifest {
    std::filesystem::path root;
    std::vector<ManifestRow> rows;
    std::uint64_t dataset_seed = 0;
    int side = 0;  // 0 when unknown (e.g. ingested directories without a sidecar)

    /// Sorted unique forgery method names (REAL excluded).
    std::vector<std::string> methods() const;
    /// Sorted unique video ids.
    std::vector<std::string> video_ids() const;

    /// (video_id, frame_idx, method_label) must be unique; files must exist.
    void validate_unique() const;

    void save(const std::filesystem::path& dir) const;
    static DatasetManifest load(const std::filesystem::path& dir);

    Image load_image(const ManifestRow& row) const;
};

/// Ingests a pre-cropped frame directory tree. Directory names directly
/// under root must be REAL or belong to allowed_methods; anything else is
/// rejected so typos do not silently become classes. Empty root yields an
/// empty manifest with a warning on stderr.
DatasetManifest load_framedir(const std::filesystem::path& root,
                              const std::vector<std::string>& allowed_methods);

}  // namespace osfd
