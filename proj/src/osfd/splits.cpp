#include "osfd/splits.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "osfd/error.hpp"
#include "osfd/rng.hpp"

namespace osfd {

namespace {

std::uint64_t str_hash(const std::string& s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

}  // namespace

ProtocolSplits make_protocol_splits(const DatasetManifest& manifest,
                                    const std::array<double, 3>& ratios,
                                    int frames_per_video_sampled,
                                    std::uint64_t seed) {
    const double ratio_sum = ratios[0] + ratios[1] + ratios[2];
    OSFD_REQUIRE(std::abs(ratio_sum - 1.0) < 1e-9, "split ratios must sum to 1, got ", ratio_sum);
    OSFD_REQUIRE(frames_per_video_sampled >= 1, "frames_per_video_sampled must be >= 1");
    OSFD_REQUIRE(!manifest.rows.empty(), "empty manifest");

    std::vector<std::string> videos = manifest.video_ids();
    const int v = static_cast<int>(videos.size());

    // Largest-remainder allocation so counts are exact for round ratios.
    std::array<int, 3> counts{};
    std::array<double, 3> frac{};
    int assigned = 0;
    for (int i = 0; i < 3; ++i) {
        const double exact = ratios[static_cast<std::size_t>(i)] * v;
        counts[static_cast<std::size_t>(i)] = static_cast<int>(std::floor(exact + 1e-9));
        frac[static_cast<std::size_t>(i)] = exact - counts[static_cast<std::size_t>(i)];
        assigned += counts[static_cast<std::size_t>(i)];
    }
    while (assigned < v) {
        int best = 0;
        for (int i = 1; i < 3; ++i) {
            if (frac[static_cast<std::size_t>(i)] > frac[static_cast<std::size_t>(best)] + 1e-12) best = i;
        }
        counts[static_cast<std::size_t>(best)] += 1;
        frac[static_cast<std::size_t>(best)] = -1.0;
        ++assigned;
    }
    OSFD_REQUIRE(counts[0] >= 1 && counts[1] >= 1 && counts[2] >= 1,
                 "too few videos (", v, ") to populate train/val/test");

    Rng rng(derive_seed(seed, "video_partition"));
    rng.shuffle(videos);

    ProtocolSplits out;
    for (int i = 0; i < v; ++i) {
        const std::string& vid = videos[static_cast<std::size_t>(i)];
        if (i < counts[0]) {
            out.spec.train_videos.insert(vid);
        } else if (i < counts[0] + counts[1]) {
            out.spec.val_videos.insert(vid);
        } else {
            out.spec.test_videos.insert(vid);
        }
    }
    out.spec.validate();

    // Group rows by (method, video).
    std::map<std::pair<std::string, std::string>, std::vector<const ManifestRow*>> groups;
    for (const auto& row : manifest.rows) {
        groups[{row.method_label, row.video_id}].push_back(&row);
    }

    auto emit = [&](const std::set<std::string>& members, std::vector<Sample>& dst) {
        for (auto& [key, rows] : groups) {
            const auto& [method, video] = key;
            if (!members.count(video)) continue;
            std::vector<const ManifestRow*> ordered = rows;
            std::sort(ordered.begin(), ordered.end(),
                      [](const ManifestRow* a, const ManifestRow* b) {
                          return a->frame_idx < b->frame_idx;
                      });
            const int avail = static_cast<int>(ordered.size());
            const int take = std::min(frames_per_video_sampled, avail);
            Rng frng(derive_seed(seed, "frame_sample", str_hash(video), str_hash(method)));
            std::vector<std::int64_t> picks = frng.sample_without_replacement(avail, take);
            std::sort(picks.begin(), picks.end());
            for (std::int64_t pick : picks) {
                const ManifestRow* row = ordered[static_cast<std::size_t>(pick)];
                Sample s;
                s.image = manifest.load_image(*row);
                s.video_id = row->video_id;
                s.frame_idx = row->frame_idx;
                s.method_label = row->method_label;
                s.is_real = (row->method_label == kRealLabel);
                s.validate(manifest.side);
                dst.push_back(std::move(s));
            }
        }
    };
    emit(out.spec.train_videos, out.train);
    emit(out.spec.val_videos, out.val);
    emit(out.spec.test_videos, out.test);
    return out;
}

}  // namespace osfd
