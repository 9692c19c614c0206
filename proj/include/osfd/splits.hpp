#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "osfd/datamodel.hpp"
#include "osfd/manifest.hpp"

namespace osfd {

struct ProtocolSplits {
    SplitSpec spec;
    std::vector<Sample> train;
    std::vector<Sample> val;
    std::vector<Sample> test;
};

/// Partitions videos by ratio (pristine and derived frames travel together
/// because membership is by video id), then samples frames_per_video frames
/// uniformly without replacement per (video, class). Deterministic per seed.
ProtocolSplits make_protocol_splits(const DatasetManifest& manifest,
                                    const std::array<double, 3>& ratios,
                                    int frames_per_video_sampled,
                                    std::uint64_t seed);

}  // namespace osfd
