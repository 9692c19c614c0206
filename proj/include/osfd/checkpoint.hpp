#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "osfd/tensor.hpp"

namespace osfd {

/// Ordered name -> tensor map. Ordering makes hashing and serialization
/// deterministic.
using NamedTensors = std::map<std::string, Tensor>;

struct CheckpointMeta {
    int epoch = 0;
    std::string seed;         // decimal string; 64-bit seeds do not fit JSON numbers
    std::string config_hash;
    std::string stage;
};

/// Self-describing container: magic + JSON header (tensor names, shapes,
/// offsets, metadata) + raw little-endian float32 buffers.
void save_checkpoint(const std::filesystem::path& file, const NamedTensors& tensors,
                     const CheckpointMeta& meta);
NamedTensors load_checkpoint(const std::filesystem::path& file, CheckpointMeta* meta = nullptr);

/// Encoder weight snapshots captured during training, tagged by epoch.
struct CheckpointSet {
    std::vector<NamedTensors> snapshots;
    std::vector<int> epochs;

    std::size_t size() const { return snapshots.size(); }
};

/// Elementwise arithmetic mean of the snapshots (stochastic weight
/// averaging). All snapshots must agree on names and shapes.
NamedTensors swa_average(const CheckpointSet& set);

/// FNV-1a over shapes and raw float bytes; order-sensitive via the map order.
std::uint64_t named_tensors_hash(const NamedTensors& tensors);

}  // namespace osfd
