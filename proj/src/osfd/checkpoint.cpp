#include "osfd/checkpoint.hpp"

#include <json.hpp>

#include <cstring>
#include <fstream>

#include "osfd/error.hpp"

namespace osfd {

namespace {
constexpr char kMagic[8] = {'O', 'S', 'F', 'D', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void save_checkpoint(const std::filesystem::path& file, const NamedTensors& tensors,
                     const CheckpointMeta& meta) {
    nlohmann::json header;
    header["epoch"] = meta.epoch;
    header["seed"] = meta.seed;
    header["config_hash"] = meta.config_hash;
    header["stage"] = meta.stage;
    header["dtype"] = "float32_le";

    nlohmann::json dir = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& [name, t] : tensors) {
        nlohmann::json entry;
        entry["name"] = name;
        entry["shape"] = t.shape();
        entry["offset"] = offset;
        entry["nbytes"] = static_cast<std::uint64_t>(t.numel()) * sizeof(float);
        dir.push_back(entry);
        offset += static_cast<std::uint64_t>(t.numel()) * sizeof(float);
    }
    header["tensors"] = dir;
    const std::string header_str = header.dump();

    std::ofstream os(file, std::ios::binary);
    OSFD_REQUIRE(os.good(), "cannot open checkpoint for writing: ", file.string());
    os.write(kMagic, sizeof(kMagic));
    std::uint32_t version = kVersion;
    os.write(reinterpret_cast<const char*>(&version), sizeof(version));
    std::uint64_t hlen = header_str.size();
    os.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    os.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    for (const auto& [name, t] : tensors) {
        os.write(reinterpret_cast<const char*>(t.data()),
                 static_cast<std::streamsize>(t.numel() * sizeof(float)));
    }
    OSFD_REQUIRE(os.good(), "checkpoint write failed: ", file.string());
}

NamedTensors load_checkpoint(const std::filesystem::path& file, CheckpointMeta* meta) {
    std::ifstream is(file, std::ios::binary);
    OSFD_REQUIRE(is.good(), "cannot open checkpoint: ", file.string());
    char magic[8];
    is.read(magic, sizeof(magic));
    OSFD_REQUIRE(is.good() && std::memcmp(magic, kMagic, sizeof(kMagic)) == 0,
                 "not a checkpoint file: ", file.string());
    std::uint32_t version = 0;
    is.read(reinterpret_cast<char*>(&version), sizeof(version));
    OSFD_REQUIRE(version == kVersion, "unsupported checkpoint version ", version);
    std::uint64_t hlen = 0;
    is.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    OSFD_REQUIRE(is.good() && hlen > 0 && hlen < (1ULL << 30), "corrupt checkpoint header");
    std::string header_str(hlen, '\0');
    is.read(header_str.data(), static_cast<std::streamsize>(hlen));
    OSFD_REQUIRE(is.good(), "corrupt checkpoint header: ", file.string());

    nlohmann::json header = nlohmann::json::parse(header_str, nullptr, false);
    OSFD_REQUIRE(!header.is_discarded(), "checkpoint header is not valid JSON: ", file.string());
    if (meta) {
        meta->epoch = header.value("epoch", 0);
        meta->seed = header.value("seed", "");
        meta->config_hash = header.value("config_hash", "");
        meta->stage = header.value("stage", "");
    }

    NamedTensors out;
    for (const auto& entry : header.at("tensors")) {
        const std::string name = entry.at("name").get<std::string>();
        std::vector<std::int64_t> shape = entry.at("shape").get<std::vector<std::int64_t>>();
        Tensor t(shape);
        is.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(t.numel() * sizeof(float)));
        OSFD_REQUIRE(is.good(), "checkpoint payload truncated at tensor '", name, "'");
        out.emplace(name, std::move(t));
    }
    return out;
}

NamedTensors swa_average(const CheckpointSet& set) {
    OSFD_REQUIRE(!set.snapshots.empty(), "swa_average: no snapshots");
    const NamedTensors& first = set.snapshots.front();
    NamedTensors acc;
    for (const auto& [name, t] : first) {
        acc.emplace(name, Tensor(t.shape()));
    }
    for (const NamedTensors& snap : set.snapshots) {
        OSFD_REQUIRE(snap.size() == first.size(), "swa_average: snapshot parameter sets differ");
        for (const auto& [name, t] : snap) {
            auto it = acc.find(name);
            OSFD_REQUIRE(it != acc.end(), "swa_average: unexpected parameter '", name, "'");
            OSFD_REQUIRE(it->second.same_shape(t), "swa_average: shape mismatch for '", name,
                         "': ", it->second.shape_str(), " vs ", t.shape_str());
            for (std::int64_t i = 0; i < t.numel(); ++i) it->second[i] += t[i];
        }
    }
    const float inv = 1.0f / static_cast<float>(set.snapshots.size());
    for (auto& [name, t] : acc) {
        for (std::int64_t i = 0; i < t.numel(); ++i) t[i] *= inv;
    }
    return acc;
}

std::uint64_t named_tensors_hash(const NamedTensors& tensors) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    auto mix = [&h](const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 0x100000001B3ULL;
        }
    };
    for (const auto& [name, t] : tensors) {
        mix(name.data(), name.size());
        for (std::int64_t d : t.shape()) mix(&d, sizeof(d));
        mix(t.data(), static_cast<std::size_t>(t.numel()) * sizeof(float));
    }
    return h;
}

}  // namespace osfd
