#include "osfd/manifest.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <set>

#include "osfd/datamodel.hpp"
#include "osfd/error.hpp"

namespace osfd {

namespace fs = std::filesystem;

std::vector<std::string> DatasetManifest::methods() const {
    std::set<std::string> uniq;
    for (const auto& r : rows) {
        if (r.method_label != kRealLabel) uniq.insert(r.method_label);
    }
    return {uniq.begin(), uniq.end()};
}

std::vector<std::string> DatasetManifest::video_ids() const {
    std::set<std::string> uniq;
    for (const auto& r : rows) uniq.insert(r.video_id);
    return {uniq.begin(), uniq.end()};
}

void DatasetManifest::validate_unique() const {
    std::set<std::tuple<std::string, int, std::string>> seen;
    for (const auto& r : rows) {
        auto key = std::make_tuple(r.video_id, r.frame_idx, r.method_label);
        OSFD_REQUIRE(seen.insert(key).second, "duplicate manifest row: ", r.method_label, "/",
                     r.video_id, "/", r.frame_idx);
    }
}

void DatasetManifest::save(const fs::path& dir) const {
    std::ofstream csv(dir / "manifest.csv");
    OSFD_REQUIRE(csv.good(), "cannot write manifest.csv under ", dir.string());
    csv << "path,video_id,frame_idx,method_label\n";
    for (const auto& r : rows) {
        csv << r.rel_path << "," << r.video_id << "," << r.frame_idx << "," << r.method_label
            << "\n";
    }
    OSFD_REQUIRE(csv.good(), "manifest.csv write failed");

    nlohmann::json side_car;
    side_car["dataset_seed"] = std::to_string(dataset_seed);
    side_car["side"] = side;
    side_car["rows"] = rows.size();
    std::ofstream js(dir / "manifest.json");
    OSFD_REQUIRE(js.good(), "cannot write manifest.json under ", dir.string());
    js << side_car.dump(2) << "\n";
}

DatasetManifest DatasetManifest::load(const fs::path& dir) {
    DatasetManifest m;
    m.root = dir;
    std::ifstream csv(dir / "manifest.csv");
    OSFD_REQUIRE(csv.good(), "cannot open ", (dir / "manifest.csv").string());
    std::string line;
    OSFD_REQUIRE(static_cast<bool>(std::getline(csv, line)), "manifest.csv is empty");
    OSFD_REQUIRE(line == "path,video_id,frame_idx,method_label",
                 "unexpected manifest.csv header: '", line, "'");
    while (std::getline(csv, line)) {
        if (line.empty()) continue;
        ManifestRow r;
        std::size_t a = line.find(',');
        std::size_t b = line.find(',', a + 1);
        std::size_t c = line.find(',', b + 1);
        OSFD_REQUIRE(a != std::string::npos && b != std::string::npos && c != std::string::npos,
                     "malformed manifest line: ", line);
        r.rel_path = line.substr(0, a);
        r.video_id = line.substr(a + 1, b - a - 1);
        r.frame_idx = std::stoi(line.substr(b + 1, c - b - 1));
        r.method_label = line.substr(c + 1);
        m.rows.push_back(std::move(r));
    }

    std::ifstream js(dir / "manifest.json");
    if (js.good()) {
        nlohmann::json side_car = nlohmann::json::parse(js, nullptr, false);
        if (!side_car.is_discarded()) {
            if (side_car.contains("dataset_seed")) {
                m.dataset_seed = std::stoull(side_car["dataset_seed"].get<std::string>());
            }
            m.side = side_car.value("side", 0);
        }
    }
    return m;
}

Image DatasetManifest::load_image(const ManifestRow& row) const {
    return read_png(root / row.rel_path);
}

DatasetManifest load_framedir(const fs::path& root,
                              const std::vector<std::string>& allowed_methods) {
    OSFD_REQUIRE(fs::exists(root) && fs::is_directory(root),
                 "frame directory does not exist: ", root.string());
    DatasetManifest m;
    m.root = root;

    std::vector<fs::path> method_dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (!entry.is_directory()) continue;
        method_dirs.push_back(entry.path());
    }
    std::sort(method_dirs.begin(), method_dirs.end());
    if (method_dirs.empty()) {
        std::cerr << "warning: " << root.string() << " contains no class directories; "
                  << "manifest is empty\n";
        return m;
    }

    int side = 0;
    for (const auto& mdir : method_dirs) {
        const std::string method = mdir.filename().string();
        if (method != kRealLabel) {
            OSFD_REQUIRE(std::count(allowed_methods.begin(), allowed_methods.end(), method) > 0,
                         "directory '", method, "' is not a declared method; declare it in the "
                         "config or remove it");
        }
        std::vector<fs::path> video_dirs;
        for (const auto& ventry : fs::directory_iterator(mdir)) {
            if (ventry.is_directory()) video_dirs.push_back(ventry.path());
        }
        std::sort(video_dirs.begin(), video_dirs.end());
        for (const auto& vdir : video_dirs) {
            const std::string video_id = vdir.filename().string();
            std::vector<fs::path> frames;
            for (const auto& fentry : fs::directory_iterator(vdir)) {
                if (fentry.is_regular_file() && fentry.path().extension() == ".png") {
                    frames.push_back(fentry.path());
                }
            }
            std::sort(frames.begin(), frames.end());
            for (const auto& fpath : frames) {
                int frame_idx = 0;
                try {
                    frame_idx = std::stoi(fpath.stem().string());
                } catch (const std::exception&) {
                    fail("frame file name is not an integer index: ", fpath.string());
                }
                // Validate shape by decoding; malformed files fail here with
                // the offending name.
                Image img;
                try {
                    img = read_png(fpath);
                } catch (const Error& e) {
                    fail("unreadable image ", fpath.string(), ": ", e.what());
                }
                OSFD_REQUIRE(img.height == img.width, "image is not square: ", fpath.string());
                if (side == 0) side = img.height;
                OSFD_REQUIRE(img.height == side, "inconsistent image side in ", fpath.string(),
                             ": ", img.height, " vs ", side);
                m.rows.push_back({fs::relative(fpath, root).generic_string(), video_id, frame_idx,
                                  method});
            }
        }
    }
    m.side = side;
    m.validate_unique();
    return m;
}

}  // namespace osfd
