#include "osfd/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "osfd/error.hpp"

namespace osfd {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::string join_csv(const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += v[i];
    }
    return out;
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    fail("invalid boolean '", v, "'");
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
}

}  // namespace

void RunConfig::validate() const {
    OSFD_REQUIRE(side >= 16 && side % 8 == 0, "side must be a multiple of 8 and >= 16");
    const double rs = split_ratios[0] + split_ratios[1] + split_ratios[2];
    OSFD_REQUIRE(std::abs(rs - 1.0) < 1e-9, "split ratios must sum to 1");
    OSFD_REQUIRE(frames_per_video >= 1, "frames_per_video must be >= 1");
    loss.validate();
    augment.validate();
    OSFD_REQUIRE(batch_size >= 2, "batch_size must be >= 2 (the view batch must be even and "
                                  "contain pairs)");
    OSFD_REQUIRE(stage1_epochs >= 1 && stage2_epochs >= 1, "epoch counts must be >= 1");
    OSFD_REQUIRE(swa_window > 0.0 && swa_window <= 1.0, "swa_window must be in (0,1]");
    OSFD_REQUIRE(lr > 0.0 && stage2_lr > 0.0, "learning rates must be positive");
    OSFD_REQUIRE(momentum >= 0.0 && momentum < 1.0, "momentum must be in [0,1)");
    OSFD_REQUIRE(weight_decay >= 0.0, "weight_decay must be >= 0");
    OSFD_REQUIRE(lambda_percentile >= 0.0 && lambda_percentile <= 100.0,
                 "lambda must be in [0,100]");
    OSFD_REQUIRE(encoder == "small_conv" || encoder == "densenet",
                 "encoder must be small_conv or densenet");
    OSFD_REQUIRE(methods.size() >= 2, "need at least 2 forgery methods");
}

std::string RunConfig::to_canonical_string() const {
    std::map<std::string, std::string> kv;
    kv["dataset.root"] = dataset_root;
    kv["dataset.root_b"] = dataset_root_b;
    kv["dataset.methods"] = join_csv(methods);
    kv["data.side"] = std::to_string(side);
    kv["split.train"] = fmt(split_ratios[0]);
    kv["split.val"] = fmt(split_ratios[1]);
    kv["split.test"] = fmt(split_ratios[2]);
    kv["split.frames_per_video"] = std::to_string(frames_per_video);
    kv["stage1.scheme"] = to_string(scheme_stage1);
    kv["stage2.scheme"] = to_string(scheme_stage2);
    kv["loss.variant"] = to_string(loss.variant);
    kv["loss.temperature"] = fmt(loss.temperature);
    kv["loss.alpha"] = fmt(loss.alpha);
    kv["model.encoder"] = encoder;
    kv["model.projection_bias"] = projection_bias ? "true" : "false";
    kv["optim.lr"] = fmt(lr);
    kv["optim.stage2_lr"] = fmt(stage2_lr);
    kv["optim.weight_decay"] = fmt(weight_decay);
    kv["optim.momentum"] = fmt(momentum);
    kv["train.batch_size"] = std::to_string(batch_size);
    kv["train.stage1_epochs"] = std::to_string(stage1_epochs);
    kv["train.stage2_epochs"] = std::to_string(stage2_epochs);
    kv["train.swa_window"] = fmt(swa_window);
    kv["openset.lambda"] = fmt(lambda_percentile);
    kv["augment.crop_lo"] = fmt(augment.crop_lo);
    kv["augment.crop_hi"] = fmt(augment.crop_hi);
    kv["augment.flip_prob"] = fmt(augment.flip_prob);
    kv["augment.jitter"] = fmt(augment.color_jitter);
    kv["augment.grayscale_prob"] = fmt(augment.grayscale_prob);
    kv["augment.stage2_flip"] = stage2_flip_augment ? "true" : "false";
    kv["run.seed"] = std::to_string(seed);
    kv["run.out_dir"] = out_dir;

    std::string out;
    for (const auto& [k, v] : kv) {
        out += k;
        out += " = ";
        out += v;
        out += "\n";
    }
    return out;
}

std::string RunConfig::config_hash() const {
    const std::string canon = to_canonical_string();
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : canon) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void RunConfig::save(const std::filesystem::path& file) const {
    std::ofstream os(file);
    OSFD_REQUIRE(os.good(), "cannot write config to ", file.string());
    os << to_canonical_string();
}

RunConfig RunConfig::load(const std::filesystem::path& file) {
    std::ifstream is(file);
    OSFD_REQUIRE(is.good(), "cannot open config file ", file.string());
    RunConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        OSFD_REQUIRE(eq != std::string::npos, file.string(), ":", line_no,
                     ": expected 'key = value'");
        cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    try {
        if (key == "dataset.root") dataset_root = value;
        else if (key == "dataset.root_b") dataset_root_b = value;
        else if (key == "dataset.methods") methods = split_csv(value);
        else if (key == "data.side") side = std::stoi(value);
        else if (key == "split.train") split_ratios[0] = std::stod(value);
        else if (key == "split.val") split_ratios[1] = std::stod(value);
        else if (key == "split.test") split_ratios[2] = std::stod(value);
        else if (key == "split.frames_per_video") frames_per_video = std::stoi(value);
        else if (key == "stage1.scheme") scheme_stage1 = label_scheme_from_string(value);
        else if (key == "stage2.scheme") scheme_stage2 = label_scheme_from_string(value);
        else if (key == "loss.variant") loss.variant = loss_variant_from_string(value);
        else if (key == "loss.temperature") loss.temperature = std::stod(value);
        else if (key == "loss.alpha") loss.alpha = std::stod(value);
        else if (key == "model.encoder") encoder = value;
        else if (key == "model.projection_bias") projection_bias = parse_bool(value);
        else if (key == "optim.lr") lr = std::stod(value);
        else if (key == "optim.stage2_lr") stage2_lr = std::stod(value);
        else if (key == "optim.weight_decay") weight_decay = std::stod(value);
        else if (key == "optim.momentum") momentum = std::stod(value);
        else if (key == "train.batch_size") batch_size = std::stoi(value);
        else if (key == "train.stage1_epochs") stage1_epochs = std::stoi(value);
        else if (key == "train.stage2_epochs") stage2_epochs = std::stoi(value);
        else if (key == "train.swa_window") swa_window = std::stod(value);
        else if (key == "openset.lambda") lambda_percentile = std::stod(value);
        else if (key == "augment.crop_lo") augment.crop_lo = std::stof(value);
        else if (key == "augment.crop_hi") augment.crop_hi = std::stof(value);
        else if (key == "augment.flip_prob") augment.flip_prob = std::stof(value);
        else if (key == "augment.jitter") augment.color_jitter = std::stof(value);
        else if (key == "augment.grayscale_prob") augment.grayscale_prob = std::stof(value);
        else if (key == "augment.stage2_flip") stage2_flip_augment = parse_bool(value);
        else if (key == "run.seed") seed = std::stoull(value);
        else if (key == "run.out_dir") out_dir = value;
        else fail("unknown config key '", key, "'");
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        fail("bad value for ", key, ": '", value, "' (", e.what(), ")");
    }
}

}  // namespace osfd
