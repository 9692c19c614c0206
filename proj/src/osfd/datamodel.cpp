#include "osfd/datamodel.hpp"

#include <algorithm>

#include "osfd/error.hpp"
#include "osfd/rng.hpp"

namespace osfd {

void Sample::validate(int expected_side) const {
    OSFD_REQUIRE(image.height > 0 && image.width > 0, "sample ", video_id, "/", frame_idx,
                 ": empty image");
    OSFD_REQUIRE(image.height == image.width, "sample ", video_id, "/", frame_idx,
                 ": image must be square, got ", image.height, "x", image.width);
    if (expected_side > 0) {
        OSFD_REQUIRE(image.height == expected_side, "sample ", video_id, "/", frame_idx,
                     ": expected side ", expected_side, ", got ", image.height);
    }
    OSFD_REQUIRE(frame_idx >= 0, "sample ", video_id, ": negative frame index");
    OSFD_REQUIRE(is_real == (method_label == kRealLabel),
                 "sample ", video_id, "/", frame_idx, ": is_real flag inconsistent with label '",
                 method_label, "'");
    for (float v : image.px) {
        OSFD_REQUIRE(v >= 0.0f && v <= 1.0f, "sample ", video_id, "/", frame_idx,
                     ": pixel value ", v, " outside [0,1]");
    }
}

std::string to_string(LabelScheme scheme) {
    return scheme == LabelScheme::kForgerySpecific ? "FORGERY_SPECIFIC" : "BINARY";
}

LabelScheme label_scheme_from_string(const std::string& s) {
    if (s == "FORGERY_SPECIFIC") return LabelScheme::kForgerySpecific;
    if (s == "BINARY") return LabelScheme::kBinary;
    fail("unknown label scheme '", s, "' (expected FORGERY_SPECIFIC or BINARY)");
}

LabelSpace LabelSpace::make(LabelScheme scheme, const std::vector<std::string>& known_methods) {
    LabelSpace space;
    space.scheme_ = scheme;
    space.classes_.push_back(kRealLabel);
    if (scheme == LabelScheme::kBinary) {
        space.classes_.push_back("FAKE");
    } else {
        std::vector<std::string> methods = known_methods;
        std::sort(methods.begin(), methods.end());
        for (const auto& m : methods) {
            OSFD_REQUIRE(m != kRealLabel, "known_methods must not contain REAL");
            OSFD_REQUIRE(std::count(space.classes_.begin(), space.classes_.end(), m) == 0,
                         "duplicate method '", m, "'");
            space.classes_.push_back(m);
        }
    }
    return space;
}

const std::string& LabelSpace::class_name(int label) const {
    OSFD_REQUIRE(label >= 0 && label < num_classes(), "label ", label, " out of range");
    return classes_[static_cast<std::size_t>(label)];
}

int LabelSpace::label_of(const Sample& s) const { return label_of(s.method_label, s.is_real); }

int LabelSpace::label_of(const std::string& method_label, bool is_real) const {
    if (is_real) return 0;
    if (scheme_ == LabelScheme::kBinary) return 1;
    auto it = std::find(classes_.begin(), classes_.end(), method_label);
    OSFD_REQUIRE(it != classes_.end(), "method '", method_label, "' is not a known class");
    return static_cast<int>(it - classes_.begin());
}

void SplitSpec::validate() const {
    auto overlap = [](const std::set<std::string>& a, const std::set<std::string>& b) {
        for (const auto& v : a) {
            if (b.count(v)) return true;
        }
        return false;
    };
    OSFD_REQUIRE(!overlap(train_videos, val_videos), "train/val video sets overlap");
    OSFD_REQUIRE(!overlap(train_videos, test_videos), "train/test video sets overlap");
    OSFD_REQUIRE(!overlap(val_videos, test_videos), "val/test video sets overlap");
}

void MultiViewBatch::validate() const {
    const std::int64_t v = views.empty() ? 0 : views.dim(0);
    OSFD_REQUIRE(v > 0 && v % 2 == 0, "multi-view batch must have a positive even view count");
    OSFD_REQUIRE(static_cast<std::int64_t>(labels.size()) == v &&
                     static_cast<std::int64_t>(is_real.size()) == v &&
                     static_cast<std::int64_t>(origin_index.size()) == v,
                 "multi-view batch metadata length mismatch");
    OSFD_REQUIRE(n_samples * 2 == v, "view count must be exactly 2x sample count");
    for (int k = 0; k < n_samples; ++k) {
        OSFD_REQUIRE(labels[2 * k] == labels[2 * k + 1] && is_real[2 * k] == is_real[2 * k + 1] &&
                         origin_index[2 * k] == k + 1 && origin_index[2 * k + 1] == k + 1,
                     "views ", 2 * k, ",", 2 * k + 1, " do not share origin/labels");
    }
}

MultiViewBatch build_multiview_batch(const std::vector<Sample>& samples,
                                     const AugmentPolicy& policy,
                                     const LabelSpace& space,
                                     std::uint64_t seed) {
    OSFD_REQUIRE(!samples.empty(), "build_multiview_batch: empty sample list");
    const int h = samples.front().image.height;
    const int w = samples.front().image.width;
    for (const Sample& s : samples) {
        OSFD_REQUIRE(s.image.height == h && s.image.width == w,
                     "build_multiview_batch: mixed image shapes (", s.video_id, "/", s.frame_idx,
                     " is ", s.image.height, "x", s.image.width, ", expected ", h, "x", w, ")");
    }

    const int n = static_cast<int>(samples.size());
    MultiViewBatch batch;
    batch.n_samples = n;
    batch.views = Tensor({2 * n, h, w, 3});
    batch.labels.resize(static_cast<std::size_t>(2 * n));
    batch.is_real.resize(static_cast<std::size_t>(2 * n));
    batch.origin_index.resize(static_cast<std::size_t>(2 * n));

    const std::int64_t plane = static_cast<std::int64_t>(h) * w * 3;
    for (int k = 0; k < n; ++k) {
        const Sample& s = samples[static_cast<std::size_t>(k)];
        const int label = space.label_of(s);
        for (int view = 0; view < 2; ++view) {
            const int row = 2 * k + view;
            Image aug = apply_augment(policy, s.image,
                                      derive_seed(seed, "view", static_cast<std::uint64_t>(k),
                                                  static_cast<std::uint64_t>(view)));
            std::copy(aug.px.begin(), aug.px.end(), batch.views.data() + row * plane);
            batch.labels[static_cast<std::size_t>(row)] = label;
            batch.is_real[static_cast<std::size_t>(row)] = s.is_real ? 1 : 0;
            batch.origin_index[static_cast<std::size_t>(row)] = k + 1;
        }
    }
    batch.validate();
    return batch;
}

std::vector<LeaveOneOutCombo> leave_one_out_combinations(const std::vector<std::string>& methods) {
    OSFD_REQUIRE(methods.size() >= 2, "leave-one-out needs at least 2 methods, got ",
                 methods.size());
    std::vector<std::string> sorted = methods;
    std::sort(sorted.begin(), sorted.end());
    OSFD_REQUIRE(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(),
                 "duplicate method names");
    OSFD_REQUIRE(std::count(sorted.begin(), sorted.end(), kRealLabel) == 0,
                 "REAL is not a forgery method; it is always known");

    std::vector<LeaveOneOutCombo> combos;
    combos.reserve(sorted.size());
    for (const std::string& unknown : sorted) {
        LeaveOneOutCombo combo;
        combo.unknown_method = unknown;
        for (const std::string& m : sorted) {
            if (m != unknown) combo.known_methods.push_back(m);
        }
        combos.push_back(std::move(combo));
    }
    return combos;
}

}  // namespace osfd
