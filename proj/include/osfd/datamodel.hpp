#pragma once

#include <set>
#include <string>
#include <vector>

#include "osfd/augment.hpp"
#include "osfd/image.hpp"
#include "osfd/tensor.hpp"

namespace osfd {

/// Class name of unmanipulated samples. REAL is a known class in every
/// protocol combination; only forgery methods rotate into the unknown slot.
inline constexpr const char* kRealLabel = "REAL";

/// Sentinel class name emitted by the open-set classifier for rejections.
inline constexpr const char* kUnknownLabel = "UNKNOWN";

/// Merged forgery class used by the real-vs-deepfake accuracy variant.
inline constexpr const char* kDeepfakeLabel = "DEEPFAKE";

/// One face frame. Samples carry both label granularities so switching the
/// labeling scheme is a relabeling, never a re-ingestion.
struct Sample {
    Image image;               // H x W x 3, values in [0,1]
    std::string video_id;
    int frame_idx = 0;
    std::string method_label;  // REAL or a forgery method name (M1..M4, DF, ...)
    bool is_real = false;

    void validate(int expected_side = 0) const;
};

enum class LabelScheme {
    kForgerySpecific,  // classes = {REAL, M1..Mk}
    kBinary,           // classes = {REAL, FAKE}
};

std::string to_string(LabelScheme scheme);
LabelScheme label_scheme_from_string(const std::string& s);

/// Resolved label alphabet for a scheme over a set of known forgery methods.
/// REAL is always class 0.
class LabelSpace {
public:
    static LabelSpace make(LabelScheme scheme, const std::vector<std::string>& known_methods);

    LabelScheme scheme() const { return scheme_; }
    int num_classes() const { return static_cast<int>(classes_.size()); }
    const std::vector<std::string>& classes() const { return classes_; }
    const std::string& class_name(int label) const;

    /// Label index for a sample; throws if the sample's method is not known
    /// under this space.
    int label_of(const Sample& s) const;
    int label_of(const std::string& method_label, bool is_real) const;

private:
    LabelScheme scheme_ = LabelScheme::kForgerySpecific;
    std::vector<std::string> classes_;
};

/// Disjoint video-level split assignment. A pristine video and all of its
/// manipulated derivatives share one set by construction (membership is by
/// video_id, which derivatives inherit).
struct SplitSpec {
    std::set<std::string> train_videos;
    std::set<std::string> val_videos;
    std::set<std::string> test_videos;

    void validate() const;  // throws on any pairwise overlap
};

/// 2N-view augmented batch: views 2k and 2k+1 (0-based) are two augmentations
/// of source sample k and share its labels.
struct MultiViewBatch {
    Tensor views;                   // [2N, H, W, 3]
    std::vector<int> labels;        // length 2N
    std::vector<char> is_real;      // length 2N
    std::vector<int> origin_index;  // length 2N, 1-based source sample index
    int n_samples = 0;

    void validate() const;
};

/// Builds the two-view batch consumed by the contrastive losses.
/// Pure function of (samples, policy, space, seed).
MultiViewBatch build_multiview_batch(const std::vector<Sample>& samples,
                                     const AugmentPolicy& policy,
                                     const LabelSpace& space,
                                     std::uint64_t seed);

struct LeaveOneOutCombo {
    std::vector<std::string> known_methods;  // REAL excluded; it is always known
    std::string unknown_method;
};

/// One combination per method: that method becomes the unknown class and the
/// rest stay known. Requires at least two methods.
std::vector<LeaveOneOutCombo> leave_one_out_combinations(const std::vector<std::string>& methods);

}  // namespace osfd
