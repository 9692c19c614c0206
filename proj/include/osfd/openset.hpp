#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "osfd/datamodel.hpp"
#include "osfd/model.hpp"

namespace osfd {

/// Numerically stable softmax (max-subtraction); sums to 1.
std::vector<double> softmax_probs(const std::vector<double>& logits);

/// Softmax rows for a logit batch.
std::vector<std::vector<double>> softmax_rows(const Tensor& logits);

/// Index of the row maximum; ties break toward the lowest class index.
int argmax_class(const std::vector<double>& probs);

/// Per-class rejection thresholds from the lambda-th percentile of correct
/// training confidences.
struct ThresholdTable {
    std::vector<double> epsilon;           // per class, in [0,1]
    double lambda_percentile = 0.0;
    std::vector<int> support_counts;       // |T_i| per class
    std::vector<std::string> class_names;  // parallel to epsilon

    int num_classes() const { return static_cast<int>(epsilon.size()); }
    bool has_starved_class() const;  // any class with empty T_i

    void save(const std::filesystem::path& file) const;
    static ThresholdTable load(const std::filesystem::path& file);
};

struct OpenSetPrediction {
    int predicted_class = -1;  // -1 encodes UNKNOWN
    std::vector<double> softmax;
    double max_score = 0.0;

    bool is_unknown() const { return predicted_class < 0; }
};

/// Lower nearest-rank percentile of a sample (no interpolation); lambda 0
/// returns the minimum. values need not be sorted.
double percentile_lower_nearest_rank(std::vector<double> values, double lambda);

/// Builds T_i from samples whose predicted class equals their true class and
/// sets epsilon_i to the lambda-th percentile of T_i. A class with no correct
/// predictions gets epsilon 1.0 (rejects everything below a perfect score)
/// and a warning on stderr.
ThresholdTable estimate_thresholds(const std::vector<std::vector<double>>& probs,
                                   const std::vector<int>& true_labels,
                                   const std::vector<std::string>& class_names,
                                   double lambda);

/// Model-bound wrapper: computes training softmax scores and delegates.
ThresholdTable estimate_thresholds(ModelStack& model, const std::vector<Sample>& train_samples,
                                   const LabelSpace& space, double lambda, int batch_size = 128);

/// A sample is known iff some class's probability meets that class's
/// threshold; the assigned class is then the softmax argmax.
OpenSetPrediction classify_open_set(const std::vector<double>& probs,
                                    const ThresholdTable& thresholds);

OpenSetPrediction classify_open_set(ModelStack& model, const Image& image,
                                    const ThresholdTable& thresholds);

/// Softmax rows for a sample list (eval mode, no augmentation).
std::vector<std::vector<double>> model_probs(ModelStack& model,
                                             const std::vector<Sample>& samples,
                                             int batch_size = 128);

}  // namespace osfd
