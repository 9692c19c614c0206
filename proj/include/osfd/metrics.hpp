#pragma once

#include <map>
#include <string>
#include <vector>

namespace osfd {

/// One-vs-rest tallies per class (UNKNOWN participates as a class of its
/// own). For every class, tp+tn+fp+fn equals the sample count.
struct ConfusionTally {
    struct Counts {
        long tp = 0, tn = 0, fp = 0, fn = 0;
    };
    std::map<std::string, Counts> per_class;

    static ConfusionTally build(const std::vector<std::string>& y_true,
                                const std::vector<std::string>& y_pred,
                                const std::vector<std::string>& classes);
};

/// Open-set accuracy: sum_i (TP_i + TN_i) / sum_i (TP_i + TN_i + FP_i + FN_i)
/// over the one-vs-rest tallies of the given classes. When classes is empty
/// the union of observed labels is used.
double tosc(const std::vector<std::string>& y_true, const std::vector<std::string>& y_pred,
            const std::vector<std::string>& classes = {});

/// Real-vs-deepfake variant: every non-REAL label (known forgeries and
/// UNKNOWN alike) collapses to one DEEPFAKE class on both sides before
/// applying the same tally.
double tosc_deepfake_merged(const std::vector<std::string>& y_true,
                            const std::vector<std::string>& y_pred);

/// Area under the ROC curve via the rank statistic (ties count 1/2).
/// Requires at least one positive and one negative.
double auroc(const std::vector<double>& scores, const std::vector<char>& positive);

/// Familiarity score for unknown detection: the maximum softmax probability.
/// Higher means more confidently known.
double unknown_detection_score(const std::vector<double>& probs);

}  // namespace osfd
