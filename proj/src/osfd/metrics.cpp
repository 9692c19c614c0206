#include "osfd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "osfd/datamodel.hpp"
#include "osfd/error.hpp"

namespace osfd {

ConfusionTally ConfusionTally::build(const std::vector<std::string>& y_true,
                                     const std::vector<std::string>& y_pred,
                                     const std::vector<std::string>& classes) {
    OSFD_REQUIRE(y_true.size() == y_pred.size(), "y_true/y_pred length mismatch");
    OSFD_REQUIRE(!y_true.empty(), "empty label sequence");
    ConfusionTally tally;
    for (const auto& c : classes) tally.per_class[c];
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        for (auto& [cls, counts] : tally.per_class) {
            const bool is_true = (y_true[i] == cls);
            const bool is_pred = (y_pred[i] == cls);
            if (is_true && is_pred) ++counts.tp;
            else if (is_true) ++counts.fn;
            else if (is_pred) ++counts.fp;
            else ++counts.tn;
        }
    }
    return tally;
}

double tosc(const std::vector<std::string>& y_true, const std::vector<std::string>& y_pred,
            const std::vector<std::string>& classes) {
    OSFD_REQUIRE(!y_true.empty(), "tosc: empty input");
    OSFD_REQUIRE(y_true.size() == y_pred.size(), "tosc: length mismatch");
    std::vector<std::string> cls = classes;
    if (cls.empty()) {
        std::set<std::string> uniq(y_true.begin(), y_true.end());
        uniq.insert(y_pred.begin(), y_pred.end());
        cls.assign(uniq.begin(), uniq.end());
    }
    const ConfusionTally tally = ConfusionTally::build(y_true, y_pred, cls);
    long num = 0, den = 0;
    for (const auto& [name, c] : tally.per_class) {
        num += c.tp + c.tn;
        den += c.tp + c.tn + c.fp + c.fn;
    }
    OSFD_REQUIRE(den > 0, "tosc: no tallies");
    return static_cast<double>(num) / static_cast<double>(den);
}

double tosc_deepfake_merged(const std::vector<std::string>& y_true,
                            const std::vector<std::string>& y_pred) {
    auto merge = [](const std::vector<std::string>& labels) {
        std::vector<std::string> out;
        out.reserve(labels.size());
        for (const auto& l : labels) out.push_back(l == kRealLabel ? kRealLabel : kDeepfakeLabel);
        return out;
    };
    return tosc(merge(y_true), merge(y_pred), {kRealLabel, kDeepfakeLabel});
}

double auroc(const std::vector<double>& scores, const std::vector<char>& positive) {
    OSFD_REQUIRE(scores.size() == positive.size(), "auroc: length mismatch");
    const std::size_t n = scores.size();
    std::size_t n_pos = 0;
    for (char p : positive) n_pos += (p != 0);
    const std::size_t n_neg = n - n_pos;
    OSFD_REQUIRE(n_pos > 0 && n_neg > 0,
                 "auroc undefined: needs both positive and negative samples (got ", n_pos,
                 " positives of ", n, ")");

    // Rank-sum with average ranks over ties.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    std::vector<double> rank(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg_rank;
        i = j + 1;
    }
    double rank_sum_pos = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        if (positive[k]) rank_sum_pos += rank[k];
    }
    const double u = rank_sum_pos - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double unknown_detection_score(const std::vector<double>& probs) {
    OSFD_REQUIRE(!probs.empty(), "unknown_detection_score: empty probabilities");
    return *std::max_element(probs.begin(), probs.end());
}

}  // namespace osfd
