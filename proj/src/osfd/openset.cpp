#include "osfd/openset.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>

#include "osfd/error.hpp"

namespace osfd {

std::vector<double> softmax_probs(const std::vector<double>& logits) {
    OSFD_REQUIRE(!logits.empty(), "softmax_probs: empty logits");
    double mx = logits[0];
    for (double v : logits) {
        OSFD_REQUIRE(std::isfinite(v), "softmax_probs: non-finite logit");
        mx = std::max(mx, v);
    }
    std::vector<double> out(logits.size());
    double denom = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        denom += out[i];
    }
    for (double& v : out) v /= denom;
    return out;
}

std::vector<std::vector<double>> softmax_rows(const Tensor& logits) {
    OSFD_REQUIRE(logits.ndim() == 2, "softmax_rows expects [N,K]");
    const std::int64_t n = logits.dim(0), k = logits.dim(1);
    std::vector<std::vector<double>> out(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        std::vector<double> row(static_cast<std::size_t>(k));
        for (std::int64_t j = 0; j < k; ++j) row[static_cast<std::size_t>(j)] = logits[i * k + j];
        out[static_cast<std::size_t>(i)] = softmax_probs(row);
    }
    return out;
}

int argmax_class(const std::vector<double>& probs) {
    OSFD_REQUIRE(!probs.empty(), "argmax_class: empty probabilities");
    int best = 0;
    for (int i = 1; i < static_cast<int>(probs.size()); ++i) {
        if (probs[static_cast<std::size_t>(i)] > probs[static_cast<std::size_t>(best)]) best = i;
    }
    return best;
}

bool ThresholdTable::has_starved_class() const {
    return std::any_of(support_counts.begin(), support_counts.end(),
                       [](int c) { return c == 0; });
}

void ThresholdTable::save(const std::filesystem::path& file) const {
    nlohmann::json j;
    j["lambda_percentile"] = lambda_percentile;
    nlohmann::json classes = nlohmann::json::array();
    for (int i = 0; i < num_classes(); ++i) {
        classes.push_back({{"class", class_names[static_cast<std::size_t>(i)]},
                           {"epsilon", epsilon[static_cast<std::size_t>(i)]},
                           {"support", support_counts[static_cast<std::size_t>(i)]}});
    }
    j["classes"] = classes;
    std::ofstream os(file);
    OSFD_REQUIRE(os.good(), "cannot write thresholds to ", file.string());
    os << j.dump(2) << "\n";
}

ThresholdTable ThresholdTable::load(const std::filesystem::path& file) {
    std::ifstream is(file);
    OSFD_REQUIRE(is.good(), "cannot open thresholds file ", file.string());
    nlohmann::json j = nlohmann::json::parse(is, nullptr, false);
    OSFD_REQUIRE(!j.is_discarded(), "thresholds file is not valid JSON: ", file.string());
    ThresholdTable t;
    t.lambda_percentile = j.at("lambda_percentile").get<double>();
    for (const auto& entry : j.at("classes")) {
        t.class_names.push_back(entry.at("class").get<std::string>());
        t.epsilon.push_back(entry.at("epsilon").get<double>());
        t.support_counts.push_back(entry.at("support").get<int>());
    }
    return t;
}

double percentile_lower_nearest_rank(std::vector<double> values, double lambda) {
    OSFD_REQUIRE(!values.empty(), "percentile of an empty sample");
    OSFD_REQUIRE(lambda >= 0.0 && lambda <= 100.0, "lambda must be in [0,100], got ", lambda);
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (lambda <= 0.0) return values.front();
    auto rank = static_cast<std::size_t>(std::ceil(lambda / 100.0 * static_cast<double>(n)));
    rank = std::clamp<std::size_t>(rank, 1, n);
    return values[rank - 1];
}

ThresholdTable estimate_thresholds(const std::vector<std::vector<double>>& probs,
                                   const std::vector<int>& true_labels,
                                   const std::vector<std::string>& class_names,
                                   double lambda) {
    OSFD_REQUIRE(probs.size() == true_labels.size(), "probs/labels length mismatch");
    OSFD_REQUIRE(!probs.empty(), "estimate_thresholds: no calibration samples");
    const int k = static_cast<int>(class_names.size());
    OSFD_REQUIRE(k >= 2, "need at least 2 classes");

    std::vector<std::vector<double>> correct_scores(static_cast<std::size_t>(k));
    for (std::size_t s = 0; s < probs.size(); ++s) {
        OSFD_REQUIRE(static_cast<int>(probs[s].size()) == k, "probability row width mismatch");
        const int y = true_labels[s];
        OSFD_REQUIRE(y >= 0 && y < k, "label ", y, " out of range");
        const int pred = argmax_class(probs[s]);
        if (pred == y) {
            correct_scores[static_cast<std::size_t>(y)].push_back(probs[s][static_cast<std::size_t>(pred)]);
        }
    }

    ThresholdTable table;
    table.lambda_percentile = lambda;
    table.class_names = class_names;
    table.epsilon.resize(static_cast<std::size_t>(k));
    table.support_counts.resize(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        const auto& t_i = correct_scores[static_cast<std::size_t>(i)];
        table.support_counts[static_cast<std::size_t>(i)] = static_cast<int>(t_i.size());
        if (t_i.empty()) {
            // No correct predictions: the class accepts nothing short of a
            // perfect score.
            table.epsilon[static_cast<std::size_t>(i)] = 1.0;
            std::cerr << "warning: class '" << class_names[static_cast<std::size_t>(i)]
                      << "' had no correctly classified calibration samples; threshold set to 1.0"
                      << "\n";
        } else {
            table.epsilon[static_cast<std::size_t>(i)] = percentile_lower_nearest_rank(t_i, lambda);
        }
    }
    return table;
}

std::vector<std::vector<double>> model_probs(ModelStack& model,
                                             const std::vector<Sample>& samples,
                                             int batch_size) {
    OSFD_REQUIRE(batch_size >= 1, "batch_size must be >= 1");
    std::vector<std::vector<double>> out;
    out.reserve(samples.size());
    const std::size_t n = samples.size();
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch_size)) {
        const std::size_t stop = std::min(n, start + static_cast<std::size_t>(batch_size));
        const int bsz = static_cast<int>(stop - start);
        const Image& first = samples[start].image;
        Tensor batch({bsz, first.height, first.width, 3});
        const std::int64_t plane = static_cast<std::int64_t>(first.height) * first.width * 3;
        for (int i = 0; i < bsz; ++i) {
            const Image& img = samples[start + static_cast<std::size_t>(i)].image;
            OSFD_REQUIRE(img.height == first.height && img.width == first.width,
                         "mixed image shapes in evaluation batch");
            std::copy(img.px.begin(), img.px.end(), batch.data() + i * plane);
        }
        Tensor r = model.encode(batch, nn::Mode::kEval);
        Tensor logits = model.classify(r, nn::Mode::kEval);
        auto rows = softmax_rows(logits);
        out.insert(out.end(), rows.begin(), rows.end());
    }
    return out;
}

ThresholdTable estimate_thresholds(ModelStack& model, const std::vector<Sample>& train_samples,
                                   const LabelSpace& space, double lambda, int batch_size) {
    std::vector<int> labels;
    labels.reserve(train_samples.size());
    for (const Sample& s : train_samples) labels.push_back(space.label_of(s));
    return estimate_thresholds(model_probs(model, train_samples, batch_size), labels,
                               space.classes(), lambda);
}

OpenSetPrediction classify_open_set(const std::vector<double>& probs,
                                    const ThresholdTable& thresholds) {
    OSFD_REQUIRE(static_cast<int>(probs.size()) == thresholds.num_classes(),
                 "probability row has ", probs.size(), " classes but the threshold table has ",
                 thresholds.num_classes());
    OpenSetPrediction pred;
    pred.softmax = probs;
    bool known = false;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] >= thresholds.epsilon[i]) {
            known = true;
            break;
        }
    }
    const int top = argmax_class(probs);
    pred.max_score = probs[static_cast<std::size_t>(top)];
    pred.predicted_class = known ? top : -1;
    return pred;
}

OpenSetPrediction classify_open_set(ModelStack& model, const Image& image,
                                    const ThresholdTable& thresholds) {
    Tensor batch({1, image.height, image.width, 3});
    std::copy(image.px.begin(), image.px.end(), batch.data());
    Tensor r = model.encode(batch, nn::Mode::kEval);
    Tensor logits = model.classify(r, nn::Mode::kEval);
    return classify_open_set(softmax_rows(logits)[0], thresholds);
}

}  // namespace osfd
