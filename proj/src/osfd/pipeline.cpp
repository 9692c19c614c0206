#include "osfd/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "osfd/error.hpp"
#include "osfd/losses.hpp"
#include "osfd/openset.hpp"
#include "osfd/rng.hpp"

namespace osfd {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

RowMat<float> tensor_to_mat(const Tensor& t) {
    RowMat<float> m(t.dim(0), t.dim(1));
    std::copy(t.data(), t.data() + t.numel(), m.data());
    return m;
}

Tensor mat_to_tensor(const RowMat<float>& m) {
    Tensor t({m.rows(), m.cols()});
    std::copy(m.data(), m.data() + m.size(), t.data());
    return t;
}

std::vector<std::vector<int>> make_batches(int n, int batch_size, Rng& rng) {
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    std::vector<std::vector<int>> batches;
    for (int start = 0; start < n; start += batch_size) {
        const int stop = std::min(n, start + batch_size);
        batches.emplace_back(order.begin() + start, order.begin() + stop);
    }
    return batches;
}

std::vector<Sample> gather(const std::vector<Sample>& samples, const std::vector<int>& idx) {
    std::vector<Sample> out;
    out.reserve(idx.size());
    for (int i : idx) out.push_back(samples[static_cast<std::size_t>(i)]);
    return out;
}

}  // namespace

void TrainLog::append_csv(const std::filesystem::path& file) const {
    const bool fresh = !std::filesystem::exists(file);
    std::ofstream os(file, std::ios::app);
    OSFD_REQUIRE(os.good(), "cannot append train log to ", file.string());
    if (fresh) os << "stage,epoch,loss_mean,lr,wall_seconds\n";
    for (const TrainLogRow& r : rows) {
        os << stage << "," << r.epoch << "," << r.loss_mean << "," << r.lr << ","
           << r.wall_seconds << "\n";
    }
}

Tensor samples_to_batch(const std::vector<Sample>& samples, const std::vector<int>& indices) {
    OSFD_REQUIRE(!indices.empty(), "samples_to_batch: empty index list");
    const Image& first = samples[static_cast<std::size_t>(indices[0])].image;
    Tensor batch({static_cast<std::int64_t>(indices.size()), first.height, first.width, 3});
    const std::int64_t plane = static_cast<std::int64_t>(first.height) * first.width * 3;
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const Image& img = samples[static_cast<std::size_t>(indices[i])].image;
        OSFD_REQUIRE(img.height == first.height && img.width == first.width,
                     "samples_to_batch: mixed shapes");
        std::copy(img.px.begin(), img.px.end(), batch.data() + static_cast<std::int64_t>(i) * plane);
    }
    return batch;
}

Stage1Result stage1_train(const RunConfig& config, ModelStack& model,
                          const std::vector<Sample>& train_samples, const LabelSpace& space) {
    config.validate();
    OSFD_REQUIRE(!train_samples.empty(), "stage1_train: no training samples");

    // Every sample must land in a class with at least 2 members under the
    // two-view construction; a single sample still pairs with its sibling
    // view, so the real constraint is a non-empty class map.
    for (const Sample& s : train_samples) (void)space.label_of(s);

    const bool is_ce = (config.loss.variant == LossVariant::kCrossEntropy);
    if (is_ce && model.num_classes() != space.num_classes()) {
        model.reset_classifier(space.num_classes(), derive_seed(config.seed, "stage1.head"));
    }

    std::vector<nn::Param*> params = model.encoder_params();
    {
        const auto head = is_ce ? model.classifier_params() : model.projection_params();
        params.insert(params.end(), head.begin(), head.end());
    }
    nn::SgdMomentum optim(config.momentum, config.weight_decay);

    const int n = static_cast<int>(train_samples.size());
    const int epochs = config.stage1_epochs;
    const int swa_count =
        std::clamp(static_cast<int>(std::lround(config.swa_window * epochs)), 1, epochs);
    const int first_snapshot_epoch = epochs - swa_count + 1;  // 1-based

    Stage1Result result;
    result.log.stage = "stage1";
    NamedTensors last_good = model.snapshot_encoder();

    for (int epoch = 1; epoch <= epochs; ++epoch) {
        const auto t0 = Clock::now();
        const double lr = nn::cosine_lr(config.lr, epoch - 1, epochs);
        Rng shuffle_rng(derive_seed(config.seed, "stage1.shuffle", static_cast<std::uint64_t>(epoch)));
        const auto batches = make_batches(n, config.batch_size, shuffle_rng);

        double loss_sum = 0.0;
        std::int64_t loss_batches = 0;
        bool diverged = false;
        for (std::size_t b = 0; b < batches.size(); ++b) {
            const std::uint64_t batch_seed = derive_seed(
                config.seed, "stage1.aug", static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(b));
            const MultiViewBatch mvb = build_multiview_batch(gather(train_samples, batches[b]),
                                                             config.augment, space, batch_seed);

            nn::SgdMomentum::zero_grad(params);
            Tensor r = model.encode(mvb.views, nn::Mode::kTrain);

            float loss = 0.0f;
            Tensor d_r;
            if (is_ce) {
                Tensor logits = model.classify(r, nn::Mode::kTrain);
                RowMat<float> grad;
                loss = cross_entropy_loss<float>(tensor_to_mat(logits), mvb.labels, &grad);
                d_r = model.classifier_backward(mat_to_tensor(grad));
            } else {
                Tensor z = model.project(r, nn::Mode::kTrain);
                RowMat<float> zm = tensor_to_mat(z);
                RowMat<float> grad;
                const auto tau = static_cast<float>(config.loss.temperature);
                switch (config.loss.variant) {
                    case LossVariant::kWeightedSupCon:
                        loss = weighted_supcon_loss<float>(zm, mvb.labels, mvb.is_real, tau,
                                                           static_cast<float>(config.loss.alpha),
                                                           &grad);
                        break;
                    case LossVariant::kSupCon:
                        loss = supcon_loss<float>(zm, mvb.labels, tau, &grad);
                        break;
                    case LossVariant::kSimClr:
                        loss = simclr_loss<float>(zm, mvb.origin_index, tau, &grad);
                        break;
                    case LossVariant::kCrossEntropy:
                        break;  // handled above
                }
                d_r = model.projection_backward(mat_to_tensor(grad));
            }

            if (!std::isfinite(loss)) {
                diverged = true;
                break;
            }
            model.encoder_backward(d_r);
            optim.step(params, lr);
            loss_sum += loss;
            ++loss_batches;
        }

        if (diverged) {
            model.load_encoder(last_good);
            result.log.aborted = true;
            break;
        }

        TrainLogRow row;
        row.epoch = epoch;
        row.loss_mean = loss_batches ? loss_sum / static_cast<double>(loss_batches) : 0.0;
        row.lr = lr;
        row.wall_seconds = seconds_since(t0);
        result.log.rows.push_back(row);

        last_good = model.snapshot_encoder();
        if (epoch >= first_snapshot_epoch) {
            result.snapshots.snapshots.push_back(last_good);
            result.snapshots.epochs.push_back(epoch);
        }
    }

    if (result.snapshots.snapshots.empty()) {
        // Divergence before the snapshot window: keep the last good weights.
        result.snapshots.snapshots.push_back(last_good);
        result.snapshots.epochs.push_back(static_cast<int>(result.log.rows.size()));
    }
    return result;
}

void apply_swa(const RunConfig& config, ModelStack& model, const CheckpointSet& snapshots,
               const std::vector<Sample>& train_samples) {
    model.load_encoder(swa_average(snapshots));
    OSFD_REQUIRE(train_samples.size() >= 2, "apply_swa: statistics pass needs >= 2 samples");

    model.begin_bn_stats();
    const int n = static_cast<int>(train_samples.size());
    const int bsz = std::max(2, config.batch_size);
    std::vector<int> idx;
    for (int start = 0; start < n; start += bsz) {
        int stop = std::min(n, start + bsz);
        // A trailing singleton cannot produce batch statistics; merge it.
        if (stop - start == 1 && start > 0) --start;
        idx.clear();
        for (int i = start; i < stop; ++i) idx.push_back(i);
        model.encode(samples_to_batch(train_samples, idx), nn::Mode::kStats);
        if (stop >= n) break;
    }
    model.finalize_bn_stats();
}

Stage2Result stage2_finetune(const RunConfig& config, ModelStack& model,
                             const std::vector<Sample>& train_samples, const LabelSpace& space) {
    config.validate();
    OSFD_REQUIRE(!train_samples.empty(), "stage2_finetune: no training samples");

    model.reset_classifier(space.num_classes(), derive_seed(config.seed, "stage2.head"));
    const std::uint64_t encoder_before = model.encoder_hash();

    std::vector<nn::Param*> params = model.classifier_params();
    nn::SgdMomentum optim(config.momentum, config.weight_decay);
    const int n = static_cast<int>(train_samples.size());

    Stage2Result result;
    result.log.stage = "stage2";

    for (int epoch = 1; epoch <= config.stage2_epochs; ++epoch) {
        const auto t0 = Clock::now();
        const double lr = nn::cosine_lr(config.stage2_lr, epoch - 1, config.stage2_epochs);
        Rng shuffle_rng(derive_seed(config.seed, "stage2.shuffle", static_cast<std::uint64_t>(epoch)));
        const auto batches = make_batches(n, config.batch_size, shuffle_rng);

        double loss_sum = 0.0;
        std::int64_t loss_batches = 0;
        for (std::size_t b = 0; b < batches.size(); ++b) {
            Tensor images = samples_to_batch(train_samples, batches[b]);
            if (config.stage2_flip_augment) {
                Rng flip_rng(derive_seed(config.seed, "stage2.flip",
                                         static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(b)));
                const std::int64_t plane = images.dim(1) * images.dim(2) * 3;
                for (std::size_t i = 0; i < batches[b].size(); ++i) {
                    if (!flip_rng.chance(0.5)) continue;
                    Image img(static_cast<int>(images.dim(1)), static_cast<int>(images.dim(2)));
                    std::copy(images.data() + static_cast<std::int64_t>(i) * plane,
                              images.data() + static_cast<std::int64_t>(i + 1) * plane,
                              img.px.begin());
                    img = hflip(img);
                    std::copy(img.px.begin(), img.px.end(),
                              images.data() + static_cast<std::int64_t>(i) * plane);
                }
            }
            std::vector<int> labels;
            labels.reserve(batches[b].size());
            for (int i : batches[b]) {
                labels.push_back(space.label_of(train_samples[static_cast<std::size_t>(i)]));
            }

            nn::SgdMomentum::zero_grad(params);
            // Frozen encoder: eval statistics, no caches, no gradient flow.
            Tensor r = model.encode(images, nn::Mode::kEval);
            Tensor logits = model.classify(r, nn::Mode::kTrain);
            RowMat<float> grad;
            const float loss = cross_entropy_loss<float>(tensor_to_mat(logits), labels, &grad);
            OSFD_REQUIRE(std::isfinite(loss), "stage2_finetune: non-finite loss");
            model.classifier_backward(mat_to_tensor(grad));
            optim.step(params, lr);
            loss_sum += loss;
            ++loss_batches;
        }

        TrainLogRow row;
        row.epoch = epoch;
        row.loss_mean = loss_batches ? loss_sum / static_cast<double>(loss_batches) : 0.0;
        row.lr = lr;
        row.wall_seconds = seconds_since(t0);
        result.log.rows.push_back(row);
    }

    OSFD_REQUIRE(model.encoder_hash() == encoder_before,
                 "stage2_finetune must not touch encoder weights");
    result.train_accuracy = closed_set_accuracy(model, train_samples, space, config.batch_size);
    return result;
}

double closed_set_accuracy(ModelStack& model, const std::vector<Sample>& samples,
                           const LabelSpace& space, int batch_size) {
    OSFD_REQUIRE(!samples.empty(), "closed_set_accuracy: empty sample list");
    const auto probs = model_probs(model, samples, batch_size);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (argmax_class(probs[i]) == space.label_of(samples[i])) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(samples.size());
}

}  // namespace osfd
