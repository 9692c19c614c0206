#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "osfd/error.hpp"

namespace osfd {

template <typename S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using ColVec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

enum class LossVariant { kWeightedSupCon, kSupCon, kSimClr, kCrossEntropy };

inline std::string to_string(LossVariant v) {
    switch (v) {
        case LossVariant::kWeightedSupCon: return "WEIGHTED_SUPCON";
        case LossVariant::kSupCon: return "SUPCON";
        case LossVariant::kSimClr: return "SIMCLR";
        case LossVariant::kCrossEntropy: return "CROSS_ENTROPY";
    }
    return "?";
}

inline LossVariant loss_variant_from_string(const std::string& s) {
    if (s == "WEIGHTED_SUPCON") return LossVariant::kWeightedSupCon;
    if (s == "SUPCON") return LossVariant::kSupCon;
    if (s == "SIMCLR") return LossVariant::kSimClr;
    if (s == "CROSS_ENTROPY") return LossVariant::kCrossEntropy;
    fail("unknown loss variant '", s, "'");
}

struct LossConfig {
    double temperature = 0.1;
    double alpha = 1.21;
    LossVariant variant = LossVariant::kWeightedSupCon;

    void validate() const {
        OSFD_REQUIRE(temperature > 0.0, "temperature must be positive, got ", temperature);
        OSFD_REQUIRE(alpha > 0.0, "alpha must be positive, got ", alpha);
    }
};

namespace detail {

/// Shared core of the contrastive family. Per anchor i:
///   t_i = -(1/|P(i)|) sum_{p in P(i)} log( exp(z_i.z_p/tau) / sum_{a != i} exp(z_i.z_a/tau) )
/// and the loss is sum_i c_i * t_i with caller-supplied anchor coefficients
/// c_i (already normalized). positives[i] lists P(i); every anchor needs at
/// least one positive.
///
/// Gradient, with Q the row-softmax over non-anchor similarities and Mn the
/// row-normalized positive mask:  dL/dZ = (A + A^T) Z / tau,  A = diag(c)(Q - Mn).
template <typename S>
S contrastive_core(const RowMat<S>& z,
                   const std::vector<std::vector<int>>& positives,
                   const ColVec<S>& anchor_coeff,
                   S tau,
                   RowMat<S>* grad) {
    const Eigen::Index b = z.rows();
    OSFD_REQUIRE(b >= 2, "contrastive loss needs at least 2 views, got ", b);
    OSFD_REQUIRE(tau > S(0), "temperature must be positive");

    RowMat<S> sim = (z * z.transpose()) / tau;  // b x b

    // Row-stable softmax over a != i, plus the per-anchor positive term.
    RowMat<S> q(b, b);
    ColVec<S> log_denom(b);
    S loss = S(0);
    for (Eigen::Index i = 0; i < b; ++i) {
        S mx = -std::numeric_limits<S>::infinity();
        for (Eigen::Index a = 0; a < b; ++a) {
            if (a != i) mx = std::max(mx, sim(i, a));
        }
        S denom = S(0);
        for (Eigen::Index a = 0; a < b; ++a) {
            q(i, a) = (a == i) ? S(0) : std::exp(sim(i, a) - mx);
            denom += q(i, a);
        }
        q.row(i) /= denom;
        log_denom(i) = std::log(denom) + mx;

        const auto& pos = positives[static_cast<std::size_t>(i)];
        OSFD_REQUIRE(!pos.empty(), "anchor ", i, " has no positives in the batch");
        S t_i = S(0);
        for (int p : pos) t_i += log_denom(i) - sim(i, p);
        t_i /= static_cast<S>(pos.size());
        loss += anchor_coeff(i) * t_i;
    }

    if (grad) {
        RowMat<S> a_mat = q;
        for (Eigen::Index i = 0; i < b; ++i) {
            const auto& pos = positives[static_cast<std::size_t>(i)];
            const S m = S(1) / static_cast<S>(pos.size());
            for (int p : pos) a_mat(i, p) -= m;
            a_mat.row(i) *= anchor_coeff(i);
        }
        grad->noalias() = (a_mat + a_mat.transpose()) * z;
        *grad /= tau;
    }
    return loss;
}

template <typename S>
std::vector<std::vector<int>> positives_by_label(const std::vector<int>& labels) {
    const int b = static_cast<int>(labels.size());
    std::vector<std::vector<int>> pos(static_cast<std::size_t>(b));
    for (int i = 0; i < b; ++i) {
        for (int j = 0; j < b; ++j) {
            if (j != i && labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(i)]) {
                pos[static_cast<std::size_t>(i)].push_back(j);
            }
        }
    }
    return pos;
}

}  // namespace detail

/// Supervised contrastive loss over a 2N-view batch, reduced as the mean
/// over anchors. P(i) = other views sharing the anchor's label; the
/// denominator runs over all non-anchor views.
template <typename S>
S supcon_loss(const RowMat<S>& z, const std::vector<int>& labels, S tau,
              RowMat<S>* grad = nullptr) {
    OSFD_REQUIRE(static_cast<Eigen::Index>(labels.size()) == z.rows(),
                 "labels length must match batch size");
    auto positives = detail::positives_by_label<S>(labels);
    for (std::size_t i = 0; i < positives.size(); ++i) {
        OSFD_REQUIRE(!positives[i].empty(), "anchor ", i,
                     " has no positive pair; the batch builder must guarantee view pairs");
    }
    ColVec<S> coeff = ColVec<S>::Constant(z.rows(), S(1) / static_cast<S>(z.rows()));
    return detail::contrastive_core<S>(z, positives, coeff, tau, grad);
}

/// Real-emphasis variant: anchors from real samples carry weight alpha, all
/// others weight 1, with the total normalized so alpha shifts emphasis
/// without rescaling the loss. alpha == 1 reduces exactly to supcon_loss.
template <typename S>
S weighted_supcon_loss(const RowMat<S>& z, const std::vector<int>& labels,
                       const std::vector<char>& is_real, S tau, S alpha,
                       RowMat<S>* grad = nullptr) {
    OSFD_REQUIRE(static_cast<Eigen::Index>(labels.size()) == z.rows() &&
                     static_cast<Eigen::Index>(is_real.size()) == z.rows(),
                 "labels/is_real length must match batch size");
    OSFD_REQUIRE(alpha > S(0), "alpha must be positive");
    auto positives = detail::positives_by_label<S>(labels);
    for (std::size_t i = 0; i < positives.size(); ++i) {
        OSFD_REQUIRE(!positives[i].empty(), "anchor ", i,
                     " has no positive pair; the batch builder must guarantee view pairs");
    }
    ColVec<S> coeff(z.rows());
    S total = S(0);
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        coeff(i) = is_real[static_cast<std::size_t>(i)] ? alpha : S(1);
        total += coeff(i);
    }
    coeff /= total;
    return detail::contrastive_core<S>(z, positives, coeff, tau, grad);
}

/// Normalized-temperature cross entropy: the only positive for a view is its
/// sibling view (same origin). Reduces to supcon_loss when every sample in
/// the batch has a unique label.
template <typename S>
S simclr_loss(const RowMat<S>& z, const std::vector<int>& origin_index, S tau,
              RowMat<S>* grad = nullptr) {
    const Eigen::Index b = z.rows();
    OSFD_REQUIRE(static_cast<Eigen::Index>(origin_index.size()) == b,
                 "origin_index length must match batch size");
    std::vector<std::vector<int>> positives(static_cast<std::size_t>(b));
    for (Eigen::Index i = 0; i < b; ++i) {
        for (Eigen::Index j = 0; j < b; ++j) {
            if (j != i &&
                origin_index[static_cast<std::size_t>(j)] == origin_index[static_cast<std::size_t>(i)]) {
                positives[static_cast<std::size_t>(i)].push_back(static_cast<int>(j));
            }
        }
        OSFD_REQUIRE(positives[static_cast<std::size_t>(i)].size() == 1,
                     "view ", i, " must have exactly one sibling, found ",
                     positives[static_cast<std::size_t>(i)].size());
    }
    ColVec<S> coeff = ColVec<S>::Constant(b, S(1) / static_cast<S>(b));
    return detail::contrastive_core<S>(z, positives, coeff, tau, grad);
}

/// Mean negative log softmax probability of the true class.
template <typename S>
S cross_entropy_loss(const RowMat<S>& logits, const std::vector<int>& labels,
                     RowMat<S>* grad = nullptr) {
    const Eigen::Index n = logits.rows();
    const Eigen::Index k = logits.cols();
    OSFD_REQUIRE(n > 0, "cross_entropy_loss: empty batch");
    OSFD_REQUIRE(static_cast<Eigen::Index>(labels.size()) == n, "labels length mismatch");
    OSFD_REQUIRE(logits.allFinite(), "cross_entropy_loss: non-finite logits");

    if (grad) grad->resize(n, k);
    S loss = S(0);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        OSFD_REQUIRE(y >= 0 && y < k, "label ", y, " out of range for ", k, " classes");
        S mx = logits.row(i).maxCoeff();
        S denom = S(0);
        for (Eigen::Index c = 0; c < k; ++c) denom += std::exp(logits(i, c) - mx);
        loss += std::log(denom) + mx - logits(i, y);
        if (grad) {
            for (Eigen::Index c = 0; c < k; ++c) {
                (*grad)(i, c) = std::exp(logits(i, c) - mx) / denom;
            }
            (*grad)(i, y) -= S(1);
        }
    }
    if (grad) *grad /= static_cast<S>(n);
    return loss / static_cast<S>(n);
}

}  // namespace osfd
