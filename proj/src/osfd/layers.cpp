#include "osfd/layers.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>

#include "osfd/error.hpp"
#include "osfd/rng.hpp"

namespace osfd::nn {

namespace {

using MatMap = Eigen::Map<Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

void he_normal_init(Tensor& w, std::int64_t fan_in, std::uint64_t seed) {
    Rng rng(seed);
    const float sd = std::sqrt(2.0f / static_cast<float>(fan_in));
    for (std::int64_t i = 0; i < w.numel(); ++i) {
        w[i] = sd * static_cast<float>(rng.normal());
    }
}

bool caching(Mode mode) { return mode == Mode::kTrain || mode == Mode::kRecord; }

}  // namespace

// ---------------------------------------------------------------------------
// Conv2d
// ---------------------------------------------------------------------------

Conv2d::Conv2d(std::string name, int in_ch, int out_ch, int ksize, int stride, bool bias,
               std::uint64_t init_seed)
    : Layer(std::move(name)),
      in_ch_(in_ch),
      out_ch_(out_ch),
      ksize_(ksize),
      stride_(stride),
      pad_(ksize / 2),
      has_bias_(bias) {
    OSFD_REQUIRE(in_ch > 0 && out_ch > 0 && ksize > 0 && stride > 0, "Conv2d: bad geometry");
    weight_.name = Layer::name() + ".weight";
    weight_.value = Tensor({static_cast<std::int64_t>(ksize) * ksize * in_ch, out_ch});
    weight_.grad = Tensor(weight_.value.shape());
    he_normal_init(weight_.value, static_cast<std::int64_t>(ksize) * ksize * in_ch, init_seed);
    if (has_bias_) {
        bias_.name = Layer::name() + ".bias";
        bias_.value = Tensor({out_ch});
        bias_.grad = Tensor({out_ch});
    }
}

Tensor Conv2d::forward(const Tensor& x, Mode mode) {
    OSFD_REQUIRE(x.ndim() == 4 && x.dim(3) == in_ch_, "Conv2d ", name(), ": expected [N,H,W,",
                 in_ch_, "], got ", x.shape_str());
    const std::int64_t n = x.dim(0), h = x.dim(1), w = x.dim(2);
    const std::int64_t oh = (h + 2 * pad_ - ksize_) / stride_ + 1;
    const std::int64_t ow = (w + 2 * pad_ - ksize_) / stride_ + 1;
    OSFD_REQUIRE(oh > 0 && ow > 0, "Conv2d ", name(), ": input too small");

    const std::int64_t rows = n * oh * ow;
    const std::int64_t patch = static_cast<std::int64_t>(ksize_) * ksize_ * in_ch_;

    Tensor cols({rows, patch});
    const float* src = x.data();
    float* dst = cols.data();
    const std::int64_t row_stride = w * in_ch_;
    for (std::int64_t ni = 0; ni < n; ++ni) {
        const float* img = src + ni * h * row_stride;
        for (std::int64_t oy = 0; oy < oh; ++oy) {
            for (std::int64_t ox = 0; ox < ow; ++ox) {
                float* out_row = dst + ((ni * oh + oy) * ow + ox) * patch;
                for (int kh = 0; kh < ksize_; ++kh) {
                    const std::int64_t iy = oy * stride_ - pad_ + kh;
                    for (int kw = 0; kw < ksize_; ++kw) {
                        const std::int64_t ix = ox * stride_ - pad_ + kw;
                        float* cell = out_row + (kh * ksize_ + kw) * in_ch_;
                        if (iy < 0 || iy >= h || ix < 0 || ix >= w) {
                            std::memset(cell, 0, sizeof(float) * static_cast<std::size_t>(in_ch_));
                        } else {
                            std::memcpy(cell, img + iy * row_stride + ix * in_ch_,
                                        sizeof(float) * static_cast<std::size_t>(in_ch_));
                        }
                    }
                }
            }
        }
    }

    Tensor out({n, oh, ow, out_ch_});
    {
        ConstMatMap a(cols.data(), rows, patch);
        ConstMatMap b(weight_.value.data(), patch, out_ch_);
        MatMap c(out.data(), rows, out_ch_);
        c.noalias() = a * b;
    }
    if (has_bias_) {
        float* o = out.data();
        for (std::int64_t r = 0; r < rows; ++r) {
            for (int c = 0; c < out_ch_; ++c) o[r * out_ch_ + c] += bias_.value[c];
        }
    }

    if (caching(mode)) {
        x_cache_ = x;
        cols_cache_ = std::move(cols);
        out_shape_cache_ = {n, oh, ow, out_ch_};
    } else {
        x_cache_ = Tensor();
        cols_cache_ = Tensor();
    }
    return out;
}

Tensor Conv2d::backward(const Tensor& dy) {
    OSFD_REQUIRE(!cols_cache_.empty(), "Conv2d ", name(), ": backward without cached forward");
    OSFD_REQUIRE(dy.shape() == out_shape_cache_, "Conv2d ", name(), ": dy shape ", dy.shape_str());
    const std::int64_t n = x_cache_.dim(0), h = x_cache_.dim(1), w = x_cache_.dim(2);
    const std::int64_t oh = dy.dim(1), ow = dy.dim(2);
    const std::int64_t rows = n * oh * ow;
    const std::int64_t patch = static_cast<std::int64_t>(ksize_) * ksize_ * in_ch_;

    {
        ConstMatMap cols(cols_cache_.data(), rows, patch);
        ConstMatMap g(dy.data(), rows, out_ch_);
        MatMap dw(weight_.grad.data(), patch, out_ch_);
        dw.noalias() = cols.transpose() * g;
    }
    if (has_bias_) {
        std::fill(bias_.grad.data(), bias_.grad.data() + out_ch_, 0.0f);
        const float* g = dy.data();
        for (std::int64_t r = 0; r < rows; ++r) {
            for (int c = 0; c < out_ch_; ++c) bias_.grad[c] += g[r * out_ch_ + c];
        }
    }

    Tensor dcols({rows, patch});
    {
        ConstMatMap g(dy.data(), rows, out_ch_);
        ConstMatMap wgt(weight_.value.data(), patch, out_ch_);
        MatMap dc(dcols.data(), rows, patch);
        dc.noalias() = g * wgt.transpose();
    }

    // col2im scatter-add.
    Tensor dx(x_cache_.shape());
    float* dxp = dx.data();
    const float* dcp = dcols.data();
    const std::int64_t row_stride = w * in_ch_;
    for (std::int64_t ni = 0; ni < n; ++ni) {
        float* img = dxp + ni * h * row_stride;
        for (std::int64_t oy = 0; oy < oh; ++oy) {
            for (std::int64_t ox = 0; ox < ow; ++ox) {
                const float* src_row = dcp + ((ni * oh + oy) * ow + ox) * patch;
                for (int kh = 0; kh < ksize_; ++kh) {
                    const std::int64_t iy = oy * stride_ - pad_ + kh;
                    if (iy < 0 || iy >= h) continue;
                    for (int kw = 0; kw < ksize_; ++kw) {
                        const std::int64_t ix = ox * stride_ - pad_ + kw;
                        if (ix < 0 || ix >= w) continue;
                        const float* cell = src_row + (kh * ksize_ + kw) * in_ch_;
                        float* acc = img + iy * row_stride + ix * in_ch_;
                        for (int c = 0; c < in_ch_; ++c) acc[c] += cell[c];
                    }
                }
            }
        }
    }
    return dx;
}

void Conv2d::collect_params(std::vector<Param*>& out) {
    out.push_back(&weight_);
    if (has_bias_) out.push_back(&bias_);
}

// ---------------------------------------------------------------------------
// BatchNorm2d
// ---------------------------------------------------------------------------

BatchNorm2d::BatchNorm2d(std::string name, int channels, float momentum, float eps)
    : Layer(std::move(name)), channels_(channels), momentum_(momentum), eps_(eps) {
    gamma_.name = Layer::name() + ".gamma";
    gamma_.value = Tensor::full({channels}, 1.0f);
    gamma_.grad = Tensor({channels});
    beta_.name = Layer::name() + ".beta";
    beta_.value = Tensor({channels});
    beta_.grad = Tensor({channels});
    run_mean_.name = Layer::name() + ".running_mean";
    run_mean_.value = Tensor({channels});
    run_mean_.trainable = false;
    run_var_.name = Layer::name() + ".running_var";
    run_var_.value = Tensor::full({channels}, 1.0f);
    run_var_.trainable = false;
}

Tensor BatchNorm2d::forward(const Tensor& x, Mode mode) {
    OSFD_REQUIRE(x.ndim() == 4 && x.dim(3) == channels_, "BatchNorm2d ", name(),
                 ": expected [N,H,W,", channels_, "], got ", x.shape_str());
    const std::int64_t m = x.dim(0) * x.dim(1) * x.dim(2);
    const int c = channels_;

    std::vector<float> mean(static_cast<std::size_t>(c), 0.0f);
    std::vector<float> var(static_cast<std::size_t>(c), 0.0f);
    const bool batch_stats = (mode == Mode::kTrain || mode == Mode::kStats);

    if (batch_stats) {
        OSFD_REQUIRE(m > 1, "BatchNorm2d ", name(), ": batch statistics need more than one row");
        std::vector<double> sum(static_cast<std::size_t>(c), 0.0);
        std::vector<double> sumsq(static_cast<std::size_t>(c), 0.0);
        const float* p = x.data();
        for (std::int64_t r = 0; r < m; ++r) {
            for (int ch = 0; ch < c; ++ch) {
                const double v = p[r * c + ch];
                sum[static_cast<std::size_t>(ch)] += v;
                sumsq[static_cast<std::size_t>(ch)] += v * v;
            }
        }
        for (int ch = 0; ch < c; ++ch) {
            const double mu = sum[static_cast<std::size_t>(ch)] / static_cast<double>(m);
            const double v2 = sumsq[static_cast<std::size_t>(ch)] / static_cast<double>(m) - mu * mu;
            mean[static_cast<std::size_t>(ch)] = static_cast<float>(mu);
            var[static_cast<std::size_t>(ch)] = static_cast<float>(std::max(v2, 0.0));
        }
        if (mode == Mode::kTrain) {
            for (int ch = 0; ch < c; ++ch) {
                run_mean_.value[ch] = (1.0f - momentum_) * run_mean_.value[ch] + momentum_ * mean[static_cast<std::size_t>(ch)];
                run_var_.value[ch] = (1.0f - momentum_) * run_var_.value[ch] + momentum_ * var[static_cast<std::size_t>(ch)];
            }
        } else {  // kStats: aggregate for the recompute pass
            OSFD_REQUIRE(!stat_sum_.empty(), "BatchNorm2d ", name(),
                         ": kStats forward without begin_bn_stats()");
            stat_count_ += static_cast<double>(m);
            const float* q = x.data();
            for (std::int64_t r = 0; r < m; ++r) {
                for (int ch = 0; ch < c; ++ch) {
                    const double v = q[r * c + ch];
                    stat_sum_[static_cast<std::size_t>(ch)] += v;
                    stat_sumsq_[static_cast<std::size_t>(ch)] += v * v;
                }
            }
        }
    } else {
        for (int ch = 0; ch < c; ++ch) {
            mean[static_cast<std::size_t>(ch)] = run_mean_.value[ch];
            var[static_cast<std::size_t>(ch)] = run_var_.value[ch];
        }
    }

    std::vector<float> inv_std(static_cast<std::size_t>(c));
    for (int ch = 0; ch < c; ++ch) {
        inv_std[static_cast<std::size_t>(ch)] = 1.0f / std::sqrt(var[static_cast<std::size_t>(ch)] + eps_);
    }

    Tensor out(x.shape());
    Tensor xhat;
    const bool keep = caching(mode);
    if (keep) xhat = Tensor(x.shape());
    const float* p = x.data();
    float* o = out.data();
    float* xh = keep ? xhat.data() : nullptr;
    for (std::int64_t r = 0; r < m; ++r) {
        for (int ch = 0; ch < c; ++ch) {
            const float h = (p[r * c + ch] - mean[static_cast<std::size_t>(ch)]) *
                            inv_std[static_cast<std::size_t>(ch)];
            if (keep) xh[r * c + ch] = h;
            o[r * c + ch] = gamma_.value[ch] * h + beta_.value[ch];
        }
    }

    if (keep) {
        xhat_cache_ = std::move(xhat);
        inv_std_cache_ = std::move(inv_std);
        record_mode_ = (mode == Mode::kRecord);
        batch_count_ = m;
    } else {
        xhat_cache_ = Tensor();
        inv_std_cache_.clear();
    }
    return out;
}

Tensor BatchNorm2d::backward(const Tensor& dy) {
    OSFD_REQUIRE(!xhat_cache_.empty(), "BatchNorm2d ", name(), ": backward without cached forward");
    OSFD_REQUIRE(dy.shape() == xhat_cache_.shape(), "BatchNorm2d ", name(), ": dy shape mismatch");
    const std::int64_t m = batch_count_;
    const int c = channels_;
    const float* g = dy.data();
    const float* xh = xhat_cache_.data();

    std::vector<double> sum_dy(static_cast<std::size_t>(c), 0.0);
    std::vector<double> sum_dy_xhat(static_cast<std::size_t>(c), 0.0);
    for (std::int64_t r = 0; r < m; ++r) {
        for (int ch = 0; ch < c; ++ch) {
            sum_dy[static_cast<std::size_t>(ch)] += g[r * c + ch];
            sum_dy_xhat[static_cast<std::size_t>(ch)] += g[r * c + ch] * xh[r * c + ch];
        }
    }
    for (int ch = 0; ch < c; ++ch) {
        gamma_.grad[ch] = static_cast<float>(sum_dy_xhat[static_cast<std::size_t>(ch)]);
        beta_.grad[ch] = static_cast<float>(sum_dy[static_cast<std::size_t>(ch)]);
    }

    Tensor dx(dy.shape());
    float* dxp = dx.data();
    if (record_mode_) {
        // Frozen statistics: the map is affine per channel.
        for (std::int64_t r = 0; r < m; ++r) {
            for (int ch = 0; ch < c; ++ch) {
                dxp[r * c + ch] = g[r * c + ch] * gamma_.value[ch] *
                                  inv_std_cache_[static_cast<std::size_t>(ch)];
            }
        }
        return dx;
    }
    const double inv_m = 1.0 / static_cast<double>(m);
    for (std::int64_t r = 0; r < m; ++r) {
        for (int ch = 0; ch < c; ++ch) {
            const double term = static_cast<double>(g[r * c + ch]) -
                                sum_dy[static_cast<std::size_t>(ch)] * inv_m -
                                static_cast<double>(xh[r * c + ch]) *
                                    sum_dy_xhat[static_cast<std::size_t>(ch)] * inv_m;
            dxp[r * c + ch] = static_cast<float>(
                term * gamma_.value[ch] * inv_std_cache_[static_cast<std::size_t>(ch)]);
        }
    }
    return dx;
}

void BatchNorm2d::collect_params(std::vector<Param*>& out) {
    out.push_back(&gamma_);
    out.push_back(&beta_);
    out.push_back(&run_mean_);
    out.push_back(&run_var_);
}

void BatchNorm2d::begin_bn_stats() {
    stat_count_ = 0.0;
    stat_sum_.assign(static_cast<std::size_t>(channels_), 0.0);
    stat_sumsq_.assign(static_cast<std::size_t>(channels_), 0.0);
}

void BatchNorm2d::finalize_bn_stats() {
    OSFD_REQUIRE(stat_count_ > 0.0, "BatchNorm2d ", name(), ": no data seen during stats pass");
    for (int ch = 0; ch < channels_; ++ch) {
        const double mu = stat_sum_[static_cast<std::size_t>(ch)] / stat_count_;
        const double v2 = stat_sumsq_[static_cast<std::size_t>(ch)] / stat_count_ - mu * mu;
        run_mean_.value[ch] = static_cast<float>(mu);
        run_var_.value[ch] = static_cast<float>(std::max(v2, 0.0));
    }
    stat_sum_.clear();
    stat_sumsq_.clear();
    stat_count_ = 0.0;
}

// ---------------------------------------------------------------------------
// ReLU / pooling
// ---------------------------------------------------------------------------

Tensor ReLU::forward(const Tensor& x, Mode mode) {
    Tensor out(x.shape());
    const bool keep = caching(mode);
    if (keep) mask_.assign(static_cast<std::size_t>(x.numel()), 0);
    for (std::int64_t i = 0; i < x.numel(); ++i) {
        const bool on = x[i] > 0.0f;
        out[i] = on ? x[i] : 0.0f;
        if (keep && on) mask_[static_cast<std::size_t>(i)] = 1;
    }
    if (!keep) mask_.clear();
    return out;
}

Tensor ReLU::backward(const Tensor& dy) {
    OSFD_REQUIRE(static_cast<std::int64_t>(mask_.size()) == dy.numel(),
                 "ReLU ", name(), ": backward without cached forward");
    Tensor dx(dy.shape());
    for (std::int64_t i = 0; i < dy.numel(); ++i) {
        dx[i] = mask_[static_cast<std::size_t>(i)] ? dy[i] : 0.0f;
    }
    return dx;
}

Tensor MaxPool2x2::forward(const Tensor& x, Mode mode) {
    OSFD_REQUIRE(x.ndim() == 4 && x.dim(1) % 2 == 0 && x.dim(2) % 2 == 0,
                 "MaxPool2x2 ", name(), ": needs even spatial dims, got ", x.shape_str());
    const std::int64_t n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
    const std::int64_t oh = h / 2, ow = w / 2;
    Tensor out({n, oh, ow, c});
    const bool keep = caching(mode);
    if (keep) {
        argmax_.assign(static_cast<std::size_t>(out.numel()), 0);
        in_shape_ = x.shape();
    } else {
        argmax_.clear();
    }
    const float* p = x.data();
    float* o = out.data();
    for (std::int64_t ni = 0; ni < n; ++ni) {
        for (std::int64_t oy = 0; oy < oh; ++oy) {
            for (std::int64_t ox = 0; ox < ow; ++ox) {
                const std::int64_t base_out = (((ni * oh) + oy) * ow + ox) * c;
                for (std::int64_t ch = 0; ch < c; ++ch) {
                    float best = -std::numeric_limits<float>::infinity();
                    std::uint8_t best_k = 0;
                    for (std::uint8_t k = 0; k < 4; ++k) {
                        const std::int64_t iy = 2 * oy + (k >> 1);
                        const std::int64_t ix = 2 * ox + (k & 1);
                        const float v = p[(((ni * h) + iy) * w + ix) * c + ch];
                        if (v > best) {
                            best = v;
                            best_k = k;
                        }
                    }
                    o[base_out + ch] = best;
                    if (keep) argmax_[static_cast<std::size_t>(base_out + ch)] = best_k;
                }
            }
        }
    }
    return out;
}

Tensor MaxPool2x2::backward(const Tensor& dy) {
    OSFD_REQUIRE(!argmax_.empty(), "MaxPool2x2 ", name(), ": backward without cached forward");
    const std::int64_t n = in_shape_[0], h = in_shape_[1], w = in_shape_[2], c = in_shape_[3];
    const std::int64_t oh = h / 2, ow = w / 2;
    Tensor dx({n, h, w, c});
    const float* g = dy.data();
    float* dxp = dx.data();
    for (std::int64_t ni = 0; ni < n; ++ni) {
        for (std::int64_t oy = 0; oy < oh; ++oy) {
            for (std::int64_t ox = 0; ox < ow; ++ox) {
                const std::int64_t base_out = (((ni * oh) + oy) * ow + ox) * c;
                for (std::int64_t ch = 0; ch < c; ++ch) {
                    const std::uint8_t k = argmax_[static_cast<std::size_t>(base_out + ch)];
                    const std::int64_t iy = 2 * oy + (k >> 1);
                    const std::int64_t ix = 2 * ox + (k & 1);
                    dxp[(((ni * h) + iy) * w + ix) * c + ch] += g[base_out + ch];
                }
            }
        }
    }
    return dx;
}

Tensor AvgPool2x2::forward(const Tensor& x, Mode mode) {
    OSFD_REQUIRE(x.ndim() == 4 && x.dim(1) % 2 == 0 && x.dim(2) % 2 == 0,
                 "AvgPool2x2 ", name(), ": needs even spatial dims, got ", x.shape_str());
    const std::int64_t n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
    const std::int64_t oh = h / 2, ow = w / 2;
    Tensor out({n, oh, ow, c});
    if (caching(mode)) in_shape_ = x.shape();
    const float* p = x.data();
    float* o = out.data();
    for (std::int64_t ni = 0; ni < n; ++ni) {
        for (std::int64_t oy = 0; oy < oh; ++oy) {
            for (std::int64_t ox = 0; ox < ow; ++ox) {
                const std::int64_t base_out = (((ni * oh) + oy) * ow + ox) * c;
                for (std::int64_t ch = 0; ch < c; ++ch) {
                    float acc = 0.0f;
                    for (int k = 0; k < 4; ++k) {
                        const std::int64_t iy = 2 * oy + (k >> 1);
                        const std::int64_t ix = 2 * ox + (k & 1);
                        acc += p[(((ni * h) + iy) * w + ix) * c + ch];
                    }
                    o[base_out + ch] = 0.25f * acc;
                }
            }
        }
    }
    return out;
}

Tensor AvgPool2x2::backward(const Tensor& dy) {
    OSFD_REQUIRE(!in_shape_.empty(), "AvgPool2x2 ", name(), ": backward without cached forward");
    const std::int64_t n = in_shape_[0], h = in_shape_[1], w = in_shape_[2], c = in_shape_[3];
    const std::int64_t oh = h / 2, ow = w / 2;
    Tensor dx({n, h, w, c});
    const float* g = dy.data();
    float* dxp = dx.data();
    for (std::int64_t ni = 0; ni < n; ++ni) {
        for (std::int64_t oy = 0; oy < oh; ++oy) {
            for (std::int64_t ox = 0; ox < ow; ++ox) {
                const std::int64_t base_out = (((ni * oh) + oy) * ow + ox) * c;
                for (std::int64_t ch = 0; ch < c; ++ch) {
                    const float v = 0.25f * g[base_out + ch];
                    for (int k = 0; k < 4; ++k) {
                        const std::int64_t iy = 2 * oy + (k >> 1);
                        const std::int64_t ix = 2 * ox + (k & 1);
                        dxp[(((ni * h) + iy) * w + ix) * c + ch] += v;
                    }
                }
            }
        }
    }
    return dx;
}

Tensor GlobalAvgPool::forward(const Tensor& x, Mode mode) {
    OSFD_REQUIRE(x.ndim() == 4, "GlobalAvgPool ", name(), ": expected NHWC, got ", x.shape_str());
    const std::int64_t n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
    if (caching(mode)) in_shape_ = x.shape();
    Tensor out({n, c});
    const float* p = x.data();
    const float inv = 1.0f / static_cast<float>(h * w);
    for (std::int64_t ni = 0; ni < n; ++ni) {
        float* o = out.data() + ni * c;
        for (std::int64_t pos = 0; pos < h * w; ++pos) {
            const float* row = p + (ni * h * w + pos) * c;
            for (std::int64_t ch = 0; ch < c; ++ch) o[ch] += row[ch];
        }
        for (std::int64_t ch = 0; ch < c; ++ch) o[ch] *= inv;
    }
    return out;
}

Tensor GlobalAvgPool::backward(const Tensor& dy) {
    OSFD_REQUIRE(!in_shape_.empty(), "GlobalAvgPool ", name(), ": backward without cached forward");
    const std::int64_t n = in_shape_[0], h = in_shape_[1], w = in_shape_[2], c = in_shape_[3];
    Tensor dx({n, h, w, c});
    const float inv = 1.0f / static_cast<float>(h * w);
    float* dxp = dx.data();
    for (std::int64_t ni = 0; ni < n; ++ni) {
        const float* g = dy.data() + ni * c;
        for (std::int64_t pos = 0; pos < h * w; ++pos) {
            float* row = dxp + (ni * h * w + pos) * c;
            for (std::int64_t ch = 0; ch < c; ++ch) row[ch] = g[ch] * inv;
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// Linear / L2Normalize
// ---------------------------------------------------------------------------

Linear::Linear(std::string name, int in_dim, int out_dim, bool bias, std::uint64_t init_seed)
    : Layer(std::move(name)), in_dim_(in_dim), out_dim_(out_dim), has_bias_(bias) {
    OSFD_REQUIRE(in_dim > 0 && out_dim > 0, "Linear: bad dims");
    weight_.name = Layer::name() + ".weight";
    weight_.value = Tensor({in_dim, out_dim});
    weight_.grad = Tensor({in_dim, out_dim});
    he_normal_init(weight_.value, in_dim, init_seed);
    if (has_bias_) {
        bias_.name = Layer::name() + ".bias";
        bias_.value = Tensor({out_dim});
        bias_.grad = Tensor({out_dim});
    }
}

Tensor Linear::forward(const Tensor& x, Mode mode) {
    OSFD_REQUIRE(x.ndim() == 2 && x.dim(1) == in_dim_, "Linear ", name(), ": expected [N,",
                 in_dim_, "], got ", x.shape_str());
    const std::int64_t n = x.dim(0);
    Tensor out({n, out_dim_});
    {
        ConstMatMap a(x.data(), n, in_dim_);
        ConstMatMap b(weight_.value.data(), in_dim_, out_dim_);
        MatMap c(out.data(), n, out_dim_);
        c.noalias() = a * b;
    }
    if (has_bias_) {
        float* o = out.data();
        for (std::int64_t r = 0; r < n; ++r) {
            for (int c = 0; c < out_dim_; ++c) o[r * out_dim_ + c] += bias_.value[c];
        }
    }
    x_cache_ = caching(mode) ? x : Tensor();
    return out;
}

Tensor Linear::backward(const Tensor& dy) {
    OSFD_REQUIRE(!x_cache_.empty(), "Linear ", name(), ": backward without cached forward");
    const std::int64_t n = x_cache_.dim(0);
    OSFD_REQUIRE(dy.ndim() == 2 && dy.dim(0) == n && dy.dim(1) == out_dim_,
                 "Linear ", name(), ": dy shape mismatch");
    {
        ConstMatMap x(x_cache_.data(), n, in_dim_);
        ConstMatMap g(dy.data(), n, out_dim_);
        MatMap dw(weight_.grad.data(), in_dim_, out_dim_);
        dw.noalias() = x.transpose() * g;
    }
    if (has_bias_) {
        std::fill(bias_.grad.data(), bias_.grad.data() + out_dim_, 0.0f);
        const float* g = dy.data();
        for (std::int64_t r = 0; r < n; ++r) {
            for (int c = 0; c < out_dim_; ++c) bias_.grad[c] += g[r * out_dim_ + c];
        }
    }
    Tensor dx({n, in_dim_});
    {
        ConstMatMap g(dy.data(), n, out_dim_);
        ConstMatMap w(weight_.value.data(), in_dim_, out_dim_);
        MatMap d(dx.data(), n, in_dim_);
        d.noalias() = g * w.transpose();
    }
    return dx;
}

void Linear::collect_params(std::vector<Param*>& out) {
    out.push_back(&weight_);
    if (has_bias_) out.push_back(&bias_);
}

Tensor L2Normalize::forward(const Tensor& x, Mode mode) {
    OSFD_REQUIRE(x.ndim() == 2, "L2Normalize ", name(), ": expected [N,D], got ", x.shape_str());
    const std::int64_t n = x.dim(0), d = x.dim(1);
    Tensor out(x.shape());
    const bool keep = caching(mode);
    if (keep) norm_cache_.assign(static_cast<std::size_t>(n), 0.0f);
    for (std::int64_t r = 0; r < n; ++r) {
        const float* row = x.data() + r * d;
        double sq = 0.0;
        for (std::int64_t j = 0; j < d; ++j) sq += static_cast<double>(row[j]) * row[j];
        const float norm = std::max(static_cast<float>(std::sqrt(sq)), eps_);
        float* o = out.data() + r * d;
        for (std::int64_t j = 0; j < d; ++j) o[j] = row[j] / norm;
        if (keep) norm_cache_[static_cast<std::size_t>(r)] = norm;
    }
    x_cache_ = keep ? x : Tensor();
    return out;
}

Tensor L2Normalize::backward(const Tensor& dy) {
    OSFD_REQUIRE(!x_cache_.empty(), "L2Normalize ", name(), ": backward without cached forward");
    const std::int64_t n = x_cache_.dim(0), d = x_cache_.dim(1);
    Tensor dx(x_cache_.shape());
    for (std::int64_t r = 0; r < n; ++r) {
        const float* row = x_cache_.data() + r * d;
        const float* g = dy.data() + r * d;
        float* o = dx.data() + r * d;
        const float norm = norm_cache_[static_cast<std::size_t>(r)];
        double xg = 0.0, sq = 0.0;
        for (std::int64_t j = 0; j < d; ++j) {
            xg += static_cast<double>(row[j]) * g[j];
            sq += static_cast<double>(row[j]) * row[j];
        }
        if (std::sqrt(sq) <= eps_) {
            // Clamped norm: constant denominator.
            for (std::int64_t j = 0; j < d; ++j) o[j] = g[j] / eps_;
        } else {
            const float inv = 1.0f / norm;
            const float inv3 = inv * inv * inv;
            for (std::int64_t j = 0; j < d; ++j) {
                o[j] = g[j] * inv - static_cast<float>(xg) * row[j] * inv3;
            }
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// DenseBlock
// ---------------------------------------------------------------------------

DenseBlock::DenseBlock(std::string name, int in_ch, int growth, int steps, std::uint64_t init_seed)
    : Layer(name), in_ch_(in_ch), growth_(growth), steps_(steps) {
    OSFD_REQUIRE(steps >= 1 && growth >= 1, "DenseBlock: bad geometry");
    int ch = in_ch;
    for (int s = 0; s < steps; ++s) {
        const std::string prefix = name + ".step" + std::to_string(s);
        bns_.push_back(std::make_unique<BatchNorm2d>(prefix + ".bn", ch));
        relus_.push_back(std::make_unique<ReLU>(prefix + ".relu"));
        convs_.push_back(std::make_unique<Conv2d>(prefix + ".conv", ch, growth, 3, 1, false,
                                                  derive_seed(init_seed, "dense", static_cast<std::uint64_t>(s))));
        ch += growth;
    }
}

namespace {
// Concatenate b onto a along the channel axis (NHWC).
Tensor concat_channels(const Tensor& a, const Tensor& b) {
    const std::int64_t n = a.dim(0), h = a.dim(1), w = a.dim(2);
    const std::int64_t ca = a.dim(3), cb = b.dim(3);
    Tensor out({n, h, w, ca + cb});
    const std::int64_t positions = n * h * w;
    for (std::int64_t p = 0; p < positions; ++p) {
        std::memcpy(out.data() + p * (ca + cb), a.data() + p * ca,
                    sizeof(float) * static_cast<std::size_t>(ca));
        std::memcpy(out.data() + p * (ca + cb) + ca, b.data() + p * cb,
                    sizeof(float) * static_cast<std::size_t>(cb));
    }
    return out;
}
}  // namespace

Tensor DenseBlock::forward(const Tensor& x, Mode mode) {
    OSFD_REQUIRE(x.ndim() == 4 && x.dim(3) == in_ch_, "DenseBlock ", name(),
                 ": expected [N,H,W,", in_ch_, "], got ", x.shape_str());
    if (caching(mode)) in_shape_ = x.shape();
    Tensor acc = x;
    for (int s = 0; s < steps_; ++s) {
        Tensor v = relus_[static_cast<std::size_t>(s)]->forward(
            bns_[static_cast<std::size_t>(s)]->forward(acc, mode), mode);
        Tensor y = convs_[static_cast<std::size_t>(s)]->forward(v, mode);
        acc = concat_channels(acc, y);
    }
    return acc;
}

Tensor DenseBlock::backward(const Tensor& dy) {
    OSFD_REQUIRE(!in_shape_.empty(), "DenseBlock ", name(), ": backward without cached forward");
    const std::int64_t positions = in_shape_[0] * in_shape_[1] * in_shape_[2];
    const std::int64_t c_out = in_ch_ + static_cast<std::int64_t>(growth_) * steps_;
    OSFD_REQUIRE(dy.ndim() == 4 && dy.dim(3) == c_out, "DenseBlock ", name(), ": dy shape mismatch");

    // Accumulated gradient w.r.t. the running concatenation, widest first.
    Tensor g_acc = dy;
    for (int s = steps_ - 1; s >= 0; --s) {
        const std::int64_t c_in_step = in_ch_ + static_cast<std::int64_t>(growth_) * s;
        // Split off the step output's gradient slab.
        Tensor g_y({in_shape_[0], in_shape_[1], in_shape_[2], growth_});
        Tensor g_rest({in_shape_[0], in_shape_[1], in_shape_[2], c_in_step});
        for (std::int64_t p = 0; p < positions; ++p) {
            const float* src = g_acc.data() + p * (c_in_step + growth_);
            std::memcpy(g_rest.data() + p * c_in_step, src,
                        sizeof(float) * static_cast<std::size_t>(c_in_step));
            std::memcpy(g_y.data() + p * growth_, src + c_in_step,
                        sizeof(float) * static_cast<std::size_t>(growth_));
        }
        Tensor g_u = bns_[static_cast<std::size_t>(s)]->backward(
            relus_[static_cast<std::size_t>(s)]->backward(
                convs_[static_cast<std::size_t>(s)]->backward(g_y)));
        for (std::int64_t i = 0; i < g_rest.numel(); ++i) g_rest[i] += g_u[i];
        g_acc = std::move(g_rest);
    }
    return g_acc;
}

void DenseBlock::collect_params(std::vector<Param*>& out) {
    for (int s = 0; s < steps_; ++s) {
        bns_[static_cast<std::size_t>(s)]->collect_params(out);
        convs_[static_cast<std::size_t>(s)]->collect_params(out);
    }
}

void DenseBlock::begin_bn_stats() {
    for (auto& bn : bns_) bn->begin_bn_stats();
}

void DenseBlock::finalize_bn_stats() {
    for (auto& bn : bns_) bn->finalize_bn_stats();
}

// ---------------------------------------------------------------------------
// Sequential / optimizer
// ---------------------------------------------------------------------------

Tensor Sequential::forward(const Tensor& x, Mode mode) {
    Tensor h = x;
    for (auto& layer : layers_) h = layer->forward(h, mode);
    return h;
}

Tensor Sequential::backward(const Tensor& dy) {
    Tensor g = dy;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
}

void Sequential::collect_params(std::vector<Param*>& out) {
    for (auto& layer : layers_) layer->collect_params(out);
}

std::vector<Param*> Sequential::params() {
    std::vector<Param*> out;
    collect_params(out);
    return out;
}

void SgdMomentum::step(const std::vector<Param*>& params, double lr) {
    if (bound_.empty()) {
        bound_ = params;
        velocity_.reserve(params.size());
        for (Param* p : params) velocity_.emplace_back(p->value.shape());
    }
    OSFD_REQUIRE(bound_ == params, "SgdMomentum: parameter set changed between steps");
    for (std::size_t i = 0; i < params.size(); ++i) {
        Param& p = *params[i];
        if (!p.trainable) continue;
        Tensor& v = velocity_[i];
        for (std::int64_t j = 0; j < p.value.numel(); ++j) {
            const float g = p.grad[j] + static_cast<float>(weight_decay_) * p.value[j];
            v[j] = static_cast<float>(momentum_) * v[j] + g;
            p.value[j] -= static_cast<float>(lr) * v[j];
        }
    }
}

void SgdMomentum::zero_grad(const std::vector<Param*>& params) {
    for (Param* p : params) p->grad.fill(0.0f);
}

double cosine_lr(double base_lr, int epoch, int total_epochs) {
    OSFD_REQUIRE(total_epochs > 0 && epoch >= 0 && epoch < total_epochs, "cosine_lr: bad epoch");
    if (total_epochs == 1) return base_lr;
    const double t = static_cast<double>(epoch) / static_cast<double>(total_epochs);
    return base_lr * 0.5 * (1.0 + std::cos(M_PI * t));
}

}  // namespace osfd::nn
