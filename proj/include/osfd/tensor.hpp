#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace osfd {

/// Dense float32 tensor, row-major. Image batches use NHWC layout
/// ([batch, height, width, channel]); embeddings are [batch, dim].
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::int64_t> shape);

    static Tensor zeros(std::vector<std::int64_t> shape);
    static Tensor full(std::vector<std::int64_t> shape, float value);

    const std::vector<std::int64_t>& shape() const { return shape_; }
    std::int64_t ndim() const { return static_cast<std::int64_t>(shape_.size()); }
    std::int64_t dim(int i) const;
    std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }

    float& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    float operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    /// Same data, new shape; element count must match.
    Tensor reshaped(std::vector<std::int64_t> shape) const;

    void fill(float v);
    bool all_finite() const;
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    std::string shape_str() const;

private:
    std::vector<std::int64_t> shape_;
    std::vector<float> data_;
};

}  // namespace osfd
