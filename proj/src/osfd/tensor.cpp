#include "osfd/tensor.hpp"

#include <cmath>
#include <sstream>

#include "osfd/error.hpp"

namespace osfd {

namespace {
std::int64_t count_elems(const std::vector<std::int64_t>& shape) {
    std::int64_t n = 1;
    for (std::int64_t d : shape) {
        OSFD_REQUIRE(d >= 0, "tensor dimension must be non-negative, got ", d);
        n *= d;
    }
    return n;
}
}  // namespace

Tensor::Tensor(std::vector<std::int64_t> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<std::size_t>(count_elems(shape_)), 0.0f);
}

Tensor Tensor::zeros(std::vector<std::int64_t> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<std::int64_t> shape, float value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
}

std::int64_t Tensor::dim(int i) const {
    OSFD_REQUIRE(i >= 0 && i < static_cast<int>(shape_.size()),
                 "dim index ", i, " out of range for shape ", shape_str());
    return shape_[static_cast<std::size_t>(i)];
}

Tensor Tensor::reshaped(std::vector<std::int64_t> shape) const {
    OSFD_REQUIRE(count_elems(shape) == numel(),
                 "reshape from ", shape_str(), " changes element count");
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = data_;
    return t;
}

void Tensor::fill(float v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
    for (float v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) os << ", ";
        os << shape_[i];
    }
    os << "]";
    return os.str();
}

}  // namespace osfd
