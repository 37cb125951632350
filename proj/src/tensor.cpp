#include "rethined/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "rethined/error.hpp"

namespace rethined {

std::size_t shape_volume(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int e : shape) n *= static_cast<std::size_t>(e);
    return n;
}

std::string shape_string(const std::vector<int>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

static void validate_shape(const std::vector<int>& shape) {
    if (shape.empty() || shape.size() > 4)
        throw ShapeError("tensor rank must be 1..4, got " + std::to_string(shape.size()));
    for (int e : shape)
        if (e < 1) throw ShapeError("tensor extents must be >= 1, got " + shape_string(shape));
}

Tensor::Tensor(std::vector<int> shape, float fill) : shape_(std::move(shape)) {
    validate_shape(shape_);
    data_.assign(shape_volume(shape_), fill);
}

Tensor::Tensor(std::vector<int> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape(shape_);
    if (shape_volume(shape_) != data_.size())
        throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_string(shape_));
}

std::span<const float> Tensor::row(int r) const {
    const std::size_t w = size() / static_cast<std::size_t>(shape_[0]);
    return std::span<const float>(data_).subspan(static_cast<std::size_t>(r) * w, w);
}

std::span<float> Tensor::row(int r) {
    const std::size_t w = size() / static_cast<std::size_t>(shape_[0]);
    return std::span<float>(data_).subspan(static_cast<std::size_t>(r) * w, w);
}

std::span<const float> Tensor::channel(int c) const { return row(c); }
std::span<float> Tensor::channel(int c) { return row(c); }

Tensor Tensor::reshaped(std::vector<int> shape) const {
    validate_shape(shape);
    if (shape_volume(shape) != data_.size())
        throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = data_;
    return t;
}

void require_chw(const Tensor& t, const char* what, int channels) {
    if (t.rank() != 3) throw ShapeError(std::string(what) + ": expected [C,H,W], got " + shape_string(t.shape()));
    if (channels > 0 && t.dim(0) != channels)
        throw ShapeError(std::string(what) + ": expected " + std::to_string(channels) + " channels, got " +
                         shape_string(t.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(what) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
}

float max_abs_diff(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "max_abs_diff");
    float m = 0.0f;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

}  // namespace rethined
