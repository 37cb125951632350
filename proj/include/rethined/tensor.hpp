#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace rethined {

/// Dense row-major float array of rank 1..4. Images are [C,H,W]; conv weights
/// are [C_out, C_in/groups, S, S]; token matrices are [N, D].
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape, float fill = 0.0f);
    Tensor(std::vector<int> shape, std::vector<float> data);

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<int> shape, float v) { return Tensor(std::move(shape), v); }

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::span<const float> data() const { return data_; }
    std::span<float> data() { return data_; }
    const std::vector<float>& values() const { return data_; }

    float operator[](std::size_t i) const { return data_[i]; }
    float& operator[](std::size_t i) { return data_[i]; }

    // [C,H,W] accessors.
    float at(int c, int y, int x) const {
        return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
    }
    float& at(int c, int y, int x) {
        return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
    }
    // [R,C] accessors.
    float at(int r, int c) const { return data_[static_cast<std::size_t>(r) * shape_[1] + c]; }
    float& at(int r, int c) { return data_[static_cast<std::size_t>(r) * shape_[1] + c]; }

    std::span<const float> row(int r) const;
    std::span<float> row(int r);
    std::span<const float> channel(int c) const;
    std::span<float> channel(int c);

    Tensor reshaped(std::vector<int> shape) const;

    bool operator==(const Tensor& other) const = default;

private:
    std::vector<int> shape_;
    std::vector<float> data_;
};

std::size_t shape_volume(const std::vector<int>& shape);
std::string shape_string(const std::vector<int>& shape);

// Throws ShapeError unless t is rank 3 (and has `channels` channels when given).
void require_chw(const Tensor& t, const char* what, int channels = -1);
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

float max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace rethined
