#pragma once

#include <optional>

#include "rethined/tensor.hpp"

namespace rethined {

struct ConvSpec {
    Tensor weights;               // [C_out, C_in/groups, S, S]
    std::optional<Tensor> bias;   // [C_out]
    int stride = 1;
    int padding = 0;
    int groups = 1;

    int out_channels() const { return weights.dim(0); }
    int in_channels() const { return weights.dim(1) * groups; }
    int kernel() const { return weights.dim(2); }
    std::size_t parameter_count() const { return weights.size() + (bias ? bias->size() : 0); }
};

/// Inference-mode batch norm. `sigma` is the running standard deviation with
/// epsilon already folded in, so it must be strictly positive.
struct BatchNormParams {
    Tensor mu;
    Tensor sigma;
    Tensor gamma;
    Tensor beta;

    int channels() const { return mu.dim(0); }
    std::size_t parameter_count() const { return 4 * mu.size(); }
    static BatchNormParams identity(int channels);
};

// Throws ShapeError/DomainError if the spec violates its own invariants.
void validate(const ConvSpec& spec);
void validate(const BatchNormParams& bn);

Tensor conv2d(const Tensor& input, const ConvSpec& spec);
Tensor batchnorm(const Tensor& input, const BatchNormParams& p);
Tensor relu(const Tensor& input);
Tensor softmax_rows(const Tensor& input);

/// Half-pixel (align_corners = false) bilinear resampling with edge clamping.
Tensor bilinear_resize(const Tensor& input, int out_h, int out_w);
Tensor upsample_nearest(const Tensor& input, int factor);

/// Normalized [1,1,k,k] Gaussian with k = 2*ceil(3 sigma) + 1.
Tensor gaussian_kernel(double sigma);
/// Normalized half-kernel of the 1-D Gaussian whose outer product is gaussian_kernel(sigma).
std::vector<float> gaussian_taps(double sigma);
/// Separable Gaussian blur with reflect padding, per channel.
Tensor gaussian_blur(const Tensor& input, double sigma);

Tensor concat_channels(const Tensor& a, const Tensor& b);

}  // namespace rethined
