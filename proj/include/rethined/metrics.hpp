#pragma once

#include "rethined/tensor.hpp"

namespace rethined {

double l1(const Tensor& a, const Tensor& b);
double mse(const Tensor& a, const Tensor& b);

/// 10 log10(1 / MSE) for [0,1] data; +infinity when the inputs are identical.
double psnr(const Tensor& a, const Tensor& b);

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

/// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), C1 = 0.01^2,
/// C2 = 0.03^2, averaged over channels and all valid window positions.
double ssim(const Tensor& a, const Tensor& b);

}  // namespace rethined
