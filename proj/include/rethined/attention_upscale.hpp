#pragma once

#include "rethined/neural_patch_match.hpp"

namespace rethined {

/// low = G_sigma * x, high = x - low.
struct FrequencySplit {
    Tensor low;
    Tensor high;
    double sigma = 0.0;
};

/// High-resolution patches on the LR attention grid; each patch is
/// (P * H_HR/H) x (P * W_HR/W) pixels.
using HrPatchGrid = PatchSequence;

inline constexpr double kMinSigma = 1e-3;

/// Anti-aliasing deviation for a downsampling factor r >= 1: 0.8 sqrt(r^2 - 1),
/// floored at kMinSigma.
double antialias_sigma(double factor);

FrequencySplit frequency_split(const Tensor& x_hr, double factor);

/// token_mix restricted to a masked map, applied to high-frequency HR patches.
HrPatchGrid hf_token_mix(const AttentionMap& mt, const HrPatchGrid& hf_patches);

/// bilinear_up(x_lr_hat) + pixel_shuffle(hf_token_mix(M_T, HF patches)),
/// clamped to [0,1]; with `composite` every known pixel (m_hr == 0) is taken
/// verbatim from x_hr_masked.
Tensor compose_hr(const Tensor& x_hr_masked, const Tensor& x_lr_hat, const AttentionMap& mt, const Tensor& m_hr,
                  int patch, bool composite);

/// Same as compose_hr with a precomputed split of x_hr_masked.
Tensor compose_hr(const Tensor& x_hr_masked, const FrequencySplit& split, const Tensor& x_lr_hat,
                  const AttentionMap& mt, const Tensor& m_hr, int patch, bool composite);

}  // namespace rethined
