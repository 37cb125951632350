#pragma once

#include <vector>

#include "rethined/tensor.hpp"

namespace rethined {

/// Complex 2-D spectrum with power-of-two extents, split real/imag planes.
struct ComplexGrid {
    int height = 0;
    int width = 0;
    std::vector<double> re;
    std::vector<double> im;

    ComplexGrid() = default;
    ComplexGrid(int h, int w);
    double magnitude(int u, int v) const;
};

bool is_power_of_two(int n);
int next_power_of_two(int n);

/// In-place iterative radix-2 transform of n interleaved-free samples.
/// `inverse` flips the twiddle sign; no 1/n scaling is applied.
void fft1d(std::span<double> re, std::span<double> im, bool inverse);

/// Unnormalized forward DFT of a [1,H,W] tensor (e^{-2 pi i ...} convention).
ComplexGrid fft2d(const Tensor& input);
/// Inverse of fft2d including the 1/(HW) factor.
Tensor ifft2d(const ComplexGrid& input);

/// Focal frequency loss on spectra: d = |A - B|, w = (d / max d)^alpha
/// (w = 0 when every d is 0), returns mean(w * d^2).
double focal_frequency_term(const ComplexGrid& a, const ComplexGrid& b, double alpha);

/// Mean over channels of focal_frequency_term(fft2d(pred_c), fft2d(target_c)).
/// H and W must be powers of two.
double focal_frequency_loss(const Tensor& pred, const Tensor& target, double alpha = 1.0);

struct PaddedFflResult {
    double loss = 0.0;
    int padded_height = 0;
    int padded_width = 0;
    int offset_y = 0;
    int offset_x = 0;
};

/// Centers both images in a zero canvas of the next power-of-two size, then
/// evaluates focal_frequency_loss.
PaddedFflResult focal_frequency_loss_padded(const Tensor& pred, const Tensor& target, double alpha = 1.0);

/// Mean squared error, the coarse-stage reconstruction term.
double l2_loss(const Tensor& pred, const Tensor& target);

}  // namespace rethined
