#pragma once

#include <cstdint>

#include "rethined/tensor.hpp"

namespace rethined {

struct IntRange {
    int lo = 0;
    int hi = 0;
};

/// Free-form brush-stroke mask parameters. Pixel ranges are given for a
/// 256x256 canvas and scale with min(H, W) / 256.
struct MaskSpec {
    std::uint64_t seed = 0;
    IntRange num_strokes{1, 6};
    IntRange brush_radius{8, 40};
    IntRange walk_length{4, 12};
    IntRange segment_length{10, 40};
    double angle_jitter = 0.8;
    double min_coverage = 0.30;
    double max_coverage = 0.50;
    int max_retries = 64;
    int max_strokes = 512;  // per attempt
};

/// Random-walk brush strokes stamped until coverage enters
/// [min_coverage, max_coverage]. Returns a binary [1,H,W] tensor, 1 = corrupted.
Tensor generate_mask(const MaskSpec& spec, int height, int width);

double mask_coverage(const Tensor& mask);

}  // namespace rethined
