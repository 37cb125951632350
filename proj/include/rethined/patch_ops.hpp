#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rethined/tensor.hpp"

namespace rethined {

/// Non-overlapping patches as rows of an [N, C*ph*pw] matrix. Rows are in
/// raster order over the grid; each row is channel-major (all of channel 0
/// row-major, then channel 1, ...).
struct PatchSequence {
    Tensor patches;
    int rows = 0;
    int cols = 0;
    int patch_h = 0;
    int patch_w = 0;
    int channels = 3;

    int count() const { return rows * cols; }
    int image_height() const { return rows * patch_h; }
    int image_width() const { return cols * patch_w; }
};

/// Per-patch corruption flags: flags[i] == 1 iff any pixel of patch i is corrupted.
struct MaskVector {
    std::vector<std::uint8_t> flags;
    int rows = 0;
    int cols = 0;

    int count() const { return static_cast<int>(flags.size()); }
    int corrupted() const;
    bool operator==(const MaskVector&) const = default;
};

/// Tokens: columns [0, d_k) hold the patch embedding, [d_k, d_k + C) the
/// coarse-network features of the same grid cell.
struct TokenMatrix {
    Tensor x;
    int embed_dim = 0;
    int feature_dim = 0;
};

/// Identity-selector weights [C*P*P, 1, P, P] for the grouped patching convolution.
Tensor img2col_weights(int patch, int channels = 3);

/// Splits [C,H,W] into PxP patches with a stride-P grouped convolution.
PatchSequence img2col(const Tensor& image, int patch);

/// Direct gather of (patch_h x patch_w) patches; used where the selector
/// convolution would be prohibitively large (high-resolution patches).
PatchSequence extract_patches(const Tensor& image, int patch_h, int patch_w);

/// Reassembles a patch sequence into [C, rows*ph, cols*pw]. Exact inverse of img2col.
Tensor pixel_shuffle(const PatchSequence& seq);

MaskVector tokenize_mask(const Tensor& mask, int patch);
MaskVector tokenize_mask(const Tensor& mask, int patch_h, int patch_w);

TokenMatrix embed_and_condition(const PatchSequence& seq, const Tensor& features, const Tensor& embedding);
/// Variant without feature conditioning (C = 0).
TokenMatrix embed_and_condition(const PatchSequence& seq, const Tensor& embedding);

}  // namespace rethined
