#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rethined/ops.hpp"

namespace rethined {

/// conv -> batchnorm, optionally summed with a batchnorm'd identity branch.
/// After fusion only `conv` (with bias) remains.
struct RepStage {
    ConvSpec conv;
    std::optional<BatchNormParams> bn;
    std::optional<BatchNormParams> skip;

    bool fused() const { return !bn && !skip; }
};

/// Depthwise 3x3 stage followed by pointwise 1x1 stage, each with ReLU.
/// An optional nearest-neighbour upsample runs before the block.
struct RepBlock {
    int upsample = 1;
    RepStage depthwise;
    RepStage pointwise;

    int in_channels() const { return depthwise.conv.in_channels(); }
    int out_channels() const { return pointwise.conv.out_channels(); }
    int stride() const { return depthwise.conv.stride; }
    bool fused() const { return depthwise.fused() && pointwise.fused(); }
    std::size_t parameter_count() const;
};

struct CoarseModel {
    std::vector<RepBlock> blocks;
    ConvSpec head;          // 1x1 conv to RGB, applied after head_upsample
    int head_upsample = 4;
    int feature_tap = 3;    // index of the block whose output conditions attention

    bool fused() const;
    std::size_t parameter_count() const;
    int downsample_factor() const;  // product of block strides
    int feature_channels() const { return blocks.at(static_cast<std::size_t>(feature_tap)).out_channels(); }
    int feature_stride() const;     // input extent / tapped feature extent
};

struct CoarseOutput {
    Tensor coarse;    // [3,H,W]
    Tensor features;  // [C, H/stride, W/stride]
};

/// Builds the 5-block encoder-decoder with seeded He-uniform conv weights.
/// With `randomize_batchnorm` the BN statistics are drawn away from identity.
CoarseModel make_coarse_model(std::uint64_t seed, bool randomize_batchnorm = true);
RepBlock make_rep_block(int in_channels, int out_channels, int stride, int upsample, bool with_skip, std::uint64_t seed,
                        bool randomize_batchnorm = true);

Tensor forward(const RepStage& stage, const Tensor& x);
Tensor forward(const RepBlock& block, const Tensor& x);

/// Runs the model on concat(x_lr, mask_lr). Mask value 1 marks a corrupted pixel.
CoarseOutput coarse_forward(const CoarseModel& model, const Tensor& x_lr, const Tensor& mask_lr);

RepStage fuse_stage(const RepStage& stage);
RepBlock fuse_block(const RepBlock& block);
CoarseModel fuse_model(const CoarseModel& model);

}  // namespace rethined
