#pragma once

#include <cstdint>

#include "rethined/attention_upscale.hpp"
#include "rethined/weights.hpp"

namespace rethined {

struct PipelineConfig {
    int lr_size = 256;
    int patch = 8;
    int embed_dim = 64;
    bool composite = true;
    std::uint64_t seed = 7;
};

/// Throws DomainError unless lr_size is a positive multiple of the patch size
/// and of `encoder_stride`, and embed_dim >= 1.
void validate(const PipelineConfig& config, int encoder_stride = 8);

/// Resolved sizes for one HR input.
struct PipelineGeometry {
    int hr_height = 0, hr_width = 0;
    int lr_height = 0, lr_width = 0;
    int factor = 1;  // HR / LR, identical on both axes
    int grid_rows = 0, grid_cols = 0;
    int patch = 0;
    long patch_count() const { return static_cast<long>(grid_rows) * grid_cols; }
};

PipelineGeometry plan_geometry(const PipelineConfig& config, int hr_height, int hr_width, int encoder_stride = 8);

/// Milliseconds per stage of one run_pipeline call.
struct StageTimes {
    double coarse = 0;     // blur, downsample, coarse network, tokenization
    double attention = 0;  // attention_scores only
    double masking = 0;
    double mixing = 0;     // LR token mix, pixel shuffle, coherence
    double upscale = 0;    // HF patch mix and HR composition
    double total = 0;
};

/// Max-pool of a binary HR mask onto the LR grid, so an LR pixel is corrupted
/// when any HR pixel it covers is.
Tensor downsample_mask(const Tensor& m_hr, int factor);

/// Resamples coarse features of stride `feature_stride` onto a grid of cell size `patch`.
Tensor features_to_grid(const Tensor& features, int feature_stride, int patch);

Tensor run_pipeline(const PipelineConfig& config, const InpaintModel& model, const Tensor& x_hr_masked,
                    const Tensor& m_hr, StageTimes* times = nullptr);

}  // namespace rethined
