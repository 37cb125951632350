#include "rethined/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <optional>

#include "rethined/error.hpp"
#include "rethined/ops.hpp"

namespace rethined {

void validate(const PipelineConfig& config, int encoder_stride) {
    if (config.patch < 1 || config.lr_size < 1 || config.embed_dim < 1)
        throw DomainError("pipeline: lr_size, patch and embed_dim must be positive");
    if (config.lr_size % config.patch != 0)
        throw DomainError("pipeline: lr_size " + std::to_string(config.lr_size) + " is not divisible by patch " +
                          std::to_string(config.patch));
    if (config.lr_size % encoder_stride != 0)
        throw DomainError("pipeline: lr_size " + std::to_string(config.lr_size) +
                          " is not divisible by the encoder stride " + std::to_string(encoder_stride));
}

PipelineGeometry plan_geometry(const PipelineConfig& config, int hr_height, int hr_width, int encoder_stride) {
    validate(config, encoder_stride);
    const int longest = std::max(hr_height, hr_width);
    if (hr_height < 1 || hr_width < 1 || longest % config.lr_size != 0)
        throw ShapeError("pipeline: HR extent " + std::to_string(longest) + " is not a multiple of lr_size " +
                         std::to_string(config.lr_size));
    PipelineGeometry g;
    g.hr_height = hr_height;
    g.hr_width = hr_width;
    g.factor = longest / config.lr_size;
    if (hr_height % g.factor != 0 || hr_width % g.factor != 0)
        throw ShapeError("pipeline: HR extents are not divisible by the downsampling factor " +
                         std::to_string(g.factor));
    g.lr_height = hr_height / g.factor;
    g.lr_width = hr_width / g.factor;
    const int step = std::lcm(config.patch, encoder_stride);
    if (g.lr_height % step != 0 || g.lr_width % step != 0)
        throw ShapeError("pipeline: LR extent " + std::to_string(g.lr_height) + "x" + std::to_string(g.lr_width) +
                         " must be divisible by " + std::to_string(step));
    g.patch = config.patch;
    g.grid_rows = g.lr_height / config.patch;
    g.grid_cols = g.lr_width / config.patch;
    return g;
}

Tensor downsample_mask(const Tensor& m_hr, int factor) {
    require_chw(m_hr, "downsample_mask", 1);
    if (factor < 1 || m_hr.dim(1) % factor != 0 || m_hr.dim(2) % factor != 0)
        throw ShapeError("downsample_mask: mask extent not divisible by factor");
    const int h = m_hr.dim(1) / factor, w = m_hr.dim(2) / factor;
    Tensor out({1, h, w});
    for (int y = 0; y < m_hr.dim(1); ++y)
        for (int x = 0; x < m_hr.dim(2); ++x) {
            const float v = m_hr.at(0, y, x);
            if (v != 0.0f && v != 1.0f) throw DomainError("downsample_mask: mask must be binary");
            float& o = out.at(0, y / factor, x / factor);
            o = std::max(o, v);
        }
    return out;
}

Tensor features_to_grid(const Tensor& features, int feature_stride, int patch) {
    require_chw(features, "features_to_grid");
    if (feature_stride == patch) return features;
    if (patch > feature_stride) {
        if (patch % feature_stride != 0) throw ShapeError("features_to_grid: patch must be a multiple of the feature stride");
        const int k = patch / feature_stride;
        const int c = features.dim(0), h = features.dim(1) / k, w = features.dim(2) / k;
        if (h * k != features.dim(1) || w * k != features.dim(2))
            throw ShapeError("features_to_grid: feature map not divisible by pooling factor");
        Tensor out({c, h, w});
        const double inv = 1.0 / (static_cast<double>(k) * k);
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    double s = 0.0;
                    for (int dy = 0; dy < k; ++dy)
                        for (int dx = 0; dx < k; ++dx) s += features.at(ch, y * k + dy, x * k + dx);
                    out.at(ch, y, x) = static_cast<float>(s * inv);
                }
        return out;
    }
    if (feature_stride % patch != 0) throw ShapeError("features_to_grid: feature stride must be a multiple of patch");
    return upsample_nearest(features, feature_stride / patch);
}

namespace {

using clock_type = std::chrono::steady_clock;

double ms_since(clock_type::time_point t0) {
    return std::chrono::duration<double, std::milli>(clock_type::now() - t0).count();
}

}  // namespace

Tensor run_pipeline(const PipelineConfig& config, const InpaintModel& model, const Tensor& x_hr_masked,
                    const Tensor& m_hr, StageTimes* times) {
    const auto t_start = clock_type::now();
    require_chw(x_hr_masked, "run_pipeline image", 3);
    require_chw(m_hr, "run_pipeline mask", 1);
    if (m_hr.dim(1) != x_hr_masked.dim(1) || m_hr.dim(2) != x_hr_masked.dim(2))
        throw ShapeError("run_pipeline: mask extent differs from image");
    if (model.patch_size() != config.patch || model.embed_dim() != config.embed_dim)
        throw ShapeError("run_pipeline: model was built for patch " + std::to_string(model.patch_size()) +
                         " and d_k " + std::to_string(model.embed_dim()));
    const PipelineGeometry g =
        plan_geometry(config, x_hr_masked.dim(1), x_hr_masked.dim(2), model.coarse.downsample_factor());

    // Corrupted pixels never contribute, whatever the caller left in them. The
    // copy is only made when some corrupted pixel is actually nonzero.
    const std::size_t plane = m_hr.size();
    const float* mp = m_hr.data().data();
    bool dirty = false;
    for (std::size_t i = 0; i < plane; ++i) {
        if (mp[i] != 0.0f && mp[i] != 1.0f) throw DomainError("run_pipeline: mask must be binary");
        if (mp[i] != 0.0f)
            for (int c = 0; c < 3; ++c) dirty |= x_hr_masked[c * plane + i] != 0.0f;
    }
    std::optional<Tensor> cleaned;
    if (dirty) {
        cleaned = x_hr_masked;
        for (std::size_t i = 0; i < plane; ++i)
            if (mp[i] != 0.0f)
                for (int c = 0; c < 3; ++c) (*cleaned)[c * plane + i] = 0.0f;
    }
    const Tensor& x_hr = cleaned ? *cleaned : x_hr_masked;

    auto t0 = clock_type::now();
    // frequency_split, with the low-pass buffer turned into the high-pass one
    // in place once the LR image has been sampled from it.
    FrequencySplit split;
    split.sigma = antialias_sigma(g.factor);
    split.high = gaussian_blur(x_hr, split.sigma);
    Tensor x_lr = bilinear_resize(split.high, g.lr_height, g.lr_width);
    {
        const float* x = x_hr.data().data();
        float* hl = split.high.data().data();
        const std::size_t n = split.high.size();
#pragma omp parallel for simd schedule(static)
        for (std::size_t i = 0; i < n; ++i) hl[i] = x[i] - hl[i];
    }
    const Tensor mask_lr = downsample_mask(m_hr, g.factor);
    {
        const std::size_t lr_plane = mask_lr.size();
        for (std::size_t i = 0; i < lr_plane; ++i)
            if (mask_lr[i] != 0.0f)
                for (int c = 0; c < 3; ++c) x_lr[c * lr_plane + i] = 0.0f;
    }
    const CoarseOutput co = coarse_forward(model.coarse, x_lr, mask_lr);
    const Tensor features = features_to_grid(co.features, model.coarse.feature_stride(), config.patch);
    const double coarse_ms = ms_since(t0);

    RefineTimings rt;
    const RefineResult refined = npm_refine(co.coarse, x_lr, features, model.npm, mask_lr, config.patch, &rt);

    t0 = clock_type::now();
    Tensor out = compose_hr(x_hr, split, refined.image, refined.mt, m_hr, config.patch, config.composite);
    const double upscale_ms = ms_since(t0);

    if (times) {
        times->coarse = coarse_ms + rt.tokenize;
        times->attention = rt.attention;
        times->masking = rt.masking;
        times->mixing = rt.mixing;
        times->upscale = upscale_ms;
        times->total = ms_since(t_start);
    }
    return out;
}

}  // namespace rethined
