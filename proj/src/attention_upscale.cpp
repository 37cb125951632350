#include "rethined/attention_upscale.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <vector>

#include "rethined/error.hpp"
#include "rethined/kernels.hpp"
#include "rethined/ops.hpp"

namespace rethined {

double antialias_sigma(double factor) {
    if (!(factor >= 1.0)) throw DomainError("downsampling factor must be >= 1");
    return std::max(kMinSigma, 0.8 * std::sqrt(factor * factor - 1.0));
}

FrequencySplit frequency_split(const Tensor& x_hr, double factor) {
    require_chw(x_hr, "frequency_split");
    FrequencySplit s;
    s.sigma = antialias_sigma(factor);
    s.low = gaussian_blur(x_hr, s.sigma);
    s.high = Tensor(x_hr.shape());
    const float* x = x_hr.data().data();
    const float* lo = s.low.data().data();
    float* hi = s.high.data().data();
    const std::size_t n = x_hr.size();
#pragma omp parallel for simd schedule(static)
    for (std::size_t i = 0; i < n; ++i) hi[i] = x[i] - lo[i];
    return s;
}

HrPatchGrid hf_token_mix(const AttentionMap& mt, const HrPatchGrid& hf_patches) {
    if (!mt.masked) throw StateError("hf_token_mix: attention map must be masked");
    if (hf_patches.rows != mt.rows || hf_patches.cols != mt.cols)
        throw ShapeError("hf_token_mix: HR patch grid does not match the attention grid");
    return token_mix(mt, hf_patches);
}

Tensor compose_hr(const Tensor& x_hr_masked, const Tensor& x_lr_hat, const AttentionMap& mt, const Tensor& m_hr,
                  int patch, bool composite) {
    require_chw(x_hr_masked, "compose_hr", 3);
    require_chw(x_lr_hat, "compose_hr LR", 3);
    const int hh = x_hr_masked.dim(1), wh = x_hr_masked.dim(2);
    const int h = x_lr_hat.dim(1), w = x_lr_hat.dim(2);
    if (hh % h != 0 || wh % w != 0)
        throw ShapeError("compose_hr: HR extents " + shape_string(x_hr_masked.shape()) +
                         " are not integer multiples of LR " + shape_string(x_lr_hat.shape()));
    const double factor = std::max(hh / h, wh / w);
    return compose_hr(x_hr_masked, frequency_split(x_hr_masked, factor), x_lr_hat, mt, m_hr, patch, composite);
}

Tensor compose_hr(const Tensor& x_hr_masked, const FrequencySplit& split, const Tensor& x_lr_hat,
                  const AttentionMap& mt, const Tensor& m_hr, int patch, bool composite) {
    require_chw(x_hr_masked, "compose_hr", 3);
    require_chw(x_lr_hat, "compose_hr LR", 3);
    require_chw(m_hr, "compose_hr mask", 1);
    require_same_shape(x_hr_masked, split.high, "compose_hr split");
    const int hh = x_hr_masked.dim(1), wh = x_hr_masked.dim(2);
    const int h = x_lr_hat.dim(1), w = x_lr_hat.dim(2);
    if (m_hr.dim(1) != hh || m_hr.dim(2) != wh) throw ShapeError("compose_hr: mask extent differs from image");
    if (hh % h != 0 || wh % w != 0)
        throw ShapeError("compose_hr: HR extents " + shape_string(x_hr_masked.shape()) +
                         " are not integer multiples of LR " + shape_string(x_lr_hat.shape()));
    if (h % patch != 0 || w % patch != 0) throw ShapeError("compose_hr: LR extents not divisible by patch");
    if (mt.rows != h / patch || mt.cols != w / patch) throw ShapeError("compose_hr: attention grid does not match LR image");
    for (float v : m_hr.data())
        if (v != 0.0f && v != 1.0f) throw DomainError("compose_hr: mask must be binary");

    const int ph = patch * (hh / h), pw = patch * (wh / w);
    const int rows = mt.rows, cols = mt.cols, n = rows * cols;
    if (mt.a.rank() != 2 || mt.a.dim(0) != n || mt.a.dim(1) != n)
        throw ShapeError("compose_hr: attention map is not " + std::to_string(n) + "x" + std::to_string(n));
    if (!mt.masked) throw StateError("compose_hr: attention map must be masked");

    // Equivalent to pixel_shuffle(hf_token_mix(mt, extract_patches(high))) added
    // onto the bilinear upsample, but mixes patch rows straight into the output
    // so no HR-sized patch matrices are materialized.
    std::vector<std::vector<kernels::SparseWeight>> support(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const auto wr = mt.a.row(i);
        for (int j = 0; j < n; ++j)
            if (wr[j] != 0.0f) support[i].push_back({j, wr[j]});
    }
    const std::size_t plane = static_cast<std::size_t>(hh) * wh;
    const float* mask = m_hr.data().data();
    std::vector<std::uint8_t> all_known(static_cast<std::size_t>(n), 0);
    if (composite)
        for (int i = 0; i < n; ++i) {
            const int y0 = (i / cols) * ph, x0 = (i % cols) * pw;
            bool known = true;
            for (int y = y0; y < y0 + ph && known; ++y)
                for (int x = x0; x < x0 + pw; ++x)
                    if (mask[static_cast<std::size_t>(y) * wh + x] != 0.0f) {
                        known = false;
                        break;
                    }
            all_known[i] = known;
        }

    Tensor out = bilinear_resize(x_lr_hat, hh, wh);
    const float* src = x_hr_masked.data().data();
    const float* high = split.high.data().data();
    float* dst = out.data().data();
    const int units = 3 * ph;

#pragma omp parallel
    {
        const kernels::FlushDenormals ftz;
        std::vector<float> hf(static_cast<std::size_t>(pw));
        // Row `ly` of every HF patch, gathered contiguously: the source rows of
        // one unit sit a whole patch row apart and would alias in cache.
        std::vector<float> slice(static_cast<std::size_t>(n) * pw);
#pragma omp for schedule(static)
        for (int u = 0; u < units; ++u) {
            const int c = u / ph, ly = u % ph;
            auto offset = [&](int patch_index) {
                const int y = (patch_index / cols) * ph + ly, x = (patch_index % cols) * pw;
                return c * plane + static_cast<std::size_t>(y) * wh + x;
            };
            for (int r = 0; r < rows; ++r)
                std::memcpy(slice.data() + static_cast<std::size_t>(r) * cols * pw, high + offset(r * cols),
                            sizeof(float) * cols * pw);

            for (int i = 0; i < n; ++i) {
                const std::size_t o = offset(i);
                if (all_known[i]) {
                    std::memcpy(dst + o, src + o, sizeof(float) * pw);
                    continue;
                }
                const auto& sup = support[i];
                if (sup.empty())
                    std::fill(hf.begin(), hf.end(), 0.0f);
                else if (sup.size() == 1 && sup[0].w == 1.0f)
                    std::memcpy(hf.data(), slice.data() + static_cast<std::size_t>(sup[0].col) * pw, sizeof(float) * pw);
                else
                    kernels::parallel::weighted_row_sum(sup, slice.data(), static_cast<std::size_t>(pw), pw, hf.data());
                const std::size_t mrow = o - c * plane;
                for (int x = 0; x < pw; ++x) {
                    const float v = std::clamp(dst[o + x] + hf[x], 0.0f, 1.0f);
                    dst[o + x] = (composite && mask[mrow + x] == 0.0f) ? src[o + x] : v;
                }
            }
        }
    }
    return out;
}

}  // namespace rethined
