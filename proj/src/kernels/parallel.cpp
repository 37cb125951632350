#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "rethined/kernels.hpp"

#if defined(__SSE__)
#include <xmmintrin.h>
#endif

namespace rethined::kernels {

#if defined(__SSE__)
FlushDenormals::FlushDenormals() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | 0x8040u); }
FlushDenormals::~FlushDenormals() { _mm_setcsr(saved_); }
#else
FlushDenormals::FlushDenormals() = default;
FlushDenormals::~FlushDenormals() = default;
#endif

}  // namespace rethined::kernels

namespace rethined::kernels::parallel {

void conv2d(std::span<const float> input, std::span<const float> weights, std::span<const float> bias,
            const ConvGeometry& g, std::span<float> out) {
    const int ho = g.out_height();
    const int wo = g.out_width();
    const int cin_g = g.in_channels / g.groups;
    const int cout_g = g.out_channels / g.groups;
    const int s = g.kernel;
    const int stride = g.stride;

#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < g.out_channels; ++oc) {
        const int grp = oc / cout_g;
        float* dst = out.data() + static_cast<std::size_t>(oc) * ho * wo;
        std::fill(dst, dst + static_cast<std::size_t>(ho) * wo, bias.empty() ? 0.0f : bias[oc]);
        for (int ic = 0; ic < cin_g; ++ic) {
            const float* src = input.data() + static_cast<std::size_t>(grp * cin_g + ic) * g.height * g.width;
            const float* wk = weights.data() + (static_cast<std::size_t>(oc) * cin_g + ic) * s * s;
            for (int ky = 0; ky < s; ++ky) {
                for (int kx = 0; kx < s; ++kx) {
                    const float w = wk[ky * s + kx];
                    if (w == 0.0f) continue;
                    // ox range whose input column lands inside the image
                    const int off = kx - g.padding;
                    const int ox0 = std::max(0, (-off + stride - 1) / stride);
                    const int ox1 = std::min(wo, (g.width - off + stride - 1) / stride);
                    for (int oy = 0; oy < ho; ++oy) {
                        const int iy = oy * stride - g.padding + ky;
                        if (iy < 0 || iy >= g.height) continue;
                        const float* srow = src + static_cast<std::size_t>(iy) * g.width + off;
                        float* drow = dst + static_cast<std::size_t>(oy) * wo;
                        if (stride == 1) {
#pragma omp simd
                            for (int ox = ox0; ox < ox1; ++ox) drow[ox] += w * srow[ox];
                        } else {
                            for (int ox = ox0; ox < ox1; ++ox) drow[ox] += w * srow[ox * stride];
                        }
                    }
                }
            }
        }
    }
}

namespace {

constexpr int kBlock = 64;
constexpr int kStrip = 512;

// The row is copied into `padded` with reflected borders so every output goes
// through the same vector loop; acc stays in registers across the tap loop.
void blur_row(const float* row, int width, SymmetricTaps taps, std::vector<float>& padded, float* out) {
    const int radius = static_cast<int>(taps.size()) - 1;
    padded.resize(static_cast<std::size_t>(width) + 2 * radius);
    for (int i = -radius; i < width + radius; ++i) padded[i + radius] = row[reflect_index(i, width)];
    const float* p = padded.data() + radius;
    int x0 = 0;
    for (; x0 + kBlock <= width; x0 += kBlock) {
        float acc[kBlock] = {};
        const float* c = p + x0;
        for (int k = 1; k <= radius; ++k) {
            const float t = taps[k];
            const float* l = c - k;
            const float* r = c + k;
#pragma omp simd
            for (int j = 0; j < kBlock; ++j) acc[j] += t * ((l[j] - c[j]) + (r[j] - c[j]));
        }
#pragma omp simd
        for (int j = 0; j < kBlock; ++j) out[x0 + j] = c[j] + acc[j];
    }
    for (int x = x0; x < width; ++x) {
        float acc = 0.0f;
        for (int k = 1; k <= radius; ++k) acc += taps[k] * ((p[x - k] - p[x]) + (p[x + k] - p[x]));
        out[x] = p[x] + acc;
    }
}

// Vertical pass over the column strip [x0, x0 + len). Walking a narrow strip
// top to bottom keeps its (2 radius + 1)-row window resident in L2.
void blur_column_strip(const float* tmp, int height, int width, int x0, int len, SymmetricTaps taps,
                       float* dst_plane) {
    const int radius = static_cast<int>(taps.size()) - 1;
    alignas(64) float acc[kStrip];
    for (int y = 0; y < height; ++y) {
        const float* c = tmp + static_cast<std::size_t>(y) * width + x0;
        std::fill(acc, acc + len, 0.0f);
        for (int k = 1; k <= radius; ++k) {
            const float t = taps[k];
            const float* up = tmp + static_cast<std::size_t>(reflect_index(y - k, height)) * width + x0;
            const float* dn = tmp + static_cast<std::size_t>(reflect_index(y + k, height)) * width + x0;
#pragma omp simd
            for (int j = 0; j < len; ++j) acc[j] += t * ((up[j] - c[j]) + (dn[j] - c[j]));
        }
        float* dst = dst_plane + static_cast<std::size_t>(y) * width + x0;
#pragma omp simd
        for (int j = 0; j < len; ++j) dst[j] = c[j] + acc[j];
    }
}

}  // namespace

void separable_blur(std::span<const float> input, int planes, int height, int width, SymmetricTaps taps,
                    std::span<float> out) {
    const std::size_t plane = static_cast<std::size_t>(height) * width;
    // One plane of row-pass output at a time keeps the scratch at 1/planes of the image.
    std::vector<float> tmp(plane);

    const int strips = (width + kStrip - 1) / kStrip;
    for (int p = 0; p < planes; ++p) {
        const float* src = input.data() + p * plane;
        float* dst_plane = out.data() + p * plane;
#pragma omp parallel
        {
            std::vector<float> padded;
#pragma omp for schedule(static)
            for (int y = 0; y < height; ++y)
                blur_row(src + static_cast<std::size_t>(y) * width, width, taps, padded,
                         tmp.data() + static_cast<std::size_t>(y) * width);
#pragma omp for schedule(static)
            for (int s = 0; s < strips; ++s) {
                const int x0 = s * kStrip;
                blur_column_strip(tmp.data(), height, width, x0, std::min(kStrip, width - x0), taps, dst_plane);
            }
        }
    }
}

void matmul(std::span<const float> a, std::span<const float> b, int m, int k, int n, std::span<float> out) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        float* o = out.data() + static_cast<std::size_t>(i) * n;
        std::fill(o, o + n, 0.0f);
        for (int t = 0; t < k; ++t) {
            const float av = a[static_cast<std::size_t>(i) * k + t];
            const float* br = b.data() + static_cast<std::size_t>(t) * n;
#pragma omp simd
            for (int j = 0; j < n; ++j) o[j] += av * br[j];
        }
    }
}

void matmul_bt(std::span<const float> a, std::span<const float> b, int m, int k, int n, float scale,
               std::span<float> out) {
    std::vector<float> bt(static_cast<std::size_t>(k) * n);
    for (int j = 0; j < n; ++j)
        for (int t = 0; t < k; ++t) bt[static_cast<std::size_t>(t) * n + j] = b[static_cast<std::size_t>(j) * k + t];
    matmul(a, bt, m, k, n, out);
    if (scale != 1.0f) {
        float* o = out.data();
        const std::size_t total = static_cast<std::size_t>(m) * n;
#pragma omp parallel for simd schedule(static)
        for (std::size_t i = 0; i < total; ++i) o[i] *= scale;
    }
}

void softmax_rows(std::span<const float> input, int rows, int cols, std::span<float> out) {
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
        const float* in = input.data() + static_cast<std::size_t>(r) * cols;
        float* o = out.data() + static_cast<std::size_t>(r) * cols;
        const float mx = *std::max_element(in, in + cols);
        double sum = 0.0;
        for (int c = 0; c < cols; ++c) {
            o[c] = std::exp(in[c] - mx);
            sum += o[c];
        }
        const float inv = static_cast<float>(1.0 / sum);
        for (int c = 0; c < cols; ++c) o[c] *= inv;
    }
}

void weighted_row_sum(std::span<const SparseWeight> support, const float* rows, std::size_t stride, long len,
                      float* out) {
    // GCC's vectorizer turns the equivalent array loop into an unroll-and-jam
    // with a scalar body, so the 64-float strip is held in explicit vectors.
    typedef float v16 __attribute__((vector_size(64)));
    long x0 = 0;
    for (; x0 + 64 <= len; x0 += 64) {
        v16 a0 = {}, a1 = {}, a2 = {}, a3 = {};
        for (const SparseWeight& e : support) {
            const float* v = rows + static_cast<std::size_t>(e.col) * stride + x0;
            v16 x0v, x1v, x2v, x3v;
            std::memcpy(&x0v, v, sizeof x0v);
            std::memcpy(&x1v, v + 16, sizeof x1v);
            std::memcpy(&x2v, v + 32, sizeof x2v);
            std::memcpy(&x3v, v + 48, sizeof x3v);
            a0 += e.w * x0v;
            a1 += e.w * x1v;
            a2 += e.w * x2v;
            a3 += e.w * x3v;
        }
        std::memcpy(out + x0, &a0, sizeof a0);
        std::memcpy(out + x0 + 16, &a1, sizeof a1);
        std::memcpy(out + x0 + 32, &a2, sizeof a2);
        std::memcpy(out + x0 + 48, &a3, sizeof a3);
    }
    for (; x0 + 16 <= len; x0 += 16) {
        v16 a = {};
        for (const SparseWeight& e : support) {
            v16 x;
            std::memcpy(&x, rows + static_cast<std::size_t>(e.col) * stride + x0, sizeof x);
            a += e.w * x;
        }
        std::memcpy(out + x0, &a, sizeof a);
    }
    for (; x0 < len; ++x0) {
        float a = 0.0f;
        for (const SparseWeight& e : support) a += e.w * rows[static_cast<std::size_t>(e.col) * stride + x0];
        out[x0] = a;
    }
}

void mix_rows(std::span<const float> weights, std::span<const float> values, int n, long dim, std::span<float> out) {
    // Rows are classified once: exact one-hots become copies, zero rows
    // become fills, everything else keeps its sparse support in column order.
    std::vector<std::vector<SparseWeight>> support(static_cast<std::size_t>(n));
    std::vector<int> general;
    for (int i = 0; i < n; ++i) {
        const float* wr = weights.data() + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j)
            if (wr[j] != 0.0f) support[i].push_back({j, wr[j]});
        if (support[i].size() > 1 || (support[i].size() == 1 && support[i][0].w != 1.0f)) general.push_back(i);
    }

#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        float* o = out.data() + static_cast<std::size_t>(i) * dim;
        if (support[i].empty())
            std::fill(o, o + dim, 0.0f);
        else if (support[i].size() == 1 && support[i][0].w == 1.0f)
            std::memcpy(o, values.data() + static_cast<std::size_t>(support[i][0].col) * dim, sizeof(float) * dim);
    }

    // Chunk the feature axis so the value slices of every source row stay
    // cache resident while all general rows accumulate from them.
    constexpr long kChunk = 256;
    const long chunks = (dim + kChunk - 1) / kChunk;
#pragma omp parallel
    {
        const FlushDenormals ftz;
#pragma omp for schedule(static)
        for (long ch = 0; ch < chunks; ++ch) {
            const long d0 = ch * kChunk;
            const long len = std::min(kChunk, dim - d0);
            for (int i : general)
                weighted_row_sum(support[i], values.data() + d0, static_cast<std::size_t>(dim), len,
                                 out.data() + static_cast<std::size_t>(i) * dim + d0);
        }
    }
}

}  // namespace rethined::kernels::parallel
