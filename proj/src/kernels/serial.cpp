#include <algorithm>
#include <cmath>
#include <vector>

#include "rethined/kernels.hpp"

namespace rethined::kernels::serial {

void conv2d(std::span<const float> input, std::span<const float> weights, std::span<const float> bias,
            const ConvGeometry& g, std::span<float> out) {
    const int ho = g.out_height();
    const int wo = g.out_width();
    const int cin_g = g.in_channels / g.groups;
    const int cout_g = g.out_channels / g.groups;
    const int s = g.kernel;
    for (int oc = 0; oc < g.out_channels; ++oc) {
        const int grp = oc / cout_g;
        for (int oy = 0; oy < ho; ++oy) {
            for (int ox = 0; ox < wo; ++ox) {
                float acc = bias.empty() ? 0.0f : bias[oc];
                for (int ic = 0; ic < cin_g; ++ic) {
                    const int c = grp * cin_g + ic;
                    for (int ky = 0; ky < s; ++ky) {
                        const int iy = oy * g.stride - g.padding + ky;
                        if (iy < 0 || iy >= g.height) continue;
                        for (int kx = 0; kx < s; ++kx) {
                            const int ix = ox * g.stride - g.padding + kx;
                            if (ix < 0 || ix >= g.width) continue;
                            const float w = weights[((static_cast<std::size_t>(oc) * cin_g + ic) * s + ky) * s + kx];
                            acc += w * input[(static_cast<std::size_t>(c) * g.height + iy) * g.width + ix];
                        }
                    }
                }
                out[(static_cast<std::size_t>(oc) * ho + oy) * wo + ox] = acc;
            }
        }
    }
}

void separable_blur(std::span<const float> input, int planes, int height, int width, SymmetricTaps taps,
                    std::span<float> out) {
    const int radius = static_cast<int>(taps.size()) - 1;
    const std::size_t plane = static_cast<std::size_t>(height) * width;
    std::vector<float> tmp(plane);
    for (int p = 0; p < planes; ++p) {
        const float* src = input.data() + p * plane;
        float* dst = out.data() + p * plane;
        for (int y = 0; y < height; ++y) {
            const float* row = src + static_cast<std::size_t>(y) * width;
            for (int x = 0; x < width; ++x) {
                const float c = row[x];
                float acc = 0.0f;
                for (int k = 1; k <= radius; ++k)
                    acc += taps[k] * ((row[reflect_index(x - k, width)] - c) + (row[reflect_index(x + k, width)] - c));
                tmp[static_cast<std::size_t>(y) * width + x] = c + acc;
            }
        }
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                const float c = tmp[static_cast<std::size_t>(y) * width + x];
                float acc = 0.0f;
                for (int k = 1; k <= radius; ++k)
                    acc += taps[k] * ((tmp[static_cast<std::size_t>(reflect_index(y - k, height)) * width + x] - c) +
                                      (tmp[static_cast<std::size_t>(reflect_index(y + k, height)) * width + x] - c));
                dst[static_cast<std::size_t>(y) * width + x] = c + acc;
            }
        }
    }
}

void matmul(std::span<const float> a, std::span<const float> b, int m, int k, int n, std::span<float> out) {
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            float acc = 0.0f;
            for (int t = 0; t < k; ++t) acc += a[static_cast<std::size_t>(i) * k + t] * b[static_cast<std::size_t>(t) * n + j];
            out[static_cast<std::size_t>(i) * n + j] = acc;
        }
}

void matmul_bt(std::span<const float> a, std::span<const float> b, int m, int k, int n, float scale,
               std::span<float> out) {
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            float acc = 0.0f;
            for (int t = 0; t < k; ++t) acc += a[static_cast<std::size_t>(i) * k + t] * b[static_cast<std::size_t>(j) * k + t];
            out[static_cast<std::size_t>(i) * n + j] = scale * acc;
        }
}

void softmax_rows(std::span<const float> input, int rows, int cols, std::span<float> out) {
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

void mix_rows(std::span<const float> weights, std::span<const float> values, int n, long dim, std::span<float> out) {
    for (int i = 0; i < n; ++i)
        for (long d = 0; d < dim; ++d) {
            float acc = 0.0f;
            for (int j = 0; j < n; ++j)
                acc += weights[static_cast<std::size_t>(i) * n + j] * values[static_cast<std::size_t>(j) * dim + d];
            out[static_cast<std::size_t>(i) * dim + d] = acc;
        }
}

}  // namespace rethined::kernels::serial
