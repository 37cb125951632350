#pragma once

#include <cstddef>
#include <span>

// Hot inner loops of the pipeline. Every kernel exists twice with identical
// signatures: `serial` is the plain loop nest kept as the reference, `parallel`
// is the OpenMP/cache-blocked version the library calls. Parallel versions only
// split work over independent outputs, so results are deterministic for a fixed
// thread count and match `serial` up to float reassociation.

namespace rethined::kernels {

struct ConvGeometry {
    int in_channels = 0;
    int height = 0;
    int width = 0;
    int out_channels = 0;
    int kernel = 1;
    int stride = 1;
    int padding = 0;
    int groups = 1;

    int out_height() const { return (height + 2 * padding - kernel) / stride + 1; }
    int out_width() const { return (width + 2 * padding - kernel) / stride + 1; }
};

// One nonzero entry of a sparse weight row.
struct SparseWeight {
    int col;
    float w;
};

// Sets flush-to-zero and denormals-are-zero for the calling thread and
// restores the previous mode on destruction. Attention rows carry weights
// near FLT_MIN whose products would otherwise take the slow subnormal path.
class FlushDenormals {
public:
    FlushDenormals();
    ~FlushDenormals();
    FlushDenormals(const FlushDenormals&) = delete;
    FlushDenormals& operator=(const FlushDenormals&) = delete;

private:
    unsigned saved_ = 0;
};

// Half-kernel of a symmetric 1-D filter: taps[0] is the center weight and
// taps[k] the weight at offset +-k.
using SymmetricTaps = std::span<const float>;

namespace serial {
// Zero-padded grouped cross-correlation. bias may be empty.
void conv2d(std::span<const float> input, std::span<const float> weights, std::span<const float> bias,
            const ConvGeometry& g, std::span<float> out);
// Separable symmetric filter with reflect borders over `planes` images of height x width.
void separable_blur(std::span<const float> input, int planes, int height, int width, SymmetricTaps taps,
                    std::span<float> out);
// out[m,n] = a[m,k] * b[k,n]
void matmul(std::span<const float> a, std::span<const float> b, int m, int k, int n, std::span<float> out);
// out[m,n] = scale * a[m,k] * b[n,k]^T
void matmul_bt(std::span<const float> a, std::span<const float> b, int m, int k, int n, float scale,
               std::span<float> out);
void softmax_rows(std::span<const float> input, int rows, int cols, std::span<float> out);
// out[i,:] = sum_j weights[i,j] * values[j,:] for an n x n weight matrix.
void mix_rows(std::span<const float> weights, std::span<const float> values, int n, long dim,
              std::span<float> out);
}  // namespace serial

namespace parallel {
// Zero-padded grouped cross-correlation. bias may be empty.
void conv2d(std::span<const float> input, std::span<const float> weights, std::span<const float> bias,
            const ConvGeometry& g, std::span<float> out);
// Separable symmetric filter with reflect borders over `planes` images of height x width.
void separable_blur(std::span<const float> input, int planes, int height, int width, SymmetricTaps taps,
                    std::span<float> out);
// out[m,n] = a[m,k] * b[k,n]
void matmul(std::span<const float> a, std::span<const float> b, int m, int k, int n, std::span<float> out);
// out[m,n] = scale * a[m,k] * b[n,k]^T
void matmul_bt(std::span<const float> a, std::span<const float> b, int m, int k, int n, float scale,
               std::span<float> out);
void softmax_rows(std::span<const float> input, int rows, int cols, std::span<float> out);
// out[i,:] = sum_j weights[i,j] * values[j,:] for an n x n weight matrix.
void mix_rows(std::span<const float> weights, std::span<const float> values, int n, long dim,
              std::span<float> out);
// out[0,len) = sum over support (in order) of w * rows[col * stride + x], starting from 0.
void weighted_row_sum(std::span<const SparseWeight> support, const float* rows, std::size_t stride, long len,
                      float* out);
}  // namespace parallel

// Reflect-101 index into [0, n): -1 -> 1, n -> n-2. Folds repeatedly for
// offsets larger than the extent.
inline int reflect_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

}  // namespace rethined::kernels
