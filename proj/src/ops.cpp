#include "rethined/ops.hpp"

#include <algorithm>
#include <cmath>

#include "rethined/error.hpp"
#include "rethined/kernels.hpp"

namespace rethined {

BatchNormParams BatchNormParams::identity(int channels) {
    return {Tensor::zeros({channels}), Tensor::full({channels}, 1.0f), Tensor::full({channels}, 1.0f),
            Tensor::zeros({channels})};
}

void validate(const ConvSpec& spec) {
    const Tensor& w = spec.weights;
    if (w.rank() != 4) throw ShapeError("conv weights must be [C_out, C_in/groups, S, S], got " + shape_string(w.shape()));
    if (w.dim(2) != w.dim(3)) throw ShapeError("conv kernel must be square, got " + shape_string(w.shape()));
    if (spec.stride < 1 || spec.padding < 0 || spec.groups < 1)
        throw DomainError("conv stride/groups must be positive and padding non-negative");
    if (w.dim(0) % spec.groups != 0) throw ShapeError("C_out not divisible by groups");
    const int s = w.dim(2);
    if (s % 2 == 0 && spec.stride != s) throw ShapeError("even kernel size requires stride == kernel size");
    if (spec.bias && (spec.bias->rank() != 1 || spec.bias->dim(0) != w.dim(0)))
        throw ShapeError("conv bias must be [C_out]");
}

void validate(const BatchNormParams& bn) {
    const int c = bn.mu.dim(0);
    for (const Tensor* t : {&bn.mu, &bn.sigma, &bn.gamma, &bn.beta})
        if (t->rank() != 1 || t->dim(0) != c) throw ShapeError("batchnorm parameters must all be [C]");
    for (float s : bn.sigma.data())
        if (!(s > 0.0f)) throw DomainError("batchnorm sigma must be strictly positive");
}

Tensor conv2d(const Tensor& input, const ConvSpec& spec) {
    validate(spec);
    require_chw(input, "conv2d");
    const int cin = input.dim(0);
    if (cin != spec.in_channels())
        throw ShapeError("conv2d: input has " + std::to_string(cin) + " channels, spec expects " +
                         std::to_string(spec.in_channels()));
    kernels::ConvGeometry g{cin, input.dim(1), input.dim(2), spec.out_channels(), spec.kernel(), spec.stride,
                            spec.padding, spec.groups};
    const int span_h = g.height + 2 * g.padding - g.kernel;
    const int span_w = g.width + 2 * g.padding - g.kernel;
    if (span_h < 0 || span_w < 0)
        throw ShapeError("conv2d: kernel larger than padded input " + shape_string(input.shape()));
    // Floor semantics, but a remainder that reaches past the padding would
    // silently drop real pixels, so that case is a non-integral extent.
    if (span_h % g.stride > g.padding || span_w % g.stride > g.padding)
        throw ShapeError("conv2d: output extent is not integral for input " + shape_string(input.shape()));
    Tensor out({g.out_channels, g.out_height(), g.out_width()});
    std::span<const float> bias;
    if (spec.bias) bias = spec.bias->data();
    kernels::parallel::conv2d(input.data(), spec.weights.data(), bias, g, out.data());
    return out;
}

Tensor batchnorm(const Tensor& input, const BatchNormParams& p) {
    validate(p);
    require_chw(input, "batchnorm");
    if (input.dim(0) != p.channels()) throw ShapeError("batchnorm: channel count mismatch");
    Tensor out(input.shape());
    const std::size_t plane = static_cast<std::size_t>(input.dim(1)) * input.dim(2);
    for (int c = 0; c < p.channels(); ++c) {
        const float mu = p.mu[c], sigma = p.sigma[c], gamma = p.gamma[c], beta = p.beta[c];
        const float* src = input.data().data() + c * plane;
        float* dst = out.data().data() + c * plane;
#pragma omp parallel for simd schedule(static)
        for (std::size_t i = 0; i < plane; ++i) dst[i] = gamma * (src[i] - mu) / sigma + beta;
    }
    return out;
}

Tensor relu(const Tensor& input) {
    Tensor out(input.shape());
    const float* src = input.data().data();
    float* dst = out.data().data();
    const std::size_t n = input.size();
#pragma omp parallel for simd schedule(static)
    for (std::size_t i = 0; i < n; ++i) dst[i] = std::max(0.0f, src[i]);
    return out;
}

Tensor softmax_rows(const Tensor& input) {
    if (input.rank() != 2) throw ShapeError("softmax_rows expects a matrix, got " + shape_string(input.shape()));
    for (float v : input.data())
        if (std::isnan(v)) throw DomainError("softmax_rows: NaN input");
    Tensor out(input.shape());
    kernels::parallel::softmax_rows(input.data(), input.dim(0), input.dim(1), out.data());
    return out;
}

Tensor bilinear_resize(const Tensor& input, int out_h, int out_w) {
    require_chw(input, "bilinear_resize");
    if (out_h < 1 || out_w < 1) throw DomainError("bilinear_resize: output size must be >= 1");
    const int c = input.dim(0), h = input.dim(1), w = input.dim(2);
    if (out_h == h && out_w == w) return input;

    struct Tap {
        int i0, i1;
        float f;
    };
    auto taps = [](int in, int out) {
        std::vector<Tap> t(static_cast<std::size_t>(out));
        const double scale = static_cast<double>(in) / out;
        for (int o = 0; o < out; ++o) {
            double src = (o + 0.5) * scale - 0.5;
            if (src < 0) src = 0;
            int i0 = static_cast<int>(std::floor(src));
            if (i0 > in - 1) i0 = in - 1;
            const int i1 = std::min(i0 + 1, in - 1);
            t[o] = {i0, i1, static_cast<float>(src - i0)};
        }
        return t;
    };
    const auto ty = taps(h, out_h);
    const auto tx = taps(w, out_w);

    Tensor out({c, out_h, out_w});
    const long rows = static_cast<long>(c) * out_h;
#pragma omp parallel for schedule(static)
    for (long r = 0; r < rows; ++r) {
        const int ch = static_cast<int>(r / out_h);
        const int oy = static_cast<int>(r % out_h);
        const Tap& yt = ty[oy];
        const float* r0 = input.data().data() + (static_cast<std::size_t>(ch) * h + yt.i0) * w;
        const float* r1 = input.data().data() + (static_cast<std::size_t>(ch) * h + yt.i1) * w;
        float* dst = out.data().data() + static_cast<std::size_t>(r) * out_w;
        for (int ox = 0; ox < out_w; ++ox) {
            const Tap& xt = tx[ox];
            const float top = r0[xt.i0] + xt.f * (r0[xt.i1] - r0[xt.i0]);
            const float bot = r1[xt.i0] + xt.f * (r1[xt.i1] - r1[xt.i0]);
            dst[ox] = top + yt.f * (bot - top);
        }
    }
    return out;
}

Tensor upsample_nearest(const Tensor& input, int factor) {
    require_chw(input, "upsample_nearest");
    if (factor < 1) throw DomainError("upsample factor must be >= 1");
    const int c = input.dim(0), h = input.dim(1), w = input.dim(2);
    Tensor out({c, h * factor, w * factor});
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h * factor; ++y)
            for (int x = 0; x < w * factor; ++x) out.at(ch, y, x) = input.at(ch, y / factor, x / factor);
    return out;
}

std::vector<float> gaussian_taps(double sigma) {
    if (!(sigma > 0.0)) throw DomainError("gaussian sigma must be positive");
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> w(static_cast<std::size_t>(radius) + 1);
    double total = 0.0;
    for (int k = 0; k <= radius; ++k) {
        w[k] = std::exp(-(static_cast<double>(k) * k) / (2.0 * sigma * sigma));
        total += k == 0 ? w[k] : 2.0 * w[k];
    }
    std::vector<float> taps(w.size());
    for (std::size_t k = 0; k < w.size(); ++k) taps[k] = static_cast<float>(w[k] / total);
    return taps;
}

Tensor gaussian_kernel(double sigma) {
    const auto taps = gaussian_taps(sigma);
    const int radius = static_cast<int>(taps.size()) - 1;
    const int k = 2 * radius + 1;
    // outer product in double, renormalized so the 2-D entries sum to 1
    std::vector<double> full(static_cast<std::size_t>(k) * k);
    double total = 0.0;
    for (int y = 0; y < k; ++y)
        for (int x = 0; x < k; ++x) {
            const double v = static_cast<double>(taps[std::abs(y - radius)]) * taps[std::abs(x - radius)];
            full[static_cast<std::size_t>(y) * k + x] = v;
            total += v;
        }
    Tensor out({1, 1, k, k});
    for (std::size_t i = 0; i < full.size(); ++i) out[i] = static_cast<float>(full[i] / total);
    return out;
}

Tensor gaussian_blur(const Tensor& input, double sigma) {
    require_chw(input, "gaussian_blur");
    const auto taps = gaussian_taps(sigma);
    Tensor out(input.shape());
    kernels::parallel::separable_blur(input.data(), input.dim(0), input.dim(1), input.dim(2), taps, out.data());
    return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    require_chw(a, "concat_channels");
    require_chw(b, "concat_channels");
    if (a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2)) throw ShapeError("concat_channels: spatial mismatch");
    std::vector<float> data(a.values());
    data.insert(data.end(), b.values().begin(), b.values().end());
    return Tensor({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)}, std::move(data));
}

}  // namespace rethined
