#include "rethined/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "rethined/error.hpp"

namespace rethined {

ComplexGrid::ComplexGrid(int h, int w)
    : height(h), width(w), re(static_cast<std::size_t>(h) * w, 0.0), im(static_cast<std::size_t>(h) * w, 0.0) {
    if (!is_power_of_two(h) || !is_power_of_two(w))
        throw DomainError("ComplexGrid extents must be powers of two, got " + std::to_string(h) + "x" +
                          std::to_string(w));
}

double ComplexGrid::magnitude(int u, int v) const {
    const std::size_t i = static_cast<std::size_t>(u) * width + v;
    return std::hypot(re[i], im[i]);
}

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

int next_power_of_two(int n) {
    int p = 1;
    while (p < n) p <<= 1;
    return p;
}

void fft1d(std::span<double> re, std::span<double> im, bool inverse) {
    const std::size_t n = re.size();
    if (!is_power_of_two(static_cast<int>(n))) throw DomainError("fft length must be a power of two");
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) {
            std::swap(re[i], re[j]);
            std::swap(im[i], im[j]);
        }
    }
    const double sign = inverse ? 1.0 : -1.0;
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t half = len / 2;
        for (std::size_t k = 0; k < half; ++k) {
            const double ang = sign * 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(len);
            const double wr = std::cos(ang), wi = std::sin(ang);
            for (std::size_t start = 0; start < n; start += len) {
                const std::size_t a = start + k, b = a + half;
                const double tr = re[b] * wr - im[b] * wi;
                const double ti = re[b] * wi + im[b] * wr;
                re[b] = re[a] - tr;
                im[b] = im[a] - ti;
                re[a] += tr;
                im[a] += ti;
            }
        }
    }
}

namespace {

void transform2d(ComplexGrid& g, bool inverse) {
    const int h = g.height, w = g.width;
    for (int y = 0; y < h; ++y)
        fft1d(std::span(g.re).subspan(static_cast<std::size_t>(y) * w, w),
              std::span(g.im).subspan(static_cast<std::size_t>(y) * w, w), inverse);
    std::vector<double> cr(h), ci(h);
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) {
            cr[y] = g.re[static_cast<std::size_t>(y) * w + x];
            ci[y] = g.im[static_cast<std::size_t>(y) * w + x];
        }
        fft1d(cr, ci, inverse);
        for (int y = 0; y < h; ++y) {
            g.re[static_cast<std::size_t>(y) * w + x] = cr[y];
            g.im[static_cast<std::size_t>(y) * w + x] = ci[y];
        }
    }
}

ComplexGrid channel_spectrum(const Tensor& t, int c) {
    ComplexGrid g(t.dim(1), t.dim(2));
    const auto plane = t.channel(c);
    std::copy(plane.begin(), plane.end(), g.re.begin());
    transform2d(g, false);
    return g;
}

}  // namespace

ComplexGrid fft2d(const Tensor& input) {
    if (input.rank() != 3 || input.dim(0) != 1)
        throw ShapeError("fft2d expects a [1,H,W] tensor, got " + shape_string(input.shape()));
    if (!is_power_of_two(input.dim(1)) || !is_power_of_two(input.dim(2)))
        throw DomainError("fft2d: extents must be powers of two, got " + shape_string(input.shape()));
    return channel_spectrum(input, 0);
}

Tensor ifft2d(const ComplexGrid& input) {
    if (!is_power_of_two(input.height) || !is_power_of_two(input.width))
        throw DomainError("ifft2d: extents must be powers of two");
    if (input.re.size() != static_cast<std::size_t>(input.height) * input.width || input.im.size() != input.re.size())
        throw ShapeError("ifft2d: spectrum planes do not match extents");
    ComplexGrid g = input;
    transform2d(g, true);
    const double scale = 1.0 / (static_cast<double>(g.height) * g.width);
    Tensor out({1, g.height, g.width});
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(g.re[i] * scale);
    return out;
}

double focal_frequency_term(const ComplexGrid& a, const ComplexGrid& b, double alpha) {
    if (a.height != b.height || a.width != b.width) throw ShapeError("focal_frequency_term: spectrum size mismatch");
    const std::size_t n = a.re.size();
    std::vector<double> d(n);
    double dmax = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        d[i] = std::hypot(a.re[i] - b.re[i], a.im[i] - b.im[i]);
        dmax = std::max(dmax, d[i]);
    }
    if (dmax == 0.0) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = alpha == 0.0 ? 1.0 : std::pow(d[i] / dmax, alpha);
        total += w * d[i] * d[i];
    }
    return total / static_cast<double>(n);
}

double focal_frequency_loss(const Tensor& pred, const Tensor& target, double alpha) {
    require_chw(pred, "focal_frequency_loss");
    require_same_shape(pred, target, "focal_frequency_loss");
    if (!is_power_of_two(pred.dim(1)) || !is_power_of_two(pred.dim(2)))
        throw DomainError("focal_frequency_loss: extents must be powers of two, got " + shape_string(pred.shape()));
    double total = 0.0;
    for (int c = 0; c < pred.dim(0); ++c)
        total += focal_frequency_term(channel_spectrum(pred, c), channel_spectrum(target, c), alpha);
    return total / pred.dim(0);
}

PaddedFflResult focal_frequency_loss_padded(const Tensor& pred, const Tensor& target, double alpha) {
    require_chw(pred, "focal_frequency_loss_padded");
    require_same_shape(pred, target, "focal_frequency_loss_padded");
    const int c = pred.dim(0), h = pred.dim(1), w = pred.dim(2);
    PaddedFflResult r;
    r.padded_height = next_power_of_two(h);
    r.padded_width = next_power_of_two(w);
    r.offset_y = (r.padded_height - h) / 2;
    r.offset_x = (r.padded_width - w) / 2;
    auto pad = [&](const Tensor& t) {
        Tensor out({c, r.padded_height, r.padded_width});
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) out.at(ch, y + r.offset_y, x + r.offset_x) = t.at(ch, y, x);
        return out;
    };
    r.loss = focal_frequency_loss(pad(pred), pad(target), alpha);
    return r;
}

double l2_loss(const Tensor& pred, const Tensor& target) {
    require_same_shape(pred, target, "l2_loss");
    double total = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = static_cast<double>(pred[i]) - target[i];
        total += d * d;
    }
    return total / static_cast<double>(pred.size());
}

}  // namespace rethined
