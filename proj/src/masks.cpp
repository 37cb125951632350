#include "rethined/masks.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "rethined/error.hpp"
#include "rethined/rng.hpp"

namespace rethined {

namespace {

// Stamps a capsule (segment swept by a disc) and returns the number of newly set pixels.
long stamp_segment(Tensor& mask, double x0, double y0, double x1, double y1, double radius) {
    const int h = mask.dim(1), w = mask.dim(2);
    const int bx0 = std::max(0, static_cast<int>(std::floor(std::min(x0, x1) - radius)));
    const int bx1 = std::min(w - 1, static_cast<int>(std::ceil(std::max(x0, x1) + radius)));
    const int by0 = std::max(0, static_cast<int>(std::floor(std::min(y0, y1) - radius)));
    const int by1 = std::min(h - 1, static_cast<int>(std::ceil(std::max(y0, y1) + radius)));
    const double dx = x1 - x0, dy = y1 - y0;
    const double len2 = dx * dx + dy * dy;
    const double r2 = radius * radius;
    long added = 0;
    for (int y = by0; y <= by1; ++y)
        for (int x = bx0; x <= bx1; ++x) {
            double t = len2 > 0 ? ((x - x0) * dx + (y - y0) * dy) / len2 : 0.0;
            t = std::clamp(t, 0.0, 1.0);
            const double ex = x0 + t * dx - x, ey = y0 + t * dy - y;
            if (ex * ex + ey * ey <= r2) {
                float& v = mask.at(0, y, x);
                if (v == 0.0f) {
                    v = 1.0f;
                    ++added;
                }
            }
        }
    return added;
}

enum class Attempt { kInBand, kOvershoot, kExhausted };

Attempt draw_attempt(const MaskSpec& spec, Rng& rng, Tensor& mask) {
    const int h = mask.dim(1), w = mask.dim(2);
    const double scale = std::min(h, w) / 256.0;
    const double total = static_cast<double>(h) * w;
    long covered = 0;
    int strokes = 0;
    while (strokes < spec.max_strokes) {
        const int round = rng.uniform_int(spec.num_strokes.lo, spec.num_strokes.hi);
        for (int s = 0; s < round && strokes < spec.max_strokes; ++s, ++strokes) {
            double x = rng.uniform(0, w - 1), y = rng.uniform(0, h - 1);
            double angle = rng.uniform(0, 2 * std::numbers::pi);
            const double radius = rng.uniform_int(spec.brush_radius.lo, spec.brush_radius.hi) * scale;
            const int segments = rng.uniform_int(spec.walk_length.lo, spec.walk_length.hi);
            for (int k = 0; k < segments; ++k) {
                angle += rng.uniform(-spec.angle_jitter, spec.angle_jitter);
                const double len = rng.uniform_int(spec.segment_length.lo, spec.segment_length.hi) * scale;
                const double nx = std::clamp(x + len * std::cos(angle), 0.0, w - 1.0);
                const double ny = std::clamp(y + len * std::sin(angle), 0.0, h - 1.0);
                covered += stamp_segment(mask, x, y, nx, ny, radius);
                x = nx;
                y = ny;
                const double cov = covered / total;
                if (cov >= spec.min_coverage) return cov <= spec.max_coverage ? Attempt::kInBand : Attempt::kOvershoot;
            }
        }
    }
    return Attempt::kExhausted;
}

}  // namespace

Tensor generate_mask(const MaskSpec& spec, int height, int width) {
    if (height < 64 || width < 64) throw DomainError("generate_mask: image must be at least 64x64");
    if (!(spec.min_coverage >= 0.0 && spec.min_coverage <= spec.max_coverage && spec.max_coverage <= 1.0))
        throw DomainError("generate_mask: invalid coverage band");
    for (int attempt = 0; attempt < spec.max_retries; ++attempt) {
        Rng rng(spec.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(attempt) * 0xD1B54A32D192ED03ULL + 1);
        Tensor mask({1, height, width});
        if (draw_attempt(spec, rng, mask) == Attempt::kInBand) return mask;
    }
    throw DomainError("generate_mask: coverage band not reached within " + std::to_string(spec.max_retries) +
                      " attempts");
}

double mask_coverage(const Tensor& mask) {
    double s = 0.0;
    for (float v : mask.data()) s += v;
    return s / static_cast<double>(mask.size());
}

}  // namespace rethined
