#include "rethined/neural_patch_match.hpp"

#include <array>
#include <chrono>
#include <cmath>

#include "rethined/error.hpp"
#include "rethined/kernels.hpp"
#include "rethined/ops.hpp"
#include "rethined/rng.hpp"

namespace rethined {

AttentionMap AttentionMap::identity(int rows, int cols) {
    const int n = rows * cols;
    AttentionMap m;
    m.a = Tensor({n, n});
    for (int i = 0; i < n; ++i) m.a.at(i, i) = 1.0f;
    m.masked = true;
    m.rows = rows;
    m.cols = cols;
    return m;
}

int PatchMatchWeights::patch_size() const {
    const int p = static_cast<int>(std::lround(std::sqrt(embedding.dim(0) / 3.0)));
    if (3 * p * p != embedding.dim(0)) throw ShapeError("embedding rows must equal 3 * P^2");
    return p;
}

PatchMatchWeights make_patch_match_weights(int patch, int embed_dim, int feature_dim, std::uint64_t seed) {
    if (patch < 1 || embed_dim < 1 || feature_dim < 0) throw DomainError("invalid patch-match dimensions");
    Rng rng(seed);
    auto init = [&](std::vector<int> shape, int fan_in) {
        Tensor t(std::move(shape));
        const double bound = std::sqrt(6.0 / fan_in);
        for (float& v : t.data()) v = static_cast<float>(rng.uniform(-bound, bound));
        return t;
    };
    const int d_in = 3 * patch * patch;
    const int width = embed_dim + feature_dim;
    PatchMatchWeights w;
    w.embedding = init({d_in, embed_dim}, d_in);
    w.projection.query = init({width, embed_dim}, width);
    w.projection.key = init({width, embed_dim}, width);
    return w;
}

AttentionMap attention_scores(const TokenMatrix& tokens, const ProjectionWeights& w, int grid_rows, int grid_cols) {
    const Tensor& x = tokens.x;
    if (x.rank() != 2) throw ShapeError("attention_scores: tokens must be a matrix");
    const int n = x.dim(0), width = x.dim(1);
    if (grid_rows * grid_cols != n) throw ShapeError("attention_scores: grid does not match token count");
    if (w.query.rank() != 2 || w.key.rank() != 2 || w.query.dim(0) != width || w.key.dim(0) != width ||
        w.query.dim(1) != w.key.dim(1))
        throw ShapeError("attention_scores: projections " + shape_string(w.query.shape()) + "/" +
                         shape_string(w.key.shape()) + " do not accept token width " + std::to_string(width));
    for (float v : x.data())
        if (std::isnan(v)) throw DomainError("attention_scores: NaN token");
    const int dk = w.query.dim(1);

    Tensor q({n, dk}), k({n, dk});
    kernels::parallel::matmul(x.data(), w.query.data(), n, width, dk, q.data());
    kernels::parallel::matmul(x.data(), w.key.data(), n, width, dk, k.data());
    Tensor logits({n, n});
    kernels::parallel::matmul_bt(q.data(), k.data(), n, dk, n, static_cast<float>(1.0 / std::sqrt(dk)), logits.data());

    AttentionMap out;
    out.a = softmax_rows(logits);
    out.rows = grid_rows;
    out.cols = grid_cols;
    return out;
}

AttentionMap mask_attention(const AttentionMap& a, const MaskVector& m) {
    if (a.masked) throw StateError("mask_attention: attention map is already masked");
    const int n = a.count();
    if (m.count() != n) throw ShapeError("mask_attention: mask has " + std::to_string(m.count()) + " patches, map has " +
                                         std::to_string(n));
    if (m.corrupted() == n) throw DomainError("mask_attention: every patch is corrupted, nothing to attend to");

    AttentionMap out;
    out.a = Tensor({n, n});
    out.masked = true;
    out.rows = a.rows;
    out.cols = a.cols;
    const int known = n - m.corrupted();
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        auto dst = out.a.row(i);
        if (!m.flags[i]) {
            dst[i] = 1.0f;
            continue;
        }
        const auto src = a.a.row(i);
        double sum = 0.0;
        for (int j = 0; j < n; ++j)
            if (!m.flags[j]) sum += src[j];
        if (sum > 0.0) {
            for (int j = 0; j < n; ++j)
                if (!m.flags[j]) dst[j] = static_cast<float>(src[j] / sum);
        } else {
            // all surviving mass underflowed; spread evenly over known patches
            for (int j = 0; j < n; ++j)
                if (!m.flags[j]) dst[j] = 1.0f / known;
        }
    }
    return out;
}

PatchSequence token_mix(const AttentionMap& mt, const PatchSequence& values) {
    const int n = mt.count();
    if (mt.a.rank() != 2 || mt.a.dim(1) != n) throw ShapeError("token_mix: attention map must be square");
    if (values.count() != n || values.patches.dim(0) != n)
        throw ShapeError("token_mix: " + std::to_string(values.count()) + " value patches for a map over " +
                         std::to_string(n));
    PatchSequence out = values;
    kernels::parallel::mix_rows(mt.a.data(), values.patches.data(), n, values.patches.dim(1), out.patches.data());
    return out;
}

namespace {

// 3x3 Gaussian, sigma 0.8, normalized.
std::array<float, 3> coherence_taps() {
    const double s = 0.8;
    const double w1 = std::exp(-1.0 / (2 * s * s));
    const double total = 1.0 + 2.0 * w1;
    return {static_cast<float>(1.0 / total), static_cast<float>(w1 / total), 0.0f};
}

}  // namespace

Tensor coherence(const Tensor& image, const MaskVector& m, int patch) {
    require_chw(image, "coherence");
    const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
    if (patch < 1 || h % patch != 0 || w % patch != 0) throw ShapeError("coherence: extents not divisible by patch");
    if (m.rows != h / patch || m.cols != w / patch) throw ShapeError("coherence: mask grid does not match image");

    Tensor out = image;
    if (m.corrupted() == 0) return out;

    constexpr int kBand = 2;
    std::vector<std::uint8_t> band(static_cast<std::size_t>(h) * w, 0);
    for (int y = 0; y < h; ++y) {
        const int r0 = std::max(0, y - kBand) / patch, r1 = std::min(h - 1, y + kBand) / patch;
        for (int x = 0; x < w; ++x) {
            const int c0 = std::max(0, x - kBand) / patch, c1 = std::min(w - 1, x + kBand) / patch;
            if (r0 == r1 && c0 == c1) continue;  // neighbourhood stays inside one patch
            bool touches_corrupted = false;
            for (int r = r0; r <= r1 && !touches_corrupted; ++r)
                for (int cc = c0; cc <= c1; ++cc)
                    if (m.flags[static_cast<std::size_t>(r) * m.cols + cc]) {
                        touches_corrupted = true;
                        break;
                    }
            band[static_cast<std::size_t>(y) * w + x] = touches_corrupted;
        }
    }

    const auto t = coherence_taps();
    const float wk[3] = {t[1], t[0], t[1]};
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                if (!band[static_cast<std::size_t>(y) * w + x]) continue;
                const float centre = image.at(ch, y, x);
                float acc = 0.0f;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (dy == 0 && dx == 0) continue;
                        const float v = image.at(ch, kernels::reflect_index(y + dy, h), kernels::reflect_index(x + dx, w));
                        acc += wk[dy + 1] * wk[dx + 1] * (v - centre);
                    }
                out.at(ch, y, x) = centre + acc;
            }
    return out;
}

RefineResult npm_refine(const Tensor& coarse, const Tensor& x_lr, const Tensor& features,
                        const PatchMatchWeights& weights, const Tensor& mask_lr, int patch, RefineTimings* timings) {
    require_chw(coarse, "npm_refine coarse", 3);
    require_same_shape(coarse, x_lr, "npm_refine");
    if (weights.patch_size() != patch)
        throw ShapeError("npm_refine: weights were built for patch " + std::to_string(weights.patch_size()) +
                         ", pipeline uses " + std::to_string(patch));

    using clock = std::chrono::steady_clock;
    auto lap = [t0 = clock::now()](double* slot) mutable {
        const auto now = clock::now();
        if (slot) *slot = std::chrono::duration<double, std::milli>(now - t0).count();
        t0 = now;
    };
    RefineTimings local;
    RefineTimings& t = timings ? *timings : local;

    const PatchSequence coarse_seq = img2col(coarse, patch);
    const TokenMatrix tokens = embed_and_condition(coarse_seq, features, weights.embedding);
    lap(&t.tokenize);
    const AttentionMap a = attention_scores(tokens, weights.projection, coarse_seq.rows, coarse_seq.cols);
    lap(&t.attention);

    RefineResult r;
    r.mask = tokenize_mask(mask_lr, patch);
    r.mt = mask_attention(a, r.mask);
    lap(&t.masking);

    PatchSequence values = img2col(x_lr, patch);
    for (int i = 0; i < values.count(); ++i)
        if (r.mask.flags[i]) {
            const auto src = coarse_seq.patches.row(i);
            std::copy(src.begin(), src.end(), values.patches.row(i).begin());
        }
    r.image = coherence(pixel_shuffle(token_mix(r.mt, values)), r.mask, patch);
    lap(&t.mixing);
    return r;
}

AttentionFlops attention_flops(long n, long embed_dim, long feature_dim) {
    AttentionFlops f;
    f.projection = 2.0 * 2.0 * static_cast<double>(n) * (embed_dim + feature_dim) * embed_dim;
    f.scores = 2.0 * static_cast<double>(n) * n * embed_dim;
    return f;
}

}  // namespace rethined
