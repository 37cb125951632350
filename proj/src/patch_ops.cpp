#include "rethined/patch_ops.hpp"

#include <algorithm>
#include <cstring>

#include "rethined/error.hpp"
#include "rethined/kernels.hpp"
#include "rethined/ops.hpp"

namespace rethined {

int MaskVector::corrupted() const {
    return static_cast<int>(std::count(flags.begin(), flags.end(), std::uint8_t{1}));
}

Tensor img2col_weights(int patch, int channels) {
    const int taps = patch * patch;
    Tensor w({channels * taps, 1, patch, patch});
    for (int c = 0; c < channels; ++c)
        for (int k = 0; k < taps; ++k) w[(static_cast<std::size_t>(c) * taps + k) * taps + k] = 1.0f;
    return w;
}

static void require_divisible(const Tensor& image, int ph, int pw, const char* what) {
    if (ph < 1 || pw < 1) throw DomainError(std::string(what) + ": patch size must be >= 1");
    if (image.dim(1) % ph != 0 || image.dim(2) % pw != 0)
        throw ShapeError(std::string(what) + ": extents " + shape_string(image.shape()) + " not divisible by patch " +
                         std::to_string(ph) + "x" + std::to_string(pw));
}

PatchSequence img2col(const Tensor& image, int patch) {
    require_chw(image, "img2col");
    require_divisible(image, patch, patch, "img2col");
    const int channels = image.dim(0);
    ConvSpec spec;
    spec.weights = img2col_weights(patch, channels);
    spec.stride = patch;
    spec.groups = channels;
    const Tensor cols = conv2d(image, spec);  // [C*P*P, H/P, W/P]

    PatchSequence seq;
    seq.rows = cols.dim(1);
    seq.cols = cols.dim(2);
    seq.patch_h = seq.patch_w = patch;
    seq.channels = channels;
    const int n = seq.count();
    const int d = cols.dim(0);
    seq.patches = Tensor({n, d});
    for (int k = 0; k < d; ++k) {
        const auto plane = cols.channel(k);
        for (int i = 0; i < n; ++i) seq.patches[static_cast<std::size_t>(i) * d + k] = plane[i];
    }
    return seq;
}

PatchSequence extract_patches(const Tensor& image, int patch_h, int patch_w) {
    require_chw(image, "extract_patches");
    require_divisible(image, patch_h, patch_w, "extract_patches");
    PatchSequence seq;
    seq.channels = image.dim(0);
    seq.rows = image.dim(1) / patch_h;
    seq.cols = image.dim(2) / patch_w;
    seq.patch_h = patch_h;
    seq.patch_w = patch_w;
    const long d = static_cast<long>(seq.channels) * patch_h * patch_w;
    seq.patches = Tensor({seq.count(), static_cast<int>(d)});
    const int n = seq.count();
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const int r = i / seq.cols, c = i % seq.cols;
        float* dst = seq.patches.data().data() + static_cast<std::size_t>(i) * d;
        for (int ch = 0; ch < seq.channels; ++ch)
            for (int y = 0; y < patch_h; ++y) {
                const float* src = image.data().data() +
                                   (static_cast<std::size_t>(ch) * image.dim(1) + r * patch_h + y) * image.dim(2) +
                                   c * patch_w;
                std::memcpy(dst, src, sizeof(float) * patch_w);
                dst += patch_w;
            }
    }
    return seq;
}

Tensor pixel_shuffle(const PatchSequence& seq) {
    const long d = static_cast<long>(seq.channels) * seq.patch_h * seq.patch_w;
    if (seq.patches.rank() != 2 || seq.patches.dim(0) != seq.count() || seq.patches.dim(1) != d)
        throw ShapeError("pixel_shuffle: patches " + shape_string(seq.patches.shape()) + " inconsistent with grid " +
                         std::to_string(seq.rows) + "x" + std::to_string(seq.cols) + " and patch " +
                         std::to_string(seq.patch_h) + "x" + std::to_string(seq.patch_w));
    Tensor out({seq.channels, seq.image_height(), seq.image_width()});
    const int n = seq.count();
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const int r = i / seq.cols, c = i % seq.cols;
        const float* src = seq.patches.data().data() + static_cast<std::size_t>(i) * d;
        for (int ch = 0; ch < seq.channels; ++ch)
            for (int y = 0; y < seq.patch_h; ++y) {
                std::memcpy(&out.at(ch, r * seq.patch_h + y, c * seq.patch_w), src, sizeof(float) * seq.patch_w);
                src += seq.patch_w;
            }
    }
    return out;
}

MaskVector tokenize_mask(const Tensor& mask, int patch) { return tokenize_mask(mask, patch, patch); }

MaskVector tokenize_mask(const Tensor& mask, int patch_h, int patch_w) {
    require_chw(mask, "tokenize_mask", 1);
    require_divisible(mask, patch_h, patch_w, "tokenize_mask");
    MaskVector m;
    m.rows = mask.dim(1) / patch_h;
    m.cols = mask.dim(2) / patch_w;
    m.flags.assign(static_cast<std::size_t>(m.rows) * m.cols, 0);
    for (int y = 0; y < mask.dim(1); ++y)
        for (int x = 0; x < mask.dim(2); ++x) {
            const float v = mask.at(0, y, x);
            if (v == 1.0f)
                m.flags[static_cast<std::size_t>(y / patch_h) * m.cols + x / patch_w] = 1;
            else if (v != 0.0f)
                throw DomainError("tokenize_mask: mask values must be 0 or 1");
        }
    return m;
}

static TokenMatrix embed_impl(const PatchSequence& seq, const Tensor* features, const Tensor& embedding) {
    const int n = seq.count();
    const int d_in = seq.patches.dim(1);
    if (embedding.rank() != 2 || embedding.dim(0) != d_in)
        throw ShapeError("embed_and_condition: embedding " + shape_string(embedding.shape()) + " does not accept patch width " +
                         std::to_string(d_in));
    const int dk = embedding.dim(1);
    int c = 0;
    if (features) {
        require_chw(*features, "embed_and_condition features");
        if (features->dim(1) != seq.rows || features->dim(2) != seq.cols)
            throw ShapeError("embed_and_condition: feature grid " + shape_string(features->shape()) +
                             " does not match patch grid " + std::to_string(seq.rows) + "x" + std::to_string(seq.cols));
        c = features->dim(0);
    }
    Tensor emb({n, dk});
    kernels::parallel::matmul(seq.patches.data(), embedding.data(), n, d_in, dk, emb.data());

    TokenMatrix t;
    t.embed_dim = dk;
    t.feature_dim = c;
    t.x = Tensor({n, dk + c});
    for (int i = 0; i < n; ++i) {
        auto row = t.x.row(i);
        const auto e = emb.row(i);
        std::copy(e.begin(), e.end(), row.begin());
        if (features) {
            const int r = i / seq.cols, col = i % seq.cols;
            for (int ch = 0; ch < c; ++ch) row[dk + ch] = features->at(ch, r, col);
        }
    }
    return t;
}

TokenMatrix embed_and_condition(const PatchSequence& seq, const Tensor& features, const Tensor& embedding) {
    return embed_impl(seq, &features, embedding);
}

TokenMatrix embed_and_condition(const PatchSequence& seq, const Tensor& embedding) {
    return embed_impl(seq, nullptr, embedding);
}

}  // namespace rethined
