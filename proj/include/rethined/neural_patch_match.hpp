#pragma once

#include "rethined/patch_ops.hpp"

namespace rethined {

/// N x N patch affinity. Unmasked maps are row-softmax outputs; masked maps
/// pin known patches to themselves and route corrupted patches to known ones.
struct AttentionMap {
    Tensor a;
    bool masked = false;
    int rows = 0;
    int cols = 0;

    int count() const { return a.dim(0); }
    static AttentionMap identity(int rows, int cols);
};

/// Query/key projections from token width (d_k + C) down to d_k.
struct ProjectionWeights {
    Tensor query;  // [d_k + C, d_k]
    Tensor key;    // [d_k + C, d_k]

    int embed_dim() const { return query.dim(1); }
};

/// All learned NeuralPatchMatch parameters.
struct PatchMatchWeights {
    Tensor embedding;  // [3 P^2, d_k]
    ProjectionWeights projection;

    int patch_size() const;
    int embed_dim() const { return embedding.dim(1); }
    int feature_dim() const { return projection.query.dim(0) - embedding.dim(1); }
};

PatchMatchWeights make_patch_match_weights(int patch, int embed_dim, int feature_dim, std::uint64_t seed);

/// softmax(Q K^T / sqrt(d_k)) with Q = X M_Q, K = X M_K.
AttentionMap attention_scores(const TokenMatrix& tokens, const ProjectionWeights& w, int grid_rows, int grid_cols);

/// Applies the self-attention mask: known rows become exact one-hots, corrupted
/// rows drop all corrupted columns and are renormalized to sum 1.
AttentionMap mask_attention(const AttentionMap& a, const MaskVector& m);

/// p_i = sum_j M_T(i,j) q_j.
PatchSequence token_mix(const AttentionMap& mt, const PatchSequence& values);

/// Banded 3x3 Gaussian (sigma 0.8) over pixels within 2 px of a patch seam
/// that touches a corrupted patch; all other pixels are copied.
Tensor coherence(const Tensor& image, const MaskVector& m, int patch);

struct RefineResult {
    Tensor image;       // refined LR image
    AttentionMap mt;    // masked attention, reused at high resolution
    MaskVector mask;
};

/// Wall-clock milliseconds spent in each refinement step.
struct RefineTimings {
    double tokenize = 0;   // img2col + embedding + conditioning
    double attention = 0;  // attention_scores
    double masking = 0;    // tokenize_mask + mask_attention
    double mixing = 0;     // value gather, token mix, pixel shuffle, coherence
};

/// img2col(coarse) -> embed+condition -> attention -> mask -> mix (known
/// patches from x_lr, corrupted from coarse) -> pixel shuffle -> coherence.
RefineResult npm_refine(const Tensor& coarse, const Tensor& x_lr, const Tensor& features,
                        const PatchMatchWeights& weights, const Tensor& mask_lr, int patch,
                        RefineTimings* timings = nullptr);

/// Multiply-add count of attention_scores: projections 2 * 2 N (d_k + C) d_k
/// plus scores 2 N^2 d_k.
struct AttentionFlops {
    double projection = 0;
    double scores = 0;
    double total() const { return projection + scores; }
};
AttentionFlops attention_flops(long n, long embed_dim, long feature_dim);

}  // namespace rethined
