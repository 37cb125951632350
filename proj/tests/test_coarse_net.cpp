#include <doctest.h>

#include "rethined/coarse_net.hpp"
#include "rethined/error.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace rethined;

namespace {

// Unfused stage assembled from the oracle primitives.
Tensor stage_oracle(const RepStage& s, const Tensor& x) {
    std::vector<float> bias;
    if (s.conv.bias) bias = s.conv.bias->values();
    Tensor y = oracle::conv2d(x, s.conv.weights, bias, s.conv.stride, s.conv.padding, s.conv.groups);
    if (s.bn) y = oracle::batchnorm(y, s.bn->mu, s.bn->sigma, s.bn->gamma, s.bn->beta);
    if (s.skip) {
        const Tensor k = oracle::batchnorm(x, s.skip->mu, s.skip->sigma, s.skip->gamma, s.skip->beta);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += k[i];
    }
    return y;
}

Tensor block_oracle(const RepBlock& b, const Tensor& x) {
    Tensor h = b.upsample > 1 ? oracle::upsample_nearest(x, b.upsample) : x;
    h = oracle::relu(stage_oracle(b.depthwise, h));
    return oracle::relu(stage_oracle(b.pointwise, h));
}

}  // namespace

TEST_CASE("unfused block forward matches the primitive oracle") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        CAPTURE(seed);
        testgen::Gen g(seed);
        const bool skip = g.coin();
        const int c = g.integer(1, 6);
        const RepBlock b = make_rep_block(c, skip ? c : g.integer(1, 6), skip ? 1 : g.integer(1, 2),
                                          g.integer(1, 2), skip, seed);
        const Tensor x = g.tensor({c, 2 * g.integer(2, 6), 2 * g.integer(2, 6)});
        CHECK(max_abs_diff(forward(b, x), block_oracle(b, x)) < 1e-5f);
    }
}

TEST_CASE("fusion preserves the block function and removes batchnorm") {
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
        CAPTURE(seed);
        testgen::Gen g(seed);
        const bool skip = g.coin();
        const int c = g.integer(1, 8);
        const RepBlock b = make_rep_block(c, skip ? c : g.integer(1, 8), skip ? 1 : g.integer(1, 2), 1, skip, seed);
        const RepBlock f = fuse_block(b);
        CHECK(f.fused());
        CHECK_FALSE(b.fused());
        CHECK(f.parameter_count() < b.parameter_count());
        for (int t = 0; t < 3; ++t) {
            const Tensor x = g.tensor({c, 2 * g.integer(2, 8), 2 * g.integer(2, 8)}, -2, 2);
            CHECK(max_abs_diff(forward(f, x), forward(b, x)) < 1e-5f);
        }
        CHECK_THROWS_AS(fuse_block(f), StateError);
    }
}

TEST_CASE("fusion of a skip branch on a grouped conv hits the centre tap") {
    RepStage s;
    s.conv.weights = Tensor({2, 1, 3, 3});
    s.conv.padding = 1;
    s.conv.groups = 2;
    s.skip = BatchNormParams::identity(2);
    const RepStage f = fuse_stage(s);
    // zero conv plus identity skip is the identity
    for (int oc = 0; oc < 2; ++oc)
        for (int k = 0; k < 9; ++k) CHECK(f.conv.weights[oc * 9 + k] == (k == 4 ? 1.0f : 0.0f));
    testgen::Gen g(3);
    const Tensor x = g.tensor({2, 5, 5});
    CHECK(forward(f, x) == x);

    s.conv.stride = 2;
    CHECK_THROWS_AS(fuse_stage(s), ShapeError);
    CHECK_THROWS_AS(make_rep_block(4, 4, 2, 1, true, 1), DomainError);
}

TEST_CASE("coarse model shapes and fusion") {
    const CoarseModel m = make_coarse_model(17);
    CHECK(m.downsample_factor() == 8);
    CHECK(m.feature_stride() == 8);
    CHECK(m.feature_channels() == 32);
    testgen::Gen g(9);
    const Tensor x = g.image(3, 64, 48);
    Tensor mask = g.box_mask(64, 48, 3, 20);
    const CoarseOutput out = coarse_forward(m, x, mask);
    CHECK(out.coarse.shape() == std::vector<int>{3, 64, 48});
    CHECK(out.features.shape() == std::vector<int>{32, 8, 6});

    const CoarseModel f = fuse_model(m);
    CHECK(f.fused());
    const CoarseOutput fo = coarse_forward(f, x, mask);
    CHECK(max_abs_diff(fo.coarse, out.coarse) < 1e-4f);
    CHECK(max_abs_diff(fo.features, out.features) < 1e-4f);
    CHECK_THROWS_AS(fuse_model(f), StateError);

    CHECK_THROWS_AS(coarse_forward(m, g.image(3, 60, 48), Tensor({1, 60, 48})), ShapeError);
    CHECK_THROWS_AS(coarse_forward(m, x, Tensor({1, 64, 40})), ShapeError);
    mask[5] = 0.5f;
    CHECK_THROWS_AS(coarse_forward(m, x, mask), DomainError);
}

TEST_CASE("coarse model construction is seeded") {
    const CoarseModel a = make_coarse_model(5), b = make_coarse_model(5), c = make_coarse_model(6);
    CHECK(a.blocks[2].pointwise.conv.weights == b.blocks[2].pointwise.conv.weights);
    CHECK_FALSE(a.blocks[2].pointwise.conv.weights == c.blocks[2].pointwise.conv.weights);
}
