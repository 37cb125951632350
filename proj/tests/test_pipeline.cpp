#include <doctest.h>

#include <sstream>

#include "rethined/bench.hpp"
#include "rethined/error.hpp"
#include "rethined/masks.hpp"
#include "rethined/pipeline.hpp"
#include "support/generators.hpp"

using namespace rethined;

namespace {

const InpaintModel& model8() {
    static const InpaintModel m = make_inpaint_model(7, 8, 64);
    return m;
}

Tensor masked_copy(const Tensor& x, const Tensor& m) {
    Tensor out = x;
    const std::size_t plane = m.size();
    for (std::size_t i = 0; i < plane; ++i)
        if (m[i] != 0.0f)
            for (int c = 0; c < 3; ++c) out[c * plane + i] = 0.0f;
    return out;
}

}  // namespace

TEST_CASE("geometry planning") {
    PipelineConfig cfg;
    const PipelineGeometry g = plan_geometry(cfg, 512, 512);
    CHECK(g.factor == 2);
    CHECK(g.lr_height == 256);
    CHECK(g.grid_rows == 32);
    CHECK(g.patch_count() == 1024);

    const PipelineGeometry r = plan_geometry(cfg, 256, 1024);
    CHECK(r.factor == 4);
    CHECK(r.lr_height == 64);
    CHECK(r.lr_width == 256);
    CHECK(r.patch_count() == 8 * 32);

    CHECK_THROWS_AS(plan_geometry(cfg, 500, 500), ShapeError);
    CHECK_THROWS_AS(plan_geometry(cfg, 1024, 1020), ShapeError);
    CHECK_THROWS_AS(plan_geometry(cfg, 40, 1024), ShapeError);  // LR 10 rows, not a multiple of 8

    PipelineConfig bad = cfg;
    bad.patch = 12;
    CHECK_THROWS_AS(validate(bad), DomainError);
    bad = cfg;
    bad.lr_size = 100;
    CHECK_THROWS_AS(validate(bad), DomainError);
    bad = cfg;
    bad.embed_dim = 0;
    CHECK_THROWS_AS(validate(bad), DomainError);
}

TEST_CASE("mask downsampling is a max-pool") {
    testgen::Gen g(3);
    for (int f : {1, 2, 4}) {
        const Tensor m = g.box_mask(32, 48, 3, 6);
        const Tensor d = downsample_mask(m, f);
        CHECK(d.shape() == std::vector<int>{1, 32 / f, 48 / f});
        for (int y = 0; y < 32 / f; ++y)
            for (int x = 0; x < 48 / f; ++x) {
                float mx = 0.0f;
                for (int dy = 0; dy < f; ++dy)
                    for (int dx = 0; dx < f; ++dx) mx = std::max(mx, m.at(0, y * f + dy, x * f + dx));
                CHECK(d.at(0, y, x) == mx);
            }
    }
    CHECK_THROWS_AS(downsample_mask(Tensor({1, 6, 6}), 4), ShapeError);
    CHECK_THROWS_AS(downsample_mask(Tensor({1, 4, 4}, 0.3f), 2), DomainError);
}

TEST_CASE("feature resampling onto the patch grid") {
    testgen::Gen g(4);
    const Tensor f = g.tensor({3, 8, 12});
    CHECK(features_to_grid(f, 8, 8) == f);
    const Tensor pooled = features_to_grid(f, 8, 32);
    CHECK(pooled.shape() == std::vector<int>{3, 2, 3});
    double s = 0.0;
    for (int y = 4; y < 8; ++y)
        for (int x = 8; x < 12; ++x) s += f.at(1, y, x);
    CHECK(pooled.at(1, 1, 2) == doctest::Approx(s / 16).epsilon(1e-6));
    const Tensor up = features_to_grid(f, 8, 4);
    CHECK(up.shape() == std::vector<int>{3, 16, 24});
    CHECK(up.at(2, 5, 7) == f.at(2, 2, 3));
    CHECK_THROWS_AS(features_to_grid(f, 8, 12), ShapeError);
}

TEST_CASE("an uncorrupted input passes through unchanged") {
    testgen::Gen g(5);
    const Tensor x = g.image(3, 512, 512);
    CHECK(run_pipeline(PipelineConfig{}, model8(), x, Tensor({1, 512, 512})) == x);
}

TEST_CASE("pipeline output keeps known pixels, shape and determinism") {
    PipelineConfig cfg;
    const Tensor x = synthetic_image(512, 512, 11);
    MaskSpec spec;
    spec.seed = 4;
    const Tensor m = generate_mask(spec, 512, 512);
    StageTimes t;
    const Tensor out = run_pipeline(cfg, model8(), masked_copy(x, m), m, &t);
    CHECK(out.shape() == x.shape());
    std::size_t changed = 0;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 512; ++y)
            for (int xx = 0; xx < 512; ++xx) {
                if (m.at(0, y, xx) == 0.0f)
                    CHECK(out.at(c, y, xx) == x.at(c, y, xx));
                else
                    changed += out.at(c, y, xx) != 0.0f;
            }
    CHECK(changed > 0);
    for (float v : out.data()) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
    CHECK(t.total >= t.coarse + t.attention + t.masking + t.mixing + t.upscale);
    CHECK(t.attention > 0.0);

    // same inputs give the same bits; junk under the mask is ignored
    CHECK(run_pipeline(cfg, model8(), masked_copy(x, m), m) == out);
    CHECK(run_pipeline(cfg, model8(), x, m) == out);

    cfg.composite = false;
    const Tensor raw = run_pipeline(cfg, model8(), masked_copy(x, m), m);
    CHECK_FALSE(raw == out);
}

TEST_CASE("pipeline input validation") {
    PipelineConfig cfg;
    const Tensor x({3, 512, 512});
    CHECK_THROWS_AS(run_pipeline(cfg, model8(), x, Tensor({1, 256, 512})), ShapeError);
    CHECK_THROWS_AS(run_pipeline(cfg, model8(), Tensor({1, 512, 512}), Tensor({1, 512, 512})), ShapeError);
    CHECK_THROWS_AS(run_pipeline(cfg, model8(), x, Tensor({1, 512, 512}, 0.5f)), DomainError);
    CHECK_THROWS_AS(run_pipeline(cfg, model8(), x, Tensor({1, 512, 512}, 1.0f)), DomainError);
    cfg.patch = 16;
    CHECK_THROWS_AS(run_pipeline(cfg, model8(), x, Tensor({1, 512, 512})), ShapeError);
}

TEST_CASE("non-square inputs and other patch sizes") {
    for (int p : {4, 16, 32}) {
        CAPTURE(p);
        PipelineConfig cfg;
        cfg.patch = p;
        const InpaintModel m = make_inpaint_model(3, p, 32);
        cfg.embed_dim = 32;
        const Tensor x = synthetic_image(256, 512, 2);
        Tensor mask({1, 256, 512});
        for (int y = 64; y < 160; ++y)
            for (int xx = 100; xx < 300; ++xx) mask.at(0, y, xx) = 1.0f;
        const Tensor out = run_pipeline(cfg, m, masked_copy(x, mask), mask);
        CHECK(out.shape() == x.shape());
        CHECK(out.at(0, 0, 0) == x.at(0, 0, 0));
    }
}

TEST_CASE("patch count at 1024 with P = 8") {
    const PipelineGeometry g = plan_geometry(PipelineConfig{}, 1024, 1024);
    CHECK(g.patch_count() == 1024L * 1024 / (8 * 8 * 4 * 4));
    CHECK(g.patch_count() == 1024);
}

TEST_CASE("bench helpers") {
    CHECK(percentile({5.0}, 0.9) == 5.0);
    CHECK(percentile({1, 2, 3, 4, 5}, 0.5) == 3.0);
    CHECK(percentile({4, 1, 3, 2}, 0.5) == 2.5);
    CHECK(percentile({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, 0.9) == doctest::Approx(9.1));
    CHECK_THROWS_AS(percentile({}, 0.5), DomainError);
    CHECK_THROWS_AS(percentile({1.0}, 1.5), DomainError);

    const Tensor s = synthetic_image(64, 96, 3);
    CHECK(s.shape() == std::vector<int>{3, 64, 96});
    for (float v : s.data()) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
    CHECK(synthetic_image(64, 96, 3) == s);

    // the LR mask is identical across resolutions
    PipelineConfig cfg;
    const Tensor m512 = bench_mask(cfg, 512, 512), m1024 = bench_mask(cfg, 1024, 1024);
    CHECK(downsample_mask(m512, 2) == downsample_mask(m1024, 4));
    const double cov = mask_coverage(m512);
    CHECK(cov >= 0.30);
    CHECK(cov <= 0.50);
}

TEST_CASE("FLOP estimates and the bench report") {
    PipelineConfig cfg;
    const InpaintModel& m = model8();
    for (int res : {256, 512, 1024}) {
        const StageFlops f = estimate_flops(cfg, m, res, res);
        const double n = 1024, dk = 64, c = m.npm.feature_dim();
        CHECK(f.attention == 2 * n * n * dk + 4 * n * (dk + c) * dk);
        CHECK(f.total() > f.attention);
    }
    const BenchReport r = bench(cfg, m, {256, 512}, 1, 3);
    CHECK(r.rows.size() == 12);
    CHECK(r.resolutions.size() == 2);
    CHECK(r.resolutions[1].patches == 1024);
    CHECK(r.row(512, "attention").flops == estimate_flops(cfg, m, 512, 512).attention);
    CHECK(r.row(512, "total").p90_ms >= r.row(512, "total").median_ms);
    CHECK_THROWS(r.row(768, "total"));

    const std::string csv = to_csv(r);
    std::istringstream in(csv);
    std::string header;
    std::getline(in, header);
    CHECK(header == "resolution,stage,median_ms,p90_ms,flops");
    int lines = 0;
    for (std::string line; std::getline(in, line);) lines += !line.empty();
    CHECK(lines == 12);
    CHECK(to_markdown(r).find("| 512 |") != std::string::npos);

    CHECK_THROWS_AS(bench(cfg, m, {384}, 0, 1), DomainError);
    CHECK_THROWS_AS(bench(cfg, m, {128}, 0, 1), DomainError);
}
