#include "rethined/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "rethined/error.hpp"
#include "rethined/masks.hpp"
#include "rethined/ops.hpp"
#include "rethined/rng.hpp"

namespace rethined {

namespace {

const char* const kStages[] = {"coarse", "attention", "masking", "mixing", "upscale", "total"};

double conv_flops(const ConvSpec& c, int out_h, int out_w) {
    const double macs = static_cast<double>(c.out_channels()) * out_h * out_w * (c.in_channels() / c.groups) *
                        c.kernel() * c.kernel();
    return 2.0 * macs;
}

}  // namespace

const BenchRow& BenchReport::row(int resolution, const std::string& stage) const {
    for (const auto& r : rows)
        if (r.resolution == resolution && r.stage == stage) return r;
    throw DomainError("bench report has no row " + std::to_string(resolution) + "/" + stage);
}

double percentile(std::vector<double> samples, double q) {
    if (samples.empty()) throw DomainError("percentile of an empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw DomainError("percentile q must lie in [0, 1]");
    std::sort(samples.begin(), samples.end());
    const double pos = q * static_cast<double>(samples.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, samples.size() - 1);
    return samples[lo] + (pos - static_cast<double>(lo)) * (samples[hi] - samples[lo]);
}

Tensor synthetic_image(int height, int width, std::uint64_t seed) {
    Rng rng(seed);
    Tensor img({3, height, width});
    const double two_pi = 2.0 * std::numbers::pi;
    for (int c = 0; c < 3; ++c) {
        const double fx = rng.uniform(1.0, 6.0), fy = rng.uniform(1.0, 6.0), phase = rng.uniform(0.0, two_pi);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                const double u = (x + 0.5) / width, v = (y + 0.5) / height;
                const double wave = std::sin(two_pi * (fx * u + fy * v) + phase);
                const double val = 0.35 * u + 0.25 * v + 0.2 * wave + 0.3 + 0.05 * (rng.uniform() - 0.5);
                img.at(c, y, x) = static_cast<float>(std::clamp(val, 0.0, 1.0));
            }
    }
    return img;
}

Tensor bench_mask(const PipelineConfig& config, int height, int width) {
    const PipelineGeometry g = plan_geometry(config, height, width);
    MaskSpec spec;
    spec.seed = config.seed;
    const Tensor lr = generate_mask(spec, g.lr_height, g.lr_width);
    return g.factor == 1 ? lr : upsample_nearest(lr, g.factor);
}

StageFlops estimate_flops(const PipelineConfig& config, const InpaintModel& model, int hr_height, int hr_width) {
    const PipelineGeometry g = plan_geometry(config, hr_height, hr_width, model.coarse.downsample_factor());
    const double n = static_cast<double>(g.patch_count());
    const double dk = config.embed_dim;
    const double c = model.coarse.feature_channels();
    const double hr_px = static_cast<double>(hr_height) * hr_width;
    const double lr_px = static_cast<double>(g.lr_height) * g.lr_width;
    const double patch_len = 3.0 * config.patch * config.patch;
    StageFlops f;

    const double taps = static_cast<double>(gaussian_taps(antialias_sigma(g.factor)).size()) * 2.0 - 1.0;
    f.coarse = 3.0 * hr_px * 2.0 * 2.0 * taps + 3.0 * lr_px * 8.0;  // separable blur + bilinear
    int h = g.lr_height, w = g.lr_width;
    for (const RepBlock& b : model.coarse.blocks) {
        h *= b.upsample;
        w *= b.upsample;
        h /= b.stride();
        w /= b.stride();
        f.coarse += conv_flops(b.depthwise.conv, h, w) + conv_flops(b.pointwise.conv, h, w);
    }
    h *= model.coarse.head_upsample;
    w *= model.coarse.head_upsample;
    f.coarse += conv_flops(model.coarse.head, h, w);
    f.coarse += 2.0 * n * patch_len * dk;  // patch embedding

    f.attention = attention_flops(g.patch_count(), config.embed_dim, static_cast<long>(c)).total();
    f.masking = 2.0 * n * n;
    // Dense upper bounds; the mixing kernels skip zero weights.
    f.mixing = 2.0 * n * n * patch_len + 3.0 * lr_px * 18.0;
    f.upscale = 2.0 * n * n * patch_len * g.factor * g.factor + 3.0 * hr_px * 10.0;
    return f;
}

long peak_rss_kb() {
    std::ifstream in("/proc/self/status");
    std::string line;
    while (std::getline(in, line))
        if (line.rfind("VmHWM:", 0) == 0) return std::stol(line.substr(6));
    return -1;
}

BenchReport bench(const PipelineConfig& config, const InpaintModel& model, const std::vector<int>& resolutions,
                  int warmups, int runs) {
    if (runs < 1 || warmups < 0) throw DomainError("bench: runs must be >= 1 and warmups >= 0");
    if (resolutions.empty()) throw DomainError("bench: no resolutions given");
    BenchReport report;
    report.lr_size = config.lr_size;
    report.patch = config.patch;
    report.embed_dim = config.embed_dim;
    report.feature_dim = model.coarse.feature_channels();
    report.warmups = warmups;
    report.runs = runs;

    for (int res : resolutions) {
        if (res < config.lr_size || res % config.lr_size != 0)
            throw DomainError("bench: resolution " + std::to_string(res) + " is not a multiple of lr_size " +
                              std::to_string(config.lr_size));
        const PipelineGeometry g = plan_geometry(config, res, res, model.coarse.downsample_factor());
        const Tensor mask = bench_mask(config, res, res);
        Tensor image = synthetic_image(res, res, config.seed);
        for (std::size_t i = 0; i < mask.size(); ++i)
            if (mask[i] != 0.0f)
                for (int c = 0; c < 3; ++c) image[c * mask.size() + i] = 0.0f;

        std::vector<std::vector<double>> samples(std::size(kStages));
        for (int it = 0; it < warmups + runs; ++it) {
            StageTimes t;
            (void)run_pipeline(config, model, image, mask, &t);
            if (it < warmups) continue;
            const double vals[] = {t.coarse, t.attention, t.masking, t.mixing, t.upscale, t.total};
            for (std::size_t s = 0; s < std::size(kStages); ++s) samples[s].push_back(vals[s]);
        }

        const StageFlops f = estimate_flops(config, model, res, res);
        const double flops[] = {f.coarse, f.attention, f.masking, f.mixing, f.upscale, f.total()};
        for (std::size_t s = 0; s < std::size(kStages); ++s)
            report.rows.push_back({res, kStages[s], percentile(samples[s], 0.5), percentile(samples[s], 0.9), flops[s]});
        report.resolutions.push_back({res, g.patch_count(), peak_rss_kb()});
    }
    return report;
}

std::string to_csv(const BenchReport& report) {
    std::ostringstream out;
    out.precision(17);
    out << "resolution,stage,median_ms,p90_ms,flops\n";
    for (const auto& r : report.rows)
        out << r.resolution << ',' << r.stage << ',' << r.median_ms << ',' << r.p90_ms << ',' << r.flops << '\n';
    return out.str();
}

std::string to_markdown(const BenchReport& report) {
    std::ostringstream out;
    out << "lr_size " << report.lr_size << ", P " << report.patch << ", d_k " << report.embed_dim << ", C "
        << report.feature_dim << ", " << report.warmups << " warmups, " << report.runs << " timed runs\n\n";
    out << "| resolution | N | stage | median ms | p90 ms | FLOPs |\n";
    out << "|---:|---:|---|---:|---:|---:|\n";
    char buf[256];
    for (const auto& r : report.rows) {
        long n = 0;
        for (const auto& res : report.resolutions)
            if (res.resolution == r.resolution) n = res.patches;
        std::snprintf(buf, sizeof buf, "| %d | %ld | %s | %.3f | %.3f | %.4g |\n", r.resolution, n, r.stage.c_str(),
                      r.median_ms, r.p90_ms, r.flops);
        out << buf;
    }
    out << "\n| resolution | peak RSS MiB |\n|---:|---:|\n";
    for (const auto& res : report.resolutions) {
        std::snprintf(buf, sizeof buf, "| %d | %.1f |\n", res.resolution, res.peak_rss_kb / 1024.0);
        out << buf;
    }
    return out.str();
}

}  // namespace rethined
