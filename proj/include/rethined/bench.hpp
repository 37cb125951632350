#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rethined/pipeline.hpp"

namespace rethined {

inline constexpr int kBenchWarmups = 5;
inline constexpr int kBenchRuns = 30;

struct BenchRow {
    int resolution = 0;
    std::string stage;  // coarse, attention, masking, mixing, upscale, total
    double median_ms = 0;
    double p90_ms = 0;
    double flops = 0;
};

struct BenchResolution {
    int resolution = 0;
    long patches = 0;
    long peak_rss_kb = 0;  // process high-water mark after this resolution
};

struct BenchReport {
    int lr_size = 0;
    int patch = 0;
    int embed_dim = 0;
    int feature_dim = 0;
    int warmups = 0;
    int runs = 0;
    std::vector<BenchResolution> resolutions;
    std::vector<BenchRow> rows;

    const BenchRow& row(int resolution, const std::string& stage) const;
};

/// Linear-interpolated percentile, q in [0, 1].
double percentile(std::vector<double> samples, double q);

/// Smooth gradients, sinusoids and seeded noise in [0, 1].
Tensor synthetic_image(int height, int width, std::uint64_t seed);

/// Mask drawn at LR and nearest-upsampled, so every resolution in a sweep sees
/// the same corrupted patch set.
Tensor bench_mask(const PipelineConfig& config, int height, int width);

/// Analytic operation counts (multiply and add counted separately) per stage.
/// The attention entry is exactly 2 N^2 d_k + 4 N (d_k + C) d_k.
struct StageFlops {
    double coarse = 0, attention = 0, masking = 0, mixing = 0, upscale = 0;
    double total() const { return coarse + attention + masking + mixing + upscale; }
};
StageFlops estimate_flops(const PipelineConfig& config, const InpaintModel& model, int hr_height, int hr_width);

/// Square inputs of each resolution; `warmups` untimed then `runs` timed pipeline calls.
BenchReport bench(const PipelineConfig& config, const InpaintModel& model, const std::vector<int>& resolutions,
                  int warmups = kBenchWarmups, int runs = kBenchRuns);

std::string to_csv(const BenchReport& report);
std::string to_markdown(const BenchReport& report);

/// VmHWM from /proc/self/status, or -1 when unavailable.
long peak_rss_kb();

}  // namespace rethined
