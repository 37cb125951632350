#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rethined/bench.hpp"
#include "rethined/error.hpp"
#include "rethined/image_io.hpp"
#include "rethined/masks.hpp"
#include "rethined/metrics.hpp"
#include "rethined/pipeline.hpp"
#include "rethined/spectral.hpp"
#include "rethined/weights.hpp"

using namespace rethined;

namespace {

struct ModelArgs {
    std::string weights;
    int lr = 256;
    int patch = 8;
    int dk = 64;
    std::uint64_t seed = 7;
};

void add_model_args(CLI::App* cmd, ModelArgs& a) {
    cmd->add_option("--weights", a.weights, "RTHD weights; a seeded random model is used when omitted");
    cmd->add_option("--lr", a.lr, "LR working size")->capture_default_str();
    cmd->add_option("--patch", a.patch, "patch size P (ignored with --weights)")->capture_default_str();
    cmd->add_option("--dk", a.dk, "embedding width d_k (ignored with --weights)")->capture_default_str();
    cmd->add_option("--seed", a.seed, "seed for the random model")->capture_default_str();
}

std::pair<PipelineConfig, InpaintModel> build_model(const ModelArgs& a) {
    PipelineConfig cfg;
    cfg.lr_size = a.lr;
    cfg.seed = a.seed;
    InpaintModel model = a.weights.empty() ? make_inpaint_model(a.seed, a.patch, a.dk) : load_weights(a.weights);
    cfg.patch = model.patch_size();
    cfg.embed_dim = model.embed_dim();
    return {cfg, std::move(model)};
}

std::string with_extension(const std::string& path, const std::string& ext) {
    const auto dot = path.find_last_of('.');
    const auto slash = path.find_last_of('/');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path + ext;
    return path.substr(0, dot) + ext;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"High-resolution image inpainting"};
    app.require_subcommand(1);

    auto* inpaint = app.add_subcommand("inpaint", "inpaint a PPM image under a PGM mask (255 = missing)");
    std::string image_path, mask_path, out_path;
    bool no_composite = false;
    ModelArgs inpaint_args;
    inpaint->add_option("--image", image_path)->required();
    inpaint->add_option("--mask", mask_path)->required();
    inpaint->add_option("--out", out_path)->required();
    inpaint->add_flag("--no-composite", no_composite, "keep network output on known pixels too");
    add_model_args(inpaint, inpaint_args);

    auto* fuse = app.add_subcommand("fuse", "fold batch norm and skip branches into the convolutions");
    std::string fuse_in, fuse_out;
    fuse->add_option("--in", fuse_in)->required();
    fuse->add_option("--out", fuse_out)->required();

    auto* genmask = app.add_subcommand("genmask", "write a free-form mask covering 30-50% of the image");
    genmask->set_help_flag("--help", "print this help message and exit");
    int mask_h = 0, mask_w = 0;
    std::uint64_t mask_seed = 7;
    std::string mask_out;
    genmask->add_option("--h", mask_h)->required();
    genmask->add_option("--w", mask_w)->required();
    genmask->add_option("--seed", mask_seed)->capture_default_str();
    genmask->add_option("--out", mask_out)->required();

    auto* metrics = app.add_subcommand("metrics", "print L1, SSIM, PSNR and focal frequency loss as JSON");
    std::string metric_a, metric_b;
    metrics->add_option("--a", metric_a)->required();
    metrics->add_option("--b", metric_b)->required();

    auto* benchcmd = app.add_subcommand("bench", "per-stage latency sweep over HR resolutions");
    std::vector<int> resolutions{512, 1024, 2048};
    std::string report_path = "bench.csv", markdown_path;
    int warmups = kBenchWarmups, runs = kBenchRuns;
    ModelArgs bench_args;
    benchcmd->add_option("--res", resolutions, "comma separated square resolutions")->delimiter(',')->capture_default_str();
    benchcmd->add_option("--report", report_path, "CSV output")->capture_default_str();
    benchcmd->add_option("--markdown", markdown_path, "Markdown output (default: CSV path with .md)");
    benchcmd->add_option("--warmups", warmups)->capture_default_str();
    benchcmd->add_option("--runs", runs)->capture_default_str();
    add_model_args(benchcmd, bench_args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*inpaint) {
            auto [cfg, model] = build_model(inpaint_args);
            cfg.composite = !no_composite;
            const Tensor image = read_image(image_path);
            const Tensor mask = binarize_mask(read_image(mask_path));
            require_chw(image, "--image", 3);
            require_chw(mask, "--mask", 1);
            StageTimes t;
            write_image(run_pipeline(cfg, model, image, mask, &t), out_path);
            std::cerr << "inpainted " << image.dim(2) << "x" << image.dim(1) << " in " << t.total << " ms\n";
        } else if (*fuse) {
            InpaintModel model = load_weights(fuse_in);
            model.coarse = fuse_model(model.coarse);
            save_weights(model, fuse_out);
        } else if (*genmask) {
            MaskSpec spec;
            spec.seed = mask_seed;
            const Tensor m = generate_mask(spec, mask_h, mask_w);
            write_image(m, mask_out);
            std::cerr << "coverage " << mask_coverage(m) << "\n";
        } else if (*metrics) {
            const Tensor a = read_image(metric_a);
            const Tensor b = read_image(metric_b);
            require_same_shape(a, b, "metrics");
            const double p = psnr(a, b);
            const PaddedFflResult ffl = focal_frequency_loss_padded(a, b);
            nlohmann::json j;
            j["l1"] = l1(a, b);
            j["ssim"] = ssim(a, b);
            j["psnr"] = std::isinf(p) ? nlohmann::json("inf") : nlohmann::json(p);
            j["ffl"] = ffl.loss;
            j["ffl_padding"] = {{"height", ffl.padded_height},
                                {"width", ffl.padded_width},
                                {"offset_y", ffl.offset_y},
                                {"offset_x", ffl.offset_x}};
            std::cout << j.dump(2) << "\n";
        } else if (*benchcmd) {
            auto [cfg, model] = build_model(bench_args);
            const BenchReport report = bench(cfg, model, resolutions, warmups, runs);
            std::ofstream(report_path) << to_csv(report);
            const std::string md = markdown_path.empty() ? with_extension(report_path, ".md") : markdown_path;
            std::ofstream(md) << to_markdown(report);
            std::cout << to_markdown(report);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
