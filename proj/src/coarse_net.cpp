#include "rethined/coarse_net.hpp"

#include <cmath>

#include "rethined/error.hpp"
#include "rethined/rng.hpp"

namespace rethined {

namespace {

Tensor he_uniform(std::vector<int> shape, int fan_in, Rng& rng) {
    Tensor t(std::move(shape));
    const double bound = std::sqrt(6.0 / fan_in);
    for (float& v : t.data()) v = static_cast<float>(rng.uniform(-bound, bound));
    return t;
}

BatchNormParams random_bn(int channels, Rng& rng, bool randomize) {
    if (!randomize) return BatchNormParams::identity(channels);
    BatchNormParams bn = BatchNormParams::identity(channels);
    for (int c = 0; c < channels; ++c) {
        bn.mu[c] = static_cast<float>(rng.uniform(-0.2, 0.2));
        bn.sigma[c] = static_cast<float>(rng.uniform(0.5, 1.5));
        bn.gamma[c] = static_cast<float>(rng.uniform(0.5, 1.5));
        bn.beta[c] = static_cast<float>(rng.uniform(-0.2, 0.2));
    }
    return bn;
}

void require_binary(const Tensor& mask, const char* what) {
    for (float v : mask.data())
        if (v != 0.0f && v != 1.0f) throw DomainError(std::string(what) + ": mask must be binary {0,1}");
}

}  // namespace

std::size_t RepBlock::parameter_count() const {
    std::size_t n = 0;
    for (const RepStage* s : {&depthwise, &pointwise}) {
        n += s->conv.parameter_count();
        if (s->bn) n += s->bn->parameter_count();
        if (s->skip) n += s->skip->parameter_count();
    }
    return n;
}

bool CoarseModel::fused() const {
    for (const auto& b : blocks)
        if (!b.fused()) return false;
    return true;
}

std::size_t CoarseModel::parameter_count() const {
    std::size_t n = head.parameter_count();
    for (const auto& b : blocks) n += b.parameter_count();
    return n;
}

int CoarseModel::downsample_factor() const {
    int f = 1;
    for (const auto& b : blocks) f *= b.stride();
    return f;
}

int CoarseModel::feature_stride() const {
    int f = 1;
    for (int i = 0; i <= feature_tap; ++i) {
        f *= blocks[static_cast<std::size_t>(i)].stride();
        f /= blocks[static_cast<std::size_t>(i)].upsample;
    }
    return f;
}

RepBlock make_rep_block(int in_channels, int out_channels, int stride, int upsample, bool with_skip,
                        std::uint64_t seed, bool randomize_batchnorm) {
    if (with_skip && stride != 1) throw DomainError("identity skip requires stride 1");
    Rng rng(seed);
    RepBlock b;
    b.upsample = upsample;
    b.depthwise.conv.weights = he_uniform({in_channels, 1, 3, 3}, 9, rng);
    b.depthwise.conv.stride = stride;
    b.depthwise.conv.padding = 1;
    b.depthwise.conv.groups = in_channels;
    b.depthwise.bn = random_bn(in_channels, rng, randomize_batchnorm);
    if (with_skip) b.depthwise.skip = random_bn(in_channels, rng, randomize_batchnorm);
    b.pointwise.conv.weights = he_uniform({out_channels, in_channels, 1, 1}, in_channels, rng);
    b.pointwise.bn = random_bn(out_channels, rng, randomize_batchnorm);
    return b;
}

CoarseModel make_coarse_model(std::uint64_t seed, bool randomize_batchnorm) {
    CoarseModel m;
    // encoder 4 -> 16 -> 32 -> 64 (stride 2 each), decoder 64 -> 32 at 1/8, 32 -> 16 at 1/4
    struct Plan {
        int cin, cout, stride, upsample;
        bool skip;
    };
    const Plan plan[] = {{4, 16, 2, 1, false}, {16, 32, 2, 1, false}, {32, 64, 2, 1, false},
                         {64, 32, 1, 1, true}, {32, 16, 1, 2, true}};
    std::uint64_t s = seed;
    for (const Plan& p : plan)
        m.blocks.push_back(make_rep_block(p.cin, p.cout, p.stride, p.upsample, p.skip, s++ * 0x9E3779B97F4A7C15ULL + 1,
                                          randomize_batchnorm));
    Rng rng(seed ^ 0xC0A45EULL);
    m.head.weights = he_uniform({3, 16, 1, 1}, 16, rng);
    Tensor bias({3});
    for (float& v : bias.data()) v = static_cast<float>(rng.uniform(0.3, 0.7));
    m.head.bias = bias;
    m.head_upsample = 4;
    m.feature_tap = 3;
    return m;
}

Tensor forward(const RepStage& stage, const Tensor& x) {
    Tensor y = conv2d(x, stage.conv);
    if (stage.bn) y = batchnorm(y, *stage.bn);
    if (stage.skip) {
        const Tensor s = batchnorm(x, *stage.skip);
        require_same_shape(y, s, "identity skip");
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += s[i];
    }
    return y;
}

Tensor forward(const RepBlock& block, const Tensor& x) {
    Tensor h = block.upsample > 1 ? upsample_nearest(x, block.upsample) : x;
    h = relu(forward(block.depthwise, h));
    return relu(forward(block.pointwise, h));
}

CoarseOutput coarse_forward(const CoarseModel& model, const Tensor& x_lr, const Tensor& mask_lr) {
    require_chw(x_lr, "coarse_forward image", 3);
    require_chw(mask_lr, "coarse_forward mask", 1);
    if (x_lr.dim(1) != mask_lr.dim(1) || x_lr.dim(2) != mask_lr.dim(2))
        throw ShapeError("coarse_forward: image and mask extents differ");
    require_binary(mask_lr, "coarse_forward");
    if (model.blocks.empty() || model.blocks.front().in_channels() != 4)
        throw ShapeError("coarse_forward: model must take 4 input channels (RGB + mask)");
    const int f = model.downsample_factor();
    if (x_lr.dim(1) % f != 0 || x_lr.dim(2) % f != 0)
        throw ShapeError("coarse_forward: LR extents must be divisible by " + std::to_string(f) + ", got " +
                         shape_string(x_lr.shape()));

    CoarseOutput out;
    Tensor h = concat_channels(x_lr, mask_lr);
    for (std::size_t i = 0; i < model.blocks.size(); ++i) {
        h = forward(model.blocks[i], h);
        if (static_cast<int>(i) == model.feature_tap) out.features = h;
    }
    if (model.head_upsample > 1) h = upsample_nearest(h, model.head_upsample);
    out.coarse = conv2d(h, model.head);
    if (out.coarse.dim(1) != x_lr.dim(1) || out.coarse.dim(2) != x_lr.dim(2))
        throw ShapeError("coarse_forward: model output extent " + shape_string(out.coarse.shape()) +
                         " does not match input");
    return out;
}

RepStage fuse_stage(const RepStage& stage) {
    if (stage.fused()) throw StateError("stage is already fused");
    validate(stage.conv);
    const ConvSpec& conv = stage.conv;
    const int cout = conv.out_channels();
    const int cin_g = conv.weights.dim(1);
    const int s = conv.kernel();
    const std::size_t per_out = static_cast<std::size_t>(cin_g) * s * s;

    std::vector<double> w(conv.weights.size(), 0.0);
    std::vector<double> b(static_cast<std::size_t>(cout), 0.0);
    for (int oc = 0; oc < cout; ++oc) {
        const double cb = conv.bias ? (*conv.bias)[oc] : 0.0;
        if (stage.bn) {
            validate(*stage.bn);
            const double scale = static_cast<double>(stage.bn->gamma[oc]) / stage.bn->sigma[oc];
            for (std::size_t k = 0; k < per_out; ++k) w[oc * per_out + k] = conv.weights[oc * per_out + k] * scale;
            b[oc] = stage.bn->beta[oc] - scale * stage.bn->mu[oc] + scale * cb;
        } else {
            for (std::size_t k = 0; k < per_out; ++k) w[oc * per_out + k] = conv.weights[oc * per_out + k];
            b[oc] = cb;
        }
    }
    if (stage.skip) {
        validate(*stage.skip);
        if (conv.in_channels() != cout || conv.stride != 1 || s % 2 == 0 || conv.padding != s / 2)
            throw ShapeError("identity skip requires C_in == C_out, stride 1 and same padding");
        // 1x1 identity zero-padded to SxS: a single centre tap per output channel
        const int cout_g = cout / conv.groups;
        const std::size_t centre = static_cast<std::size_t>(s / 2) * s + s / 2;
        for (int oc = 0; oc < cout; ++oc) {
            const int local_in = oc % cout_g;
            const double scale = static_cast<double>(stage.skip->gamma[oc]) / stage.skip->sigma[oc];
            w[oc * per_out + static_cast<std::size_t>(local_in) * s * s + centre] += scale;
            b[oc] += stage.skip->beta[oc] - scale * stage.skip->mu[oc];
        }
    }

    RepStage out;
    out.conv = conv;
    for (std::size_t i = 0; i < w.size(); ++i) out.conv.weights[i] = static_cast<float>(w[i]);
    Tensor bias({cout});
    for (int oc = 0; oc < cout; ++oc) bias[oc] = static_cast<float>(b[oc]);
    out.conv.bias = bias;
    return out;
}

RepBlock fuse_block(const RepBlock& block) {
    if (block.fused()) throw StateError("block is already fused");
    RepBlock out;
    out.upsample = block.upsample;
    out.depthwise = fuse_stage(block.depthwise);
    out.pointwise = fuse_stage(block.pointwise);
    return out;
}

CoarseModel fuse_model(const CoarseModel& model) {
    if (model.fused()) throw StateError("model is already fused");
    CoarseModel out = model;
    for (auto& b : out.blocks) b = fuse_block(b);
    return out;
}

}  // namespace rethined
