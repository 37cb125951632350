#include "rethined/weights.hpp"

#include <bit>
#include <cstring>
#include <map>

#include "rethined/error.hpp"
#include "rethined/image_io.hpp"

namespace rethined {

static_assert(std::endian::native == std::endian::little, "RTHD I/O assumes a little-endian host");

InpaintModel make_inpaint_model(std::uint64_t seed, int patch, int embed_dim) {
    InpaintModel m;
    m.coarse = make_coarse_model(seed);
    m.npm = make_patch_match_weights(patch, embed_dim, m.coarse.feature_channels(), seed ^ 0x5A17C0DEULL);
    return m;
}

namespace {

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    unsigned char b[4];
    std::memcpy(b, &v, 4);
    out.insert(out.end(), b, b + 4);
}

class Cursor {
public:
    explicit Cursor(const std::vector<unsigned char>& b) : bytes_(b) {}
    std::size_t remaining() const { return bytes_.size() - pos_; }
    void need(std::size_t n, const char* what) const {
        if (remaining() < n) throw FormatError(std::string("RTHD truncated while reading ") + what);
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v;
        std::memcpy(&v, bytes_.data() + pos_, 4);
        pos_ += 4;
        return v;
    }
    const unsigned char* take(std::size_t n, const char* what) {
        need(n, what);
        const unsigned char* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }

private:
    const std::vector<unsigned char>& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<unsigned char> encode_tensors(const NamedTensors& tensors) {
    std::vector<unsigned char> out(kWeightsMagic, kWeightsMagic + 4);
    put_u32(out, kWeightsVersion);
    put_u32(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        put_u32(out, static_cast<std::uint32_t>(t.rank()));
        for (int d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
        const auto* p = reinterpret_cast<const unsigned char*>(t.data().data());
        out.insert(out.end(), p, p + t.size() * sizeof(float));
    }
    return out;
}

NamedTensors decode_tensors(const std::vector<unsigned char>& bytes) {
    Cursor cur(bytes);
    const unsigned char* magic = cur.take(4, "magic");
    if (std::memcmp(magic, kWeightsMagic, 4) != 0) throw FormatError("not an RTHD weights file (bad magic)");
    const std::uint32_t version = cur.u32("version");
    if (version != kWeightsVersion) throw FormatError("unsupported RTHD version " + std::to_string(version));
    const std::uint32_t count = cur.u32("tensor count");
    NamedTensors out;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = cur.u32("name length");
        const unsigned char* name = cur.take(name_len, "name");
        const std::uint32_t ndim = cur.u32("rank");
        if (ndim < 1 || ndim > 4) throw FormatError("RTHD tensor rank must be 1..4, got " + std::to_string(ndim));
        std::vector<int> shape;
        std::uint64_t volume = 1;
        for (std::uint32_t d = 0; d < ndim; ++d) {
            const std::uint32_t e = cur.u32("dims");
            if (e == 0 || e > 0x7fffffffu) throw FormatError("RTHD tensor extent out of range");
            volume *= e;
            if (volume > cur.remaining() / sizeof(float)) throw FormatError("RTHD tensor dims exceed file size");
            shape.push_back(static_cast<int>(e));
        }
        const unsigned char* data = cur.take(volume * sizeof(float), "tensor data");
        std::vector<float> values(volume);
        std::memcpy(values.data(), data, volume * sizeof(float));
        out.emplace_back(std::string(reinterpret_cast<const char*>(name), name_len),
                         Tensor(std::move(shape), std::move(values)));
    }
    if (cur.remaining() != 0) throw FormatError("RTHD file has trailing bytes");
    return out;
}

namespace {

void put_bn(NamedTensors& out, const std::string& prefix, const BatchNormParams& bn) {
    out.emplace_back(prefix + ".mu", bn.mu);
    out.emplace_back(prefix + ".sigma", bn.sigma);
    out.emplace_back(prefix + ".gamma", bn.gamma);
    out.emplace_back(prefix + ".beta", bn.beta);
}

void put_stage(NamedTensors& out, const std::string& prefix, const RepStage& s) {
    out.emplace_back(prefix + ".weight", s.conv.weights);
    if (s.conv.bias) out.emplace_back(prefix + ".bias", *s.conv.bias);
    if (s.bn) put_bn(out, prefix + ".bn", *s.bn);
    if (s.skip) put_bn(out, prefix + ".skip", *s.skip);
}

class Lookup {
public:
    explicit Lookup(const NamedTensors& t) {
        for (const auto& [k, v] : t)
            if (!map_.emplace(k, &v).second) throw FormatError("duplicate tensor name " + k);
    }
    bool has(const std::string& k) const { return map_.count(k) != 0; }
    const Tensor& get(const std::string& k) const {
        auto it = map_.find(k);
        if (it == map_.end()) throw FormatError("weights are missing tensor " + k);
        return *it->second;
    }
    std::optional<BatchNormParams> bn(const std::string& prefix) const {
        if (!has(prefix + ".mu")) return std::nullopt;
        BatchNormParams p{get(prefix + ".mu"), get(prefix + ".sigma"), get(prefix + ".gamma"), get(prefix + ".beta")};
        validate(p);
        return p;
    }

private:
    std::map<std::string, const Tensor*> map_;
};

RepStage get_stage(const Lookup& l, const std::string& prefix, int stride, bool depthwise) {
    RepStage s;
    s.conv.weights = l.get(prefix + ".weight");
    if (s.conv.weights.rank() != 4) throw FormatError(prefix + ".weight must be rank 4");
    if (l.has(prefix + ".bias")) s.conv.bias = l.get(prefix + ".bias");
    s.conv.stride = stride;
    s.conv.padding = s.conv.kernel() / 2;
    s.conv.groups = depthwise ? s.conv.weights.dim(0) : 1;
    s.bn = l.bn(prefix + ".bn");
    s.skip = l.bn(prefix + ".skip");
    validate(s.conv);
    return s;
}

int as_int(float v, const char* what) {
    const int i = static_cast<int>(v);
    if (static_cast<float>(i) != v || i < 0) throw FormatError(std::string("invalid architecture field ") + what);
    return i;
}

}  // namespace

NamedTensors model_to_tensors(const InpaintModel& model) {
    const CoarseModel& c = model.coarse;
    NamedTensors out;
    const int nb = static_cast<int>(c.blocks.size());
    Tensor arch({nb, 2});
    for (int i = 0; i < nb; ++i) {
        arch.at(i, 0) = static_cast<float>(c.blocks[i].stride());
        arch.at(i, 1) = static_cast<float>(c.blocks[i].upsample);
    }
    out.emplace_back("arch.blocks", arch);
    out.emplace_back("arch.head", Tensor({2}, {static_cast<float>(c.head_upsample), static_cast<float>(c.feature_tap)}));
    for (int i = 0; i < nb; ++i) {
        const std::string p = "coarse.block" + std::to_string(i);
        put_stage(out, p + ".dw", c.blocks[i].depthwise);
        put_stage(out, p + ".pw", c.blocks[i].pointwise);
    }
    out.emplace_back("coarse.head.weight", c.head.weights);
    if (c.head.bias) out.emplace_back("coarse.head.bias", *c.head.bias);
    out.emplace_back("npm.embedding", model.npm.embedding);
    out.emplace_back("npm.query", model.npm.projection.query);
    out.emplace_back("npm.key", model.npm.projection.key);
    return out;
}

InpaintModel model_from_tensors(const NamedTensors& tensors) {
    const Lookup l(tensors);
    const Tensor& arch = l.get("arch.blocks");
    const Tensor& head = l.get("arch.head");
    if (arch.rank() != 2 || arch.dim(1) != 2 || head.rank() != 1 || head.dim(0) != 2)
        throw FormatError("malformed architecture tensors");
    InpaintModel m;
    CoarseModel& c = m.coarse;
    for (int i = 0; i < arch.dim(0); ++i) {
        const std::string p = "coarse.block" + std::to_string(i);
        RepBlock b;
        b.upsample = as_int(arch.at(i, 1), "upsample");
        b.depthwise = get_stage(l, p + ".dw", as_int(arch.at(i, 0), "stride"), true);
        b.pointwise = get_stage(l, p + ".pw", 1, false);
        c.blocks.push_back(std::move(b));
    }
    c.head_upsample = as_int(head[0], "head_upsample");
    c.feature_tap = as_int(head[1], "feature_tap");
    if (c.feature_tap >= static_cast<int>(c.blocks.size())) throw FormatError("feature_tap out of range");
    c.head.weights = l.get("coarse.head.weight");
    if (l.has("coarse.head.bias")) c.head.bias = l.get("coarse.head.bias");
    validate(c.head);
    m.npm.embedding = l.get("npm.embedding");
    m.npm.projection.query = l.get("npm.query");
    m.npm.projection.key = l.get("npm.key");
    const auto& npm = m.npm;
    if (npm.embedding.rank() != 2 || npm.projection.query.rank() != 2 || npm.projection.key.rank() != 2 ||
        npm.projection.query.shape() != npm.projection.key.shape() ||
        npm.projection.query.dim(1) != npm.embedding.dim(1) ||
        npm.feature_dim() != c.feature_channels())
        throw FormatError("patch-match weight shapes are inconsistent with the coarse model");
    (void)npm.patch_size();
    return m;
}

void save_weights(const InpaintModel& model, const std::string& path) {
    write_file(path, encode_tensors(model_to_tensors(model)));
}

InpaintModel load_weights(const std::string& path) { return model_from_tensors(decode_tensors(read_file(path))); }

}  // namespace rethined
