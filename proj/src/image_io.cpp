#include "rethined/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

#include "rethined/error.hpp"

namespace rethined {

std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("short write to " + path);
}

namespace {

class HeaderReader {
public:
    explicit HeaderReader(const std::vector<unsigned char>& b) : bytes_(b) {}

    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    int number(const char* what) {
        skip_space_and_comments();
        long v = 0;
        std::size_t digits = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            v = v * 10 + (bytes_[pos_++] - '0');
            if (v > 1'000'000) throw FormatError(std::string("PNM header: ") + what + " too large");
            ++digits;
        }
        if (digits == 0) throw FormatError(std::string("PNM header: missing ") + what);
        return static_cast<int>(v);
    }

    std::size_t pos_ = 0;
    const std::vector<unsigned char>& bytes_;
};

}  // namespace

Tensor decode_pnm(const std::vector<unsigned char>& bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P') throw FormatError("not a PNM file");
    int channels = 0;
    if (bytes[1] == '6')
        channels = 3;
    else if (bytes[1] == '5')
        channels = 1;
    else
        throw FormatError(std::string("unsupported PNM format P") + static_cast<char>(bytes[1]) +
                          " (only binary P5/P6 are supported)");
    HeaderReader r(bytes);
    r.pos_ = 2;
    if (r.pos_ >= bytes.size() || !(std::isspace(bytes[r.pos_]) || bytes[r.pos_] == '#'))
        throw FormatError("PNM header: malformed magic");
    const int w = r.number("width");
    const int h = r.number("height");
    const int maxval = r.number("maxval");
    if (w < 1 || h < 1) throw FormatError("PNM header: zero extent");
    if (maxval != 255) throw FormatError("PNM maxval must be 255, got " + std::to_string(maxval));
    if (r.pos_ >= bytes.size() || !std::isspace(bytes[r.pos_])) throw FormatError("PNM header: missing separator");
    ++r.pos_;
    const std::size_t pixels = static_cast<std::size_t>(w) * h;
    if (bytes.size() - r.pos_ < pixels * channels)
        throw FormatError("PNM data truncated: expected " + std::to_string(pixels * channels) + " bytes");

    Tensor out({channels, h, w});
    const unsigned char* px = bytes.data() + r.pos_;
    for (std::size_t i = 0; i < pixels; ++i)
        for (int c = 0; c < channels; ++c) out[c * pixels + i] = px[i * channels + c] / 255.0f;
    return out;
}

Tensor read_image(const std::string& path) { return decode_pnm(read_file(path)); }

std::vector<unsigned char> encode_pnm(const Tensor& image) {
    require_chw(image, "write_image");
    const int channels = image.dim(0);
    if (channels != 1 && channels != 3) throw ShapeError("write_image: need 1 or 3 channels");
    const int h = image.dim(1), w = image.dim(2);
    const std::string header =
        std::string(channels == 3 ? "P6" : "P5") + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    std::vector<unsigned char> bytes(header.begin(), header.end());
    const std::size_t pixels = static_cast<std::size_t>(w) * h;
    bytes.reserve(bytes.size() + pixels * channels);
    for (std::size_t i = 0; i < pixels; ++i)
        for (int c = 0; c < channels; ++c) {
            const float raw = image[c * pixels + i];
            const float v = std::isnan(raw) ? 0.0f : std::clamp(raw, 0.0f, 1.0f);
            bytes.push_back(static_cast<unsigned char>(std::floor(v * 255.0f + 0.5f)));
        }
    return bytes;
}

void write_image(const Tensor& image, const std::string& path) { write_file(path, encode_pnm(image)); }

Tensor binarize_mask(const Tensor& mask) {
    Tensor out(mask.shape());
    for (std::size_t i = 0; i < mask.size(); ++i) out[i] = mask[i] >= 0.5f ? 1.0f : 0.0f;
    return out;
}

}  // namespace rethined
