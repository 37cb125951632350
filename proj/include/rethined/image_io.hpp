#pragma once

#include <string>
#include <vector>

#include "rethined/tensor.hpp"

namespace rethined {

/// Binary PPM (P6) -> [3,H,W] or PGM (P5) -> [1,H,W], maxval 255, values / 255.
Tensor read_image(const std::string& path);
Tensor decode_pnm(const std::vector<unsigned char>& bytes);

/// [3,H,W] -> P6, [1,H,W] -> P5. Values are clamped to [0,1] and rounded half up.
void write_image(const Tensor& image, const std::string& path);
std::vector<unsigned char> encode_pnm(const Tensor& image);

/// Threshold at 0.5 so that 255 (corrupted) -> 1 and 0 (known) -> 0.
Tensor binarize_mask(const Tensor& mask);

std::vector<unsigned char> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<unsigned char>& bytes);

}  // namespace rethined
