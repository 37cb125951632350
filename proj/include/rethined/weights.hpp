#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rethined/coarse_net.hpp"
#include "rethined/neural_patch_match.hpp"

namespace rethined {

/// Everything the pipeline learns: the coarse network and the patch-match projections.
struct InpaintModel {
    CoarseModel coarse;
    PatchMatchWeights npm;

    int patch_size() const { return npm.patch_size(); }
    int embed_dim() const { return npm.embed_dim(); }
};

InpaintModel make_inpaint_model(std::uint64_t seed, int patch = 8, int embed_dim = 64);

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

// RTHD container, little endian:
//   "RTHD" | u32 version (1) | u32 tensor_count |
//   per tensor: u32 name_len | name bytes | u32 ndim | u32 dims[ndim] | f32 data[]
inline constexpr char kWeightsMagic[4] = {'R', 'T', 'H', 'D'};
inline constexpr std::uint32_t kWeightsVersion = 1;

std::vector<unsigned char> encode_tensors(const NamedTensors& tensors);
NamedTensors decode_tensors(const std::vector<unsigned char>& bytes);

NamedTensors model_to_tensors(const InpaintModel& model);
InpaintModel model_from_tensors(const NamedTensors& tensors);

void save_weights(const InpaintModel& model, const std::string& path);
InpaintModel load_weights(const std::string& path);

}  // namespace rethined
