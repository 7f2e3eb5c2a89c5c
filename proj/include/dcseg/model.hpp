#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dcseg/tape.hpp"
#include "dcseg/tensor.hpp"

namespace dcseg {

enum class ImageTap { Fine, Coarse };

struct ToyNetConfig {
    int input_size = 64;
    int widths[3] = {16, 32, 64}; // encoder channels at strides 2/4/8
    int decoder_width = 32;
    int num_classes = 6;
    int d_proj = 32;              // image embedding dim (128 for full-fidelity runs)
    int d_pix = 16;               // pixel embedding dim
    ImageTap image_tap = ImageTap::Fine;
    int pixel_stride = 4;

    void validate() const;
};

/// Named parameter tensors in a fixed order (checkpoint and Adam state
/// follow this order).
struct ParamSet {
    std::vector<std::pair<std::string, Tensor>> items;

    Tensor& get(const std::string& name);
    const Tensor& get(const std::string& name) const;
    bool has(const std::string& name) const;
    std::int64_t total_elements() const;
};

/// Fan-in-scaled uniform init (bound = sqrt(1/fan_in)), deterministic per seed.
ParamSet init_params(const ToyNetConfig& config, std::uint64_t seed);

/// Analytic parameter count for the given config.
std::int64_t expected_param_count(const ToyNetConfig& config);

/// Node ids of the three heads (plus diagnostic taps) on the tape.
struct ModelNodes {
    int logits = -1;          // [C,H,W]
    int image_embedding = -1; // [D_proj], unit norm
    int pixel_rows = -1;      // [(H/4)*(W/4), D_pix], unit-norm rows
    int fused_fine = -1;      // [D_dec, H/2, W/2]
    int fused_s4 = -1;        // [D_dec, H/4, W/4]
    int deepest = -1;         // [w2, H/8, W/8]
};

/// Record param nodes on a tape; forward() reuses them across batch items.
std::map<std::string, int> bind_params(Tape& tape, const ParamSet& params);

/// Encoder (strides 2/4/8) -> lateral 1x1 + nearest-upsample + add decoder ->
/// segmentation, image-projection and pixel-embedding heads.
ModelNodes model_forward(Tape& tape, const std::map<std::string, int>& param_ids,
                         const Tensor& image, const ToyNetConfig& config);

}  // namespace dcseg
