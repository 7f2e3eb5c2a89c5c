#pragma once

#include <string>

#include "dcseg/common.hpp"
#include "dcseg/tensor.hpp"

namespace dcseg {

// Binary netpbm codecs. Images are [3,H,W] tensors in [0,1]; writing
// quantizes to 8 bit (round), so a round trip is within 1/510 per channel.
// Label maps round-trip losslessly as 8-bit PGM (void = 255).

void write_ppm(const std::string& path, const Tensor& image);
Tensor read_ppm(const std::string& path);

void write_pgm(const std::string& path, const LabelMap& labels);
LabelMap read_pgm(const std::string& path);

}  // namespace dcseg
