#pragma once

#include <cstdint>
#include <vector>

#include "dcseg/tensor.hpp"

namespace dcseg {

/// Per-pixel sum over present classes of the exact Euclidean distance to the
/// nearest pixel of that class (own-class term is 0). Two-pass lower-envelope
/// squared distance transform per class, then sqrt and sum. Label maps are
/// flat row-major with void = 255; void pixels still receive a distance (they
/// are weighted out later) but never act as sites.
Tensor edt(const std::vector<std::uint8_t>& labels, int height, int width);

/// Brute-force O(P^2 * C) reference, serial. Test/bench baseline only.
Tensor edt_ref(const std::vector<std::uint8_t>& labels, int height, int width);

}  // namespace dcseg
