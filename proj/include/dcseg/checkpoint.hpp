#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dcseg/tensor.hpp"

namespace dcseg {

// Checkpoint container: magic "DCSEG001", then per tensor
//   u32 LE name length, name bytes, u32 rank, u32 dims..., u32 dtype tag
//   (0 = 64-bit IEEE-754 LE), raw data,
// and a trailing 32-byte config hash.

struct CheckpointData {
    std::vector<std::pair<std::string, Tensor>> tensors;
    std::array<std::uint8_t, 32> config_hash = {};
};

void save_checkpoint(const std::string& path, const CheckpointData& data);
CheckpointData load_checkpoint(const std::string& path);

/// 32-byte digest of a canonical config string (four independent FNV-1a
/// lanes); used only to detect checkpoint/config mismatch.
std::array<std::uint8_t, 32> config_hash(const std::string& canonical);

}  // namespace dcseg
