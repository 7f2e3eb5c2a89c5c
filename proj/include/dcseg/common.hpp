#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dcseg {

constexpr std::uint8_t kVoidId = 255;

/// Per-pixel semantic class ids, row-major, void = 255.
struct LabelMap {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> ids;

    LabelMap() = default;
    LabelMap(int h, int w, std::uint8_t fill_value = 0)
        : height(h), width(w), ids(static_cast<std::size_t>(h) * w, fill_value) {}

    std::uint8_t& at(int y, int x) { return ids[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int y, int x) const { return ids[static_cast<std::size_t>(y) * width + x]; }
    std::size_t numel() const { return ids.size(); }
};

enum class Condition { Fog = 0, Night = 1, Rain = 2, Snow = 3 };
constexpr int kNumConditions = 4;

inline const char* condition_name(Condition c) {
    switch (c) {
        case Condition::Fog: return "fog";
        case Condition::Night: return "night";
        case Condition::Rain: return "rain";
        case Condition::Snow: return "snow";
    }
    throw std::invalid_argument("unknown condition");
}

inline Condition condition_from_name(const std::string& s) {
    for (int i = 0; i < kNumConditions; ++i)
        if (s == condition_name(static_cast<Condition>(i))) return static_cast<Condition>(i);
    throw std::invalid_argument("unknown condition tag '" + s + "'");
}

}  // namespace dcseg
