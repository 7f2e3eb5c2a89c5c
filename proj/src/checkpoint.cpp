#include "dcseg/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace dcseg {

namespace {

constexpr char kMagic[8] = {'D', 'C', 'S', 'E', 'G', '0', '0', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
    const std::uint8_t b[4] = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8),
                               static_cast<std::uint8_t>(v >> 16),
                               static_cast<std::uint8_t>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in, const std::string& path) {
    std::uint8_t b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (in.gcount() != 4)
        throw std::runtime_error("checkpoint: truncated at offset " +
                                 std::to_string(static_cast<long long>(in.tellg())) + " in " + path);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void save_checkpoint(const std::string& path, const CheckpointData& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
    out.write(kMagic, 8);
    for (const auto& [name, t] : data.tensors) {
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(out, static_cast<std::uint32_t>(t.rank()));
        for (int d : t.shape) put_u32(out, static_cast<std::uint32_t>(d));
        put_u32(out, 0); // dtype: f64 LE
        out.write(reinterpret_cast<const char*>(t.data.data()),
                  static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    }
    // Sentinel before the trailing hash: zero-length name.
    put_u32(out, 0);
    out.write(reinterpret_cast<const char*>(data.config_hash.data()), 32);
}

CheckpointData load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (in.gcount() != 8 || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("load_checkpoint: bad magic/version in " + path);

    CheckpointData data;
    for (;;) {
        const std::uint32_t name_len = get_u32(in, path);
        if (name_len == 0) break;
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (in.gcount() != static_cast<std::streamsize>(name_len))
            throw std::runtime_error("checkpoint: truncated name at offset " +
                                     std::to_string(static_cast<long long>(in.tellg())) + " in " +
                                     path);
        const std::uint32_t rank = get_u32(in, path);
        std::vector<int> shape;
        for (std::uint32_t i = 0; i < rank; ++i)
            shape.push_back(static_cast<int>(get_u32(in, path)));
        const std::uint32_t dtype = get_u32(in, path);
        if (dtype != 0)
            throw std::runtime_error("checkpoint: unsupported dtype tag " + std::to_string(dtype) +
                                     " for tensor '" + name + "'");
        Tensor t(shape);
        in.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(double)));
        if (in.gcount() != static_cast<std::streamsize>(t.data.size() * sizeof(double)))
            throw std::runtime_error("checkpoint: truncated data for tensor '" + name + "' at offset " +
                                     std::to_string(static_cast<long long>(in.tellg())) + " in " + path);
        data.tensors.emplace_back(std::move(name), std::move(t));
    }
    in.read(reinterpret_cast<char*>(data.config_hash.data()), 32);
    if (in.gcount() != 32) throw std::runtime_error("checkpoint: truncated config hash in " + path);
    return data;
}

std::array<std::uint8_t, 32> config_hash(const std::string& canonical) {
    std::array<std::uint8_t, 32> out{};
    const std::uint64_t seeds[4] = {0xcbf29ce484222325ULL, 0x84222325cbf29ce4ULL,
                                    0x9ae16a3b2f90404fULL, 0xc949d7c7509e6557ULL};
    for (int lane = 0; lane < 4; ++lane) {
        std::uint64_t h = seeds[lane];
        for (unsigned char ch : canonical) {
            h ^= static_cast<std::uint64_t>(ch) + lane;
            h *= 0x100000001b3ULL;
        }
        for (int b = 0; b < 8; ++b) out[lane * 8 + b] = static_cast<std::uint8_t>(h >> (8 * b));
    }
    return out;
}

}  // namespace dcseg
