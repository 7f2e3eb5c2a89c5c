#include "dcseg/netpbm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace dcseg {

namespace {

std::uint8_t quantize(double v) {
    const double c = std::clamp(v, 0.0, 1.0);
    return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

// Reads one whitespace-delimited token, skipping '#' comments.
std::string next_token(std::istream& in, const std::string& path) {
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {
            }
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    if (tok.empty()) throw std::runtime_error("netpbm: truncated header in " + path);
    return tok;
}

void read_header(std::istream& in, const std::string& path, const std::string& magic, int& w,
                 int& h) {
    if (next_token(in, path) != magic)
        throw std::runtime_error("netpbm: bad magic in " + path + " (expected " + magic + ")");
    w = std::stoi(next_token(in, path));
    h = std::stoi(next_token(in, path));
    const int maxval = std::stoi(next_token(in, path));
    if (w <= 0 || h <= 0 || maxval != 255)
        throw std::runtime_error("netpbm: unsupported header in " + path);
    // single whitespace byte after maxval already consumed by tokenizer
}

}  // namespace

void write_ppm(const std::string& path, const Tensor& image) {
    if (image.rank() != 3 || image.shape[0] != 3)
        throw std::invalid_argument("write_ppm: expected [3,H,W] image");
    const int h = image.shape[1], w = image.shape[2];
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_ppm: cannot open " + path);
    out << "P6\n" << w << " " << h << "\n255\n";
    std::vector<std::uint8_t> row(static_cast<std::size_t>(w) * 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) row[x * 3 + c] = quantize(image.at(c, y, x));
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
}

Tensor read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_ppm: cannot open " + path);
    int w = 0, h = 0;
    read_header(in, path, "P6", w, h);
    Tensor image({3, h, w});
    std::vector<std::uint8_t> row(static_cast<std::size_t>(w) * 3);
    for (int y = 0; y < h; ++y) {
        in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
        if (in.gcount() != static_cast<std::streamsize>(row.size()))
            throw std::runtime_error("read_ppm: truncated pixel data in " + path);
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) image.at(c, y, x) = row[x * 3 + c] / 255.0;
    }
    return image;
}

void write_pgm(const std::string& path, const LabelMap& labels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_pgm: cannot open " + path);
    out << "P5\n" << labels.width << " " << labels.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(labels.ids.data()),
              static_cast<std::streamsize>(labels.ids.size()));
}

LabelMap read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_pgm: cannot open " + path);
    int w = 0, h = 0;
    read_header(in, path, "P5", w, h);
    LabelMap labels(h, w);
    in.read(reinterpret_cast<char*>(labels.ids.data()),
            static_cast<std::streamsize>(labels.ids.size()));
    if (in.gcount() != static_cast<std::streamsize>(labels.ids.size()))
        throw std::runtime_error("read_pgm: truncated pixel data in " + path);
    return labels;
}

}  // namespace dcseg
