#include "dcseg/edt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace dcseg {

namespace {

constexpr double kInf = 1e30;
constexpr std::uint8_t kVoid = 255;

// 1D squared distance transform (lower envelope of parabolas).
void dt1d(const std::vector<double>& f, std::vector<double>& out, int n, std::vector<int>& v,
          std::vector<double>& z) {
    int k = 0;
    v[0] = 0;
    z[0] = -kInf;
    z[1] = kInf;
    for (int q = 1; q < n; ++q) {
        double s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
        while (s <= z[k]) {
            --k;
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kInf;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        out[q] = (q - v[k]) * static_cast<double>(q - v[k]) + f[v[k]];
    }
}

// Exact squared EDT of the mask (sites where mask true).
std::vector<double> squared_edt(const std::vector<bool>& site, int h, int w) {
    std::vector<double> d(static_cast<std::size_t>(h) * w);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = site[i] ? 0.0 : kInf;

    const int n = std::max(h, w);
    std::vector<double> f(n), out(n);
    std::vector<int> v(n);
    std::vector<double> z(n + 1);

    // columns
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) f[y] = d[static_cast<std::size_t>(y) * w + x];
        dt1d(f, out, h, v, z);
        for (int y = 0; y < h; ++y) d[static_cast<std::size_t>(y) * w + x] = out[y];
    }
    // rows
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) f[x] = d[static_cast<std::size_t>(y) * w + x];
        dt1d(f, out, w, v, z);
        for (int x = 0; x < w; ++x) d[static_cast<std::size_t>(y) * w + x] = out[x];
    }
    return d;
}

std::vector<std::uint8_t> present_classes(const std::vector<std::uint8_t>& labels) {
    std::set<std::uint8_t> s;
    for (std::uint8_t l : labels)
        if (l != kVoid) s.insert(l);
    return {s.begin(), s.end()};
}

}  // namespace

Tensor edt(const std::vector<std::uint8_t>& labels, int height, int width) {
    if (height <= 0 || width <= 0 ||
        labels.size() != static_cast<std::size_t>(height) * width)
        throw std::invalid_argument("edt: empty or misshapen label map");
    const auto classes = present_classes(labels);
    if (classes.empty()) throw std::invalid_argument("edt: no non-void pixel");

    Tensor total({height, width});
    std::vector<std::vector<double>> per_class(classes.size());
#pragma omp parallel for schedule(static)
    for (int ci = 0; ci < static_cast<int>(classes.size()); ++ci) {
        std::vector<bool> site(labels.size());
        for (std::size_t i = 0; i < labels.size(); ++i) site[i] = labels[i] == classes[ci];
        per_class[ci] = squared_edt(site, height, width);
    }
    // Fixed-order summation across classes.
    for (std::size_t ci = 0; ci < classes.size(); ++ci)
        for (std::size_t i = 0; i < total.data.size(); ++i)
            total.data[i] += std::sqrt(per_class[ci][i]);
    return total;
}

Tensor edt_ref(const std::vector<std::uint8_t>& labels, int height, int width) {
    if (height <= 0 || width <= 0 ||
        labels.size() != static_cast<std::size_t>(height) * width)
        throw std::invalid_argument("edt_ref: empty or misshapen label map");
    const auto classes = present_classes(labels);
    if (classes.empty()) throw std::invalid_argument("edt_ref: no non-void pixel");

    Tensor total({height, width});
    for (std::uint8_t c : classes) {
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                double best = std::numeric_limits<double>::max();
                for (int qy = 0; qy < height; ++qy)
                    for (int qx = 0; qx < width; ++qx) {
                        if (labels[static_cast<std::size_t>(qy) * width + qx] != c) continue;
                        const double dy = y - qy, dx = x - qx;
                        best = std::min(best, dy * dy + dx * dx);
                    }
                total.data[static_cast<std::size_t>(y) * width + x] += std::sqrt(best);
            }
    }
    return total;
}

}  // namespace dcseg
