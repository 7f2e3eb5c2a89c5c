#include "dcseg/model.hpp"

#include <cmath>
#include <stdexcept>

#include "dcseg/rng.hpp"

namespace dcseg {

void ToyNetConfig::validate() const {
    if (input_size % 8 != 0) throw std::invalid_argument("ToyNetConfig: input size must be divisible by 8");
    if (d_proj < 2 || d_pix < 2) throw std::invalid_argument("ToyNetConfig: embedding dims must be >= 2");
    if (pixel_stride != 4) throw std::invalid_argument("ToyNetConfig: pixel features are tapped at stride 4");
    if (num_classes < 2) throw std::invalid_argument("ToyNetConfig: need at least 2 classes");
    for (int w : widths)
        if (w < 1) throw std::invalid_argument("ToyNetConfig: bad channel width");
}

Tensor& ParamSet::get(const std::string& name) {
    for (auto& [n, t] : items)
        if (n == name) return t;
    throw std::invalid_argument("ParamSet: unknown parameter '" + name + "'");
}

const Tensor& ParamSet::get(const std::string& name) const {
    for (const auto& [n, t] : items)
        if (n == name) return t;
    throw std::invalid_argument("ParamSet: unknown parameter '" + name + "'");
}

bool ParamSet::has(const std::string& name) const {
    for (const auto& [n, t] : items)
        if (n == name) return true;
    return false;
}

std::int64_t ParamSet::total_elements() const {
    std::int64_t n = 0;
    for (const auto& [name, t] : items) n += static_cast<std::int64_t>(t.numel());
    return n;
}

namespace {

Tensor uniform_init(std::vector<int> shape, int fan_in, Rng& rng) {
    Tensor t(std::move(shape));
    const double bound = std::sqrt(1.0 / fan_in);
    for (double& v : t.data) v = rng.uniform(-bound, bound);
    return t;
}

Tensor const_init(std::vector<int> shape, double value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
}

}  // namespace

ParamSet init_params(const ToyNetConfig& c, std::uint64_t seed) {
    c.validate();
    Rng rng(seed);
    const int w0 = c.widths[0], w1 = c.widths[1], w2 = c.widths[2];
    const int d = c.decoder_width;

    ParamSet p;
    auto add = [&](const std::string& name, Tensor t) { p.items.emplace_back(name, std::move(t)); };

    add("enc1.w", uniform_init({w0, 3, 3, 3}, 3 * 9, rng));
    add("enc1.scale", const_init({w0}, 1.0));
    add("enc1.bias", const_init({w0}, 0.0));
    add("enc2.w", uniform_init({w1, w0, 3, 3}, w0 * 9, rng));
    add("enc2.scale", const_init({w1}, 1.0));
    add("enc2.bias", const_init({w1}, 0.0));
    add("enc3.w", uniform_init({w2, w1, 3, 3}, w1 * 9, rng));
    add("enc3.scale", const_init({w2}, 1.0));
    add("enc3.bias", const_init({w2}, 0.0));
    add("lat1.w", uniform_init({d, w0, 1, 1}, w0, rng));
    add("lat2.w", uniform_init({d, w1, 1, 1}, w1, rng));
    add("lat3.w", uniform_init({d, w2, 1, 1}, w2, rng));
    add("head.logits.w", uniform_init({c.num_classes, d, 1, 1}, d, rng));
    add("head.logits.bias", const_init({c.num_classes}, 0.0));
    add("head.pix.w", uniform_init({c.d_pix, d, 1, 1}, d, rng));
    // Both taps always exist so that the switch never changes the parameter
    // set (the unused head just gets zero gradients).
    add("head.proj_fine.w", uniform_init({c.d_proj, d}, d, rng));
    add("head.proj_coarse.w", uniform_init({c.d_proj, w2}, w2, rng));
    return p;
}

std::int64_t expected_param_count(const ToyNetConfig& c) {
    const std::int64_t w0 = c.widths[0], w1 = c.widths[1], w2 = c.widths[2];
    const std::int64_t d = c.decoder_width, cls = c.num_classes;
    std::int64_t n = 0;
    n += w0 * 3 * 9 + 2 * w0;
    n += w1 * w0 * 9 + 2 * w1;
    n += w2 * w1 * 9 + 2 * w2;
    n += d * (w0 + w1 + w2);
    n += cls * d + cls;
    n += c.d_pix * d;
    n += static_cast<std::int64_t>(c.d_proj) * d + static_cast<std::int64_t>(c.d_proj) * w2;
    return n;
}

std::map<std::string, int> bind_params(Tape& tape, const ParamSet& params) {
    std::map<std::string, int> ids;
    for (const auto& [name, t] : params.items) ids[name] = tape.param(t, name);
    return ids;
}

ModelNodes model_forward(Tape& tape, const std::map<std::string, int>& param_ids,
                         const Tensor& image, const ToyNetConfig& config) {
    config.validate();
    if (image.rank() != 3 || image.shape[0] != 3 || image.shape[1] != config.input_size ||
        image.shape[2] != config.input_size)
        throw std::invalid_argument("model_forward: expected [3," + std::to_string(config.input_size) +
                                    "," + std::to_string(config.input_size) + "] image, got " +
                                    image.shape_str());

    auto pid = [&](const std::string& name) {
        auto it = param_ids.find(name);
        if (it == param_ids.end())
            throw std::invalid_argument("model_forward: parameter '" + name + "' not bound");
        return it->second;
    };
    auto stage = [&](int x, const std::string& prefix, int stride) {
        const int conv = tape.conv2d(x, pid(prefix + ".w"), stride);
        const int scaled = tape.mul(conv, pid(prefix + ".scale"));
        const int shifted = tape.add(scaled, pid(prefix + ".bias"));
        return tape.relu(shifted);
    };

    const int x = tape.input(image, "image");
    const int e1 = stage(x, "enc1", 2); // stride 2
    const int e2 = stage(e1, "enc2", 2); // stride 4
    const int e3 = stage(e2, "enc3", 2); // stride 8

    const int d3 = tape.conv2d(e3, pid("lat3.w"), 1);
    const int d2 = tape.add(tape.nearest_upsample(d3, 2), tape.conv2d(e2, pid("lat2.w"), 1));
    const int d1 = tape.add(tape.nearest_upsample(d2, 2), tape.conv2d(e1, pid("lat1.w"), 1));

    ModelNodes out;
    out.deepest = e3;
    out.fused_s4 = d2;
    out.fused_fine = d1;

    const int logits_s2 = tape.add(tape.conv2d(d1, pid("head.logits.w"), 1), pid("head.logits.bias"));
    out.logits = tape.nearest_upsample(logits_s2, 2);

    out.pixel_rows = tape.l2_normalize_rows(tape.pixels_to_rows(tape.conv2d(d2, pid("head.pix.w"), 1)));

    const int tap = config.image_tap == ImageTap::Fine ? d1 : e3;
    const char* proj = config.image_tap == ImageTap::Fine ? "head.proj_fine.w" : "head.proj_coarse.w";
    out.image_embedding = tape.l2_normalize_rows(tape.matmul(pid(proj), tape.global_avg_pool(tap)));
    return out;
}

}  // namespace dcseg
