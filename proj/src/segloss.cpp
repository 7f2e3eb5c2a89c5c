#include "dcseg/segloss.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "dcseg/edt.hpp"
#include "json.hpp"

namespace dcseg {

ClassFrequencyTable count_class_frequencies(const std::vector<LabelMap>& split, int num_classes) {
    ClassFrequencyTable t;
    t.num_classes = num_classes;
    t.freq.assign(num_classes, 0);
    for (std::size_t s = 0; s < split.size(); ++s) {
        for (std::uint8_t id : split[s].ids) {
            if (id == kVoidId) continue;
            if (id >= num_classes)
                throw std::runtime_error("count_class_frequencies: label id " + std::to_string(id) +
                                         " out of range in sample " + std::to_string(s));
            ++t.freq[id];
            ++t.total_nonvoid;
        }
    }
    return t;
}

double class_balance_weight(const ClassFrequencyTable& table, int c, double eps) {
    if (table.total_nonvoid <= 0)
        throw std::invalid_argument("class_balance_weight: empty frequency table");
    if (c < 0 || c >= table.num_classes)
        throw std::invalid_argument("class_balance_weight: class out of range");
    const double f = static_cast<double>(table.freq[c]) / static_cast<double>(table.total_nonvoid);
    return 1.0 / std::log(1.0 + eps + f);
}

WeightMaps build_weight_maps(const LabelMap& labels, const ClassFrequencyTable& table,
                             double sigma_edt, double eps) {
    if (sigma_edt <= 0.0) throw std::invalid_argument("build_weight_maps: sigma_edt must be > 0");
    const int h = labels.height, w = labels.width;
    WeightMaps m;
    m.sigma_edt = sigma_edt;
    m.balance = Tensor({h, w});
    m.edt_factor = Tensor({h, w});
    m.delta = Tensor({h, w});

    const Tensor d = edt(labels.ids, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::uint8_t id = labels.at(y, x);
            const double ef = std::exp(-d.at(y, x) / (2.0 * sigma_edt));
            m.edt_factor.at(y, x) = ef;
            if (id == kVoidId) continue;
            const double bal = class_balance_weight(table, id, eps);
            m.balance.at(y, x) = bal;
            m.delta.at(y, x) = bal * ef;
        }
    return m;
}

namespace {

SegLossResult seg_loss_impl(const Tensor& logits, const LabelMap& labels, const Tensor* delta,
                            double gamma) {
    if (logits.rank() != 3)
        throw std::invalid_argument("seg_loss: logits must be [C,H,W], got " + logits.shape_str());
    const int c = logits.shape[0], h = logits.shape[1], w = logits.shape[2];
    if (labels.height != h || labels.width != w)
        throw std::invalid_argument("seg_loss: label map not aligned with logits");
    if (gamma < 0.0) throw std::invalid_argument("seg_loss: gamma must be >= 0");

    SegLossResult r;
    r.grad_logits = Tensor({c, h, w});
    r.per_pixel = Tensor({h, w});
    for (const std::uint8_t id : labels.ids)
        if (id != kVoidId) ++r.pixels_scored;
    if (r.pixels_scored == 0) throw std::runtime_error("seg_loss: all-void label map");
    const double inv_n = 1.0 / static_cast<double>(r.pixels_scored);

    double total = 0.0;
#pragma omp parallel for schedule(static) reduction(+ : total)
    for (int y = 0; y < h; ++y) {
        std::vector<double> q(c);
        for (int x = 0; x < w; ++x) {
            const std::uint8_t t = labels.at(y, x);
            if (t == kVoidId) continue;
            double mx = logits.at(0, y, x);
            for (int k = 1; k < c; ++k) mx = std::max(mx, logits.at(k, y, x));
            double lse = 0.0;
            for (int k = 0; k < c; ++k) lse += std::exp(logits.at(k, y, x) - mx);
            lse = mx + std::log(lse);
            for (int k = 0; k < c; ++k) q[k] = std::exp(logits.at(k, y, x) - lse);

            const double dp = delta ? delta->at(y, x) : 1.0;
            const double qt = q[t];
            const double log_qt = logits.at(t, y, x) - lse;
            const double focal = std::exp(gamma * (1.0 - qt));
            const double pixel_loss = -dp * focal * log_qt;
            r.per_pixel.at(y, x) = pixel_loss;
            total += pixel_loss;

            // dL/dq_t, then chain through softmax: dq_t/dl_k = q_t(1[t=k] - q_k).
            const double dl_dqt = -dp * focal * (1.0 / qt - gamma * log_qt);
            for (int k = 0; k < c; ++k) {
                const double dqt_dlk = qt * ((k == t ? 1.0 : 0.0) - q[k]);
                r.grad_logits.at(k, y, x) = dl_dqt * dqt_dlk * inv_n;
            }
        }
    }
    r.loss = total * inv_n;
    if (!std::isfinite(r.loss) || !r.grad_logits.all_finite())
        throw std::runtime_error("seg_loss: non-finite result");
    return r;
}

}  // namespace

SegLossResult focal_seg_loss(const Tensor& logits, const LabelMap& labels,
                             const WeightMaps& weights, double gamma) {
    if (weights.delta.shape != std::vector<int>{logits.shape[1], logits.shape[2]})
        throw std::invalid_argument("focal_seg_loss: weight map not aligned with logits");
    return seg_loss_impl(logits, labels, &weights.delta, gamma);
}

SegLossResult cross_entropy_baseline(const Tensor& logits, const LabelMap& labels) {
    return seg_loss_impl(logits, labels, nullptr, 0.0);
}

void write_freq_cache(const std::string& path, const ClassFrequencyTable& table) {
    nlohmann::json j;
    j["num_classes"] = table.num_classes;
    j["total_nonvoid"] = table.total_nonvoid;
    j["split_hash"] = table.split_hash;
    nlohmann::json counts = nlohmann::json::object();
    for (int c = 0; c < table.num_classes; ++c) counts[std::to_string(c)] = table.freq[c];
    j["counts"] = counts;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_freq_cache: cannot open " + path);
    out << j.dump(2) << "\n";
}

ClassFrequencyTable read_freq_cache(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_freq_cache: cannot open " + path);
    nlohmann::json j;
    in >> j;
    ClassFrequencyTable t;
    t.num_classes = j.at("num_classes").get<int>();
    t.total_nonvoid = j.at("total_nonvoid").get<std::int64_t>();
    t.split_hash = j.at("split_hash").get<std::string>();
    t.freq.assign(t.num_classes, 0);
    for (int c = 0; c < t.num_classes; ++c)
        t.freq[c] = j.at("counts").at(std::to_string(c)).get<std::int64_t>();
    return t;
}

}  // namespace dcseg
