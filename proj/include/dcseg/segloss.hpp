#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dcseg/common.hpp"
#include "dcseg/tensor.hpp"

namespace dcseg {

/// Dataset-wide class pixel frequencies; frozen after the counting pass.
struct ClassFrequencyTable {
    std::vector<std::int64_t> freq; // per class, size C
    std::int64_t total_nonvoid = 0; // N_p
    int num_classes = 0;
    std::string split_hash;
};

ClassFrequencyTable count_class_frequencies(const std::vector<LabelMap>& split, int num_classes);

/// (ln(1 + eps + freq_c / N_p))^{-1}
double class_balance_weight(const ClassFrequencyTable& table, int c, double eps = 0.1);

/// Per-pixel weights: class balance times exp(-d_EDT / (2 sigma)). Void
/// pixels carry weight 0. Component maps kept for inspection.
struct WeightMaps {
    Tensor delta;      // [H,W]
    Tensor balance;    // [H,W]
    Tensor edt_factor; // [H,W]
    double sigma_edt = 0.0;
};

WeightMaps build_weight_maps(const LabelMap& labels, const ClassFrequencyTable& table,
                             double sigma_edt, double eps = 0.1);

struct SegLossResult {
    double loss = 0.0;
    Tensor grad_logits;   // [C,H,W]
    Tensor per_pixel;     // [H,W] diagnostic
    int pixels_scored = 0;
};

/// Exponential-form focal loss, mean over non-void pixels:
/// loss(p) = -delta(p) * e^{gamma (1 - P_t)} * log(P_t).
SegLossResult focal_seg_loss(const Tensor& logits, const LabelMap& labels,
                             const WeightMaps& weights, double gamma);

/// Plain unweighted mean cross-entropy over non-void pixels.
SegLossResult cross_entropy_baseline(const Tensor& logits, const LabelMap& labels);

// Frequency cache file: class id -> count plus N_p and source split hash.
void write_freq_cache(const std::string& path, const ClassFrequencyTable& table);
ClassFrequencyTable read_freq_cache(const std::string& path);

}  // namespace dcseg
