#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dcseg/common.hpp"

namespace dcseg {

/// C x C counts; entry (t, p) = pixels of true class t predicted as p.
/// Void-true pixels are excluded at update time.
struct ConfusionMatrix {
    int num_classes = 0;
    std::vector<std::int64_t> counts;

    explicit ConfusionMatrix(int c = 0)
        : num_classes(c), counts(static_cast<std::size_t>(c) * c, 0) {}
    std::int64_t& at(int t, int p) { return counts[static_cast<std::size_t>(t) * num_classes + p]; }
    std::int64_t at(int t, int p) const {
        return counts[static_cast<std::size_t>(t) * num_classes + p];
    }
    std::int64_t total() const {
        std::int64_t s = 0;
        for (auto v : counts) s += v;
        return s;
    }
    void merge(const ConfusionMatrix& other);
};

void confusion_update(ConfusionMatrix& cm, const LabelMap& predicted, const LabelMap& truth);

/// IoU_c = cm[c,c] / (row_c + col_c - cm[c,c]); -1 when the union is empty
/// (class absent, excluded from the mean).
double iou(const ConfusionMatrix& cm, int c);
double miou(const ConfusionMatrix& cm);

struct ConditionReport {
    double overall = 0.0;
    double per_condition[kNumConditions] = {0, 0, 0, 0};
    std::vector<double> per_class;       // -1 for absent classes
    std::vector<int> excluded_classes;
};

ConditionReport condition_report(const std::vector<ConfusionMatrix>& per_sample,
                                 const std::vector<Condition>& condition_labels);

std::string report_to_json(const ConditionReport& report);
std::string report_to_csv(const ConditionReport& report);

}  // namespace dcseg
