#include "dcseg/metrics.hpp"

#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace dcseg {

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
    if (other.num_classes != num_classes)
        throw std::invalid_argument("ConfusionMatrix::merge: class count mismatch");
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
}

void confusion_update(ConfusionMatrix& cm, const LabelMap& predicted, const LabelMap& truth) {
    if (predicted.height != truth.height || predicted.width != truth.width)
        throw std::invalid_argument("confusion_update: map shape mismatch");
    for (std::size_t i = 0; i < truth.ids.size(); ++i) {
        const std::uint8_t t = truth.ids[i];
        if (t == kVoidId) continue;
        const std::uint8_t p = predicted.ids[i];
        if (t >= cm.num_classes || p >= cm.num_classes)
            throw std::invalid_argument("confusion_update: class id out of range");
        ++cm.at(t, p);
    }
}

double iou(const ConfusionMatrix& cm, int c) {
    if (cm.num_classes == 0 || cm.total() == 0) throw std::invalid_argument("iou: empty matrix");
    std::int64_t row = 0, col = 0;
    for (int k = 0; k < cm.num_classes; ++k) {
        row += cm.at(c, k);
        col += cm.at(k, c);
    }
    const std::int64_t uni = row + col - cm.at(c, c);
    if (uni == 0) return -1.0;
    return static_cast<double>(cm.at(c, c)) / static_cast<double>(uni);
}

double miou(const ConfusionMatrix& cm) {
    double sum = 0.0;
    int included = 0;
    for (int c = 0; c < cm.num_classes; ++c) {
        const double v = iou(cm, c);
        if (v < 0.0) continue;
        sum += v;
        ++included;
    }
    if (included == 0) throw std::runtime_error("miou: no class with nonzero union");
    return sum / included;
}

ConditionReport condition_report(const std::vector<ConfusionMatrix>& per_sample,
                                 const std::vector<Condition>& condition_labels) {
    if (per_sample.size() != condition_labels.size())
        throw std::invalid_argument("condition_report: sample/label count mismatch");
    if (per_sample.empty()) throw std::invalid_argument("condition_report: no samples");

    const int c = per_sample[0].num_classes;
    ConfusionMatrix overall(c);
    ConfusionMatrix per_cond[kNumConditions] = {ConfusionMatrix(c), ConfusionMatrix(c),
                                                ConfusionMatrix(c), ConfusionMatrix(c)};
    for (std::size_t i = 0; i < per_sample.size(); ++i) {
        const int cond = static_cast<int>(condition_labels[i]);
        if (cond < 0 || cond >= kNumConditions)
            throw std::invalid_argument("condition_report: unknown condition tag");
        overall.merge(per_sample[i]);
        per_cond[cond].merge(per_sample[i]);
    }

    ConditionReport rep;
    rep.overall = miou(overall);
    for (int k = 0; k < kNumConditions; ++k)
        rep.per_condition[k] = per_cond[k].total() > 0 ? miou(per_cond[k]) : -1.0;
    for (int cls = 0; cls < c; ++cls) {
        const double v = iou(overall, cls);
        rep.per_class.push_back(v);
        if (v < 0.0) rep.excluded_classes.push_back(cls);
    }
    return rep;
}

std::string report_to_json(const ConditionReport& report) {
    nlohmann::json j;
    j["overall"] = report.overall;
    nlohmann::json pc = nlohmann::json::object();
    for (int k = 0; k < kNumConditions; ++k)
        pc[condition_name(static_cast<Condition>(k))] = report.per_condition[k];
    j["per_condition"] = pc;
    j["per_class"] = report.per_class;
    j["excluded_classes"] = report.excluded_classes;
    return j.dump(2);
}

std::string report_to_csv(const ConditionReport& report) {
    std::ostringstream os;
    os << "overall,fog,night,rain,snow\n";
    os.precision(10);
    os << report.overall;
    for (int k = 0; k < kNumConditions; ++k) os << "," << report.per_condition[k];
    os << "\n";
    return os.str();
}

}  // namespace dcseg
