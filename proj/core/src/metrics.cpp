#include "candlecast/metrics.hpp"

#include <cmath>

#include "candlecast/error.hpp"

namespace candlecast {

ConfusionMatrix confusion(const std::vector<Direction>& truths,
                          const std::vector<Direction>& predictions) {
    if (truths.size() != predictions.size())
        throw ContractError("confusion: truths and predictions differ in length");
    if (truths.empty()) throw ContractError("confusion: empty input");

    ConfusionMatrix cm;
    for (std::size_t i = 0; i < truths.size(); ++i) {
        const bool truth_up = truths[i] == Direction::Up;
        const bool pred_up = predictions[i] == Direction::Up;
        if (truth_up && pred_up) ++cm.tp;
        else if (!truth_up && pred_up) ++cm.fp;
        else if (!truth_up && !pred_up) ++cm.tn;
        else ++cm.fn;
    }
    return cm;
}

namespace {
double ratio(std::uint64_t num, std::uint64_t den) {
    return den == 0 ? 0.0 : double(num) / double(den);
}
} // namespace

double sensitivity(const ConfusionMatrix& cm) { return ratio(cm.tp, cm.tp + cm.fn); }
double specificity(const ConfusionMatrix& cm) { return ratio(cm.tn, cm.tn + cm.fp); }
double accuracy(const ConfusionMatrix& cm) { return ratio(cm.tp + cm.tn, cm.total()); }

double mcc(const ConfusionMatrix& cm) {
    const double tp = double(cm.tp), fp = double(cm.fp), tn = double(cm.tn), fn = double(cm.fn);
    const double den2 = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
    if (den2 == 0.0) return 0.0;
    return (tp * tn - fp * fn) / std::sqrt(den2);
}

double f_measure(const ConfusionMatrix& cm) {
    if (cm.tp + cm.fp == 0 || cm.tp + cm.fn == 0) return 0.0;
    const double precision = double(cm.tp) / double(cm.tp + cm.fp);
    const double recall = double(cm.tp) / double(cm.tp + cm.fn);
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

MetricSet compute_metrics(const ConfusionMatrix& cm) {
    return {sensitivity(cm), specificity(cm), accuracy(cm), mcc(cm), f_measure(cm)};
}

} // namespace candlecast
