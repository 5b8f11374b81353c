#pragma once

#include <cstdint>
#include <vector>

#include "candlecast/direction.hpp"

namespace candlecast {

/// Binary confusion counts with Up as the positive class.
struct ConfusionMatrix {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fn = 0;

    std::uint64_t total() const { return tp + fp + tn + fn; }
};

/// Tallies predictions against truths. Lengths must match and be >= 1.
ConfusionMatrix confusion(const std::vector<Direction>& truths,
                          const std::vector<Direction>& predictions);

// Each statistic returns 0.0 when its denominator is zero.
double sensitivity(const ConfusionMatrix& cm);  // TP / (TP + FN)
double specificity(const ConfusionMatrix& cm);  // TN / (TN + FP)
double accuracy(const ConfusionMatrix& cm);     // (TP + TN) / total
double mcc(const ConfusionMatrix& cm);
double f_measure(const ConfusionMatrix& cm);    // harmonic mean of precision and recall

struct MetricSet {
    double sensitivity = 0.0;
    double specificity = 0.0;
    double accuracy = 0.0;
    double mcc = 0.0;
    double f_measure = 0.0;
};

MetricSet compute_metrics(const ConfusionMatrix& cm);

} // namespace candlecast
