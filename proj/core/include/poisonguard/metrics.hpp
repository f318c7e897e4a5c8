#pragma once

#include <cstddef>
#include <vector>

namespace poisonguard {

// Attack is the positive class throughout.
struct ConfusionMatrix {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;

    std::size_t total() const { return tp + fp + tn + fn; }

    // predictions/labels: 1 = Attack, 0 = Normal.
    static ConfusionMatrix from_predictions(const std::vector<int>& predictions,
                                            const std::vector<int>& labels);

    bool operator==(const ConfusionMatrix&) const = default;
};

struct MetricsReport {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double fpr = 0.0;
    double fnr = 0.0;

    bool operator==(const MetricsReport&) const = default;
};

// Standard formulas; any metric whose denominator is zero is defined as 0.
MetricsReport compute_metrics(const ConfusionMatrix& cm);

// Field-wise arithmetic mean; empty input is invalid.
MetricsReport mean_metrics(const std::vector<MetricsReport>& reports);

}  // namespace poisonguard
