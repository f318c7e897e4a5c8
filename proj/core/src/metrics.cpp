#include "poisonguard/metrics.hpp"

#include <stdexcept>

namespace poisonguard {

ConfusionMatrix ConfusionMatrix::from_predictions(const std::vector<int>& predictions,
                                                  const std::vector<int>& labels) {
    if (predictions.size() != labels.size()) {
        throw std::invalid_argument("predictions and labels differ in length");
    }
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (labels[i] == 1) {
            (predictions[i] == 1 ? cm.tp : cm.fn)++;
        } else {
            (predictions[i] == 1 ? cm.fp : cm.tn)++;
        }
    }
    return cm;
}

namespace {

double ratio(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

MetricsReport compute_metrics(const ConfusionMatrix& cm) {
    if (cm.total() == 0) {
        throw std::invalid_argument("compute_metrics: empty confusion matrix");
    }
    MetricsReport r;
    r.accuracy = ratio(cm.tp + cm.tn, cm.total());
    r.precision = ratio(cm.tp, cm.tp + cm.fp);
    r.recall = ratio(cm.tp, cm.tp + cm.fn);
    r.f1 = (r.precision + r.recall) > 0.0
               ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
               : 0.0;
    r.fpr = ratio(cm.fp, cm.fp + cm.tn);
    r.fnr = ratio(cm.fn, cm.fn + cm.tp);
    return r;
}

MetricsReport mean_metrics(const std::vector<MetricsReport>& reports) {
    if (reports.empty()) {
        throw std::invalid_argument("mean_metrics: no reports");
    }
    MetricsReport m;
    for (const auto& r : reports) {
        m.accuracy += r.accuracy;
        m.precision += r.precision;
        m.recall += r.recall;
        m.f1 += r.f1;
        m.fpr += r.fpr;
        m.fnr += r.fnr;
    }
    auto n = static_cast<double>(reports.size());
    m.accuracy /= n;
    m.precision /= n;
    m.recall /= n;
    m.f1 /= n;
    m.fpr /= n;
    m.fnr /= n;
    return m;
}

}  // namespace poisonguard
