#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "poisonguard/metrics.hpp"
#include "poisonguard/rng.hpp"

using namespace poisonguard;

TEST_CASE("metric arithmetic on a known matrix") {
    ConfusionMatrix cm{92, 0, 900, 8};
    MetricsReport r = compute_metrics(cm);
    CHECK(r.recall == doctest::Approx(0.92));
    CHECK(r.accuracy == doctest::Approx(0.992));
    CHECK(r.precision == doctest::Approx(1.0));
    CHECK(r.fpr == doctest::Approx(0.0));
    CHECK(r.fnr == doctest::Approx(0.08));
}

TEST_CASE("all-correct means perfect accuracy and f1") {
    ConfusionMatrix cm{10, 0, 90, 0};
    MetricsReport r = compute_metrics(cm);
    CHECK(r.accuracy == 1.0);
    CHECK(r.f1 == 1.0);
    CHECK(r.recall == 1.0);
}

TEST_CASE("zero denominators collapse to zero by convention") {
    ConfusionMatrix cm{0, 0, 50, 0};  // no positives anywhere
    MetricsReport r = compute_metrics(cm);
    CHECK(r.recall == 0.0);
    CHECK(r.precision == 0.0);
    CHECK(r.f1 == 0.0);
    CHECK(r.fnr == 0.0);
    CHECK(r.accuracy == 1.0);

    CHECK_THROWS_AS(compute_metrics(ConfusionMatrix{}), std::invalid_argument);
}

TEST_CASE("accuracy times total recovers tp + tn exactly") {
    Rng rng(17);
    std::uniform_int_distribution<std::size_t> dist(0, 400);
    for (int trial = 0; trial < 200; ++trial) {
        ConfusionMatrix cm{dist(rng), dist(rng), dist(rng), dist(rng)};
        if (cm.total() == 0) continue;
        MetricsReport r = compute_metrics(cm);
        CHECK(std::llround(r.accuracy * static_cast<double>(cm.total())) ==
              static_cast<long long>(cm.tp + cm.tn));
    }
}

TEST_CASE("confusion from predictions matches a by-hand recount") {
    Rng rng(29);
    std::uniform_int_distribution<int> coin(0, 1);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<int> preds(57), labels(57);
        for (std::size_t i = 0; i < preds.size(); ++i) {
            preds[i] = coin(rng);
            labels[i] = coin(rng);
        }
        ConfusionMatrix cm = ConfusionMatrix::from_predictions(preds, labels);
        std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            if (labels[i] == 1 && preds[i] == 1) ++tp;
            if (labels[i] == 0 && preds[i] == 1) ++fp;
            if (labels[i] == 0 && preds[i] == 0) ++tn;
            if (labels[i] == 1 && preds[i] == 0) ++fn;
        }
        CHECK(cm == ConfusionMatrix{tp, fp, tn, fn});
        CHECK(cm.total() == preds.size());
    }
}

TEST_CASE("f1 is the harmonic mean of precision and recall") {
    ConfusionMatrix cm{30, 20, 100, 10};
    MetricsReport r = compute_metrics(cm);
    double expected = 2.0 * r.precision * r.recall / (r.precision + r.recall);
    CHECK(r.f1 == doctest::Approx(expected));
}

TEST_CASE("mean_metrics averages field-wise") {
    MetricsReport a{1.0, 1.0, 1.0, 1.0, 0.0, 0.0};
    MetricsReport b{0.5, 0.0, 0.5, 0.0, 0.5, 0.5};
    MetricsReport m = mean_metrics({a, b});
    CHECK(m.accuracy == doctest::Approx(0.75));
    CHECK(m.recall == doctest::Approx(0.75));
    CHECK(m.fpr == doctest::Approx(0.25));
    CHECK_THROWS_AS(mean_metrics({}), std::invalid_argument);
}
