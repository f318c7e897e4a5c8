#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "poisonguard/corpus.hpp"
#include "poisonguard/metrics.hpp"
#include "poisonguard/train.hpp"

namespace poisonguard {

// Per-account detector summary: one CNN probability per embedding run,
// collected in run order.
struct AccountPoint {
    std::string account_id;
    std::vector<double> probs;  // run_count entries, each in [0,1]
    int label = 0;              // 1 = Attack (victim account), 0 = Normal

    bool operator==(const AccountPoint&) const = default;
};

// Brute-force k-nearest-neighbour classifier over account points.
// Distance ties break toward the smaller insertion index.
struct KnnModel {
    std::vector<std::vector<double>> points;
    std::vector<int> labels;
    std::size_t k = 11;
};

// Build one point per account: for each run, pair-and-interleave the
// account (pairing module), score with the CNN, collect in run order.
// run_count must equal expected_runs (default 10) unless overridden.
std::vector<AccountPoint> aggregate_probabilities(const nn::TrainedModel& model,
                                                  const Corpus& corpus, std::uint64_t seed,
                                                  std::uint32_t expected_runs = 10);

// Synthetic minority oversampling: new points are uniform interpolations
// toward one of the k nearest same-class neighbours, appended until the
// classes balance. Originals are kept unchanged, in order.
void smote(std::vector<std::vector<double>>& points, std::vector<int>& labels,
           std::size_t k_neighbors, std::uint64_t seed);

KnnModel knn_fit(std::vector<std::vector<double>> points, std::vector<int> labels,
                 std::size_t k = 11);

int knn_predict(const KnnModel& model, const std::vector<double>& point);

enum class KnnImplementation { DefaultImpl, ProposedImpl };

struct ClassificationResult {
    // prediction per input point, aligned with the input order
    std::vector<int> predicted;
    std::vector<MetricsReport> fold_metrics;  // one per fold (Proposed) or one (Default)
    std::vector<std::size_t> fold_eval_sizes;  // points evaluated per fold, SMOTE-free
    MetricsReport summary;                     // mean of fold_metrics
};

// DefaultImpl: fit k-NN on a stratified 80% of the points, evaluate on the
// held-out 20%. ProposedImpl: stratified 5-fold over accounts with SMOTE
// applied inside each training fold only; out-of-fold predictions.
ClassificationResult classify_accounts(const std::vector<AccountPoint>& points,
                                       KnnImplementation mode, std::uint64_t seed,
                                       std::size_t k = 11);

// CSV: `account_id,label,p0,...` one row per point.
void save_account_points(const std::vector<AccountPoint>& points,
                         const std::filesystem::path& path);
std::vector<AccountPoint> load_account_points(const std::filesystem::path& path);

}  // namespace poisonguard
