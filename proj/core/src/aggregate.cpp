#include "poisonguard/aggregate.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "poisonguard/error.hpp"
#include "poisonguard/stratify.hpp"

namespace poisonguard {

std::vector<AccountPoint> aggregate_probabilities(const nn::TrainedModel& model,
                                                  const Corpus& corpus, std::uint64_t seed,
                                                  std::uint32_t expected_runs) {
    if (!model.is_trained()) throw StateError("aggregate_probabilities: untrained model");
    if (corpus.run_count != expected_runs) {
        throw ConfigError("corpus has " + std::to_string(corpus.run_count) +
                          " runs per slot, expected " + std::to_string(expected_runs));
    }

    // One paired sample per (account, run), then score the whole batch.
    std::vector<PairedSample> samples = build_dataset(corpus, seed);
    std::vector<double> probs = nn::predict_attack_probabilities(*model.network, samples);

    std::vector<AccountPoint> points;
    points.reserve(corpus.accounts.size());
    std::size_t idx = 0;
    for (const auto& acct : corpus.accounts) {
        AccountPoint p;
        p.account_id = acct.account_id;
        p.label = acct.is_victim() ? 1 : 0;
        p.probs.assign(probs.begin() + static_cast<std::ptrdiff_t>(idx),
                       probs.begin() + static_cast<std::ptrdiff_t>(idx + corpus.run_count));
        idx += corpus.run_count;
        points.push_back(std::move(p));
    }
    return points;
}

namespace {

double sq_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

}  // namespace

void smote(std::vector<std::vector<double>>& points, std::vector<int>& labels,
           std::size_t k_neighbors, std::uint64_t seed) {
    if (points.size() != labels.size()) {
        throw std::invalid_argument("smote: points/labels length mismatch");
    }
    if (k_neighbors < 1) throw std::invalid_argument("smote: k_neighbors must be >= 1");

    std::array<std::size_t, 2> counts{0, 0};
    for (int l : labels) {
        if (l != 0 && l != 1) throw std::invalid_argument("smote: labels must be 0/1");
        counts[static_cast<std::size_t>(l)]++;
    }
    if (counts[0] == counts[1]) return;
    int minority = counts[1] < counts[0] ? 1 : 0;
    std::size_t deficit = counts[1 - minority] - counts[minority];

    std::vector<std::size_t> minority_idx;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == minority) minority_idx.push_back(i);
    }
    if (minority_idx.size() < 2) {
        throw ResamplingError("smote needs at least 2 minority samples");
    }

    // k nearest same-class neighbours per minority point, precomputed.
    std::size_t k = std::min(k_neighbors, minority_idx.size() - 1);
    std::vector<std::vector<std::size_t>> neighbors(minority_idx.size());
    for (std::size_t a = 0; a < minority_idx.size(); ++a) {
        std::vector<std::pair<double, std::size_t>> dist;
        dist.reserve(minority_idx.size() - 1);
        for (std::size_t b = 0; b < minority_idx.size(); ++b) {
            if (a == b) continue;
            dist.emplace_back(sq_distance(points[minority_idx[a]], points[minority_idx[b]]), b);
        }
        std::sort(dist.begin(), dist.end());
        for (std::size_t j = 0; j < k; ++j) neighbors[a].push_back(dist[j].second);
    }

    Rng rng(derive_seed(seed, "smote"));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> pick_nn(0, k - 1);
    for (std::size_t s = 0; s < deficit; ++s) {
        std::size_t a = s % minority_idx.size();  // round-robin over the minority
        const auto& base = points[minority_idx[a]];
        const auto& nn_pt = points[minority_idx[neighbors[a][pick_nn(rng)]]];
        double lambda = unit(rng);
        std::vector<double> synth(base.size());
        for (std::size_t i = 0; i < base.size(); ++i) {
            synth[i] = base[i] + lambda * (nn_pt[i] - base[i]);
        }
        points.push_back(std::move(synth));
        labels.push_back(minority);
    }
}

KnnModel knn_fit(std::vector<std::vector<double>> points, std::vector<int> labels,
                 std::size_t k) {
    if (points.size() != labels.size()) {
        throw std::invalid_argument("knn_fit: points/labels length mismatch");
    }
    if (k < 1 || k % 2 == 0) throw std::invalid_argument("knn_fit: k must be odd and >= 1");
    if (points.size() < k) {
        throw std::invalid_argument("knn_fit: need at least k points, have " +
                                    std::to_string(points.size()));
    }
    for (std::size_t i = 1; i < points.size(); ++i) {
        if (points[i].size() != points[0].size()) {
            throw DimensionError("knn_fit: inconsistent point dimensions");
        }
    }
    return KnnModel{std::move(points), std::move(labels), k};
}

int knn_predict(const KnnModel& model, const std::vector<double>& point) {
    if (model.points.empty()) throw StateError("knn_predict: model not fitted");
    if (point.size() != model.points[0].size()) {
        throw DimensionError("knn_predict: query dimension mismatch");
    }
    std::vector<std::pair<double, std::size_t>> dist;
    dist.reserve(model.points.size());
    for (std::size_t i = 0; i < model.points.size(); ++i) {
        dist.emplace_back(sq_distance(point, model.points[i]), i);
    }
    // ties on distance resolve to the smaller insertion index
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(model.k),
                      dist.end());
    std::size_t votes = 0;
    for (std::size_t j = 0; j < model.k; ++j) {
        votes += static_cast<std::size_t>(model.labels[dist[j].second]);
    }
    return votes * 2 > model.k ? 1 : 0;
}

namespace {

std::vector<int> point_labels(const std::vector<AccountPoint>& points) {
    std::vector<int> labels(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) labels[i] = points[i].label;
    return labels;
}

std::vector<std::vector<double>> point_coords(const std::vector<AccountPoint>& points,
                                              const std::vector<std::size_t>& idx) {
    std::vector<std::vector<double>> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(points[i].probs);
    return out;
}

std::vector<int> label_subset(const std::vector<int>& labels,
                              const std::vector<std::size_t>& idx) {
    std::vector<int> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(labels[i]);
    return out;
}

}  // namespace

ClassificationResult classify_accounts(const std::vector<AccountPoint>& points,
                                       KnnImplementation mode, std::uint64_t seed,
                                       std::size_t k) {
    std::vector<int> labels = point_labels(points);
    std::array<std::size_t, 2> counts{0, 0};
    for (int l : labels) counts[static_cast<std::size_t>(l)]++;
    if (counts[0] < 2 || counts[1] < 2) {
        throw StratificationError("classify_accounts needs at least 2 accounts per class");
    }

    ClassificationResult result;
    result.predicted.assign(points.size(), 0);

    if (mode == KnnImplementation::DefaultImpl) {
        // stratified 80/20 holdout, classifier fitted on the raw points
        auto fold_of = stratified_fold_assignment(labels, 5, derive_seed(seed, "holdout"));
        std::vector<std::size_t> train_idx, test_idx;
        for (std::size_t i = 0; i < points.size(); ++i) {
            (fold_of[i] == 0 ? test_idx : train_idx).push_back(i);  // fold 0 = the 20%
        }
        KnnModel knn = knn_fit(point_coords(points, train_idx), label_subset(labels, train_idx), k);
        for (std::size_t i = 0; i < points.size(); ++i) {
            result.predicted[i] = knn_predict(knn, points[i].probs);
        }
        std::vector<int> test_pred, test_truth;
        for (auto i : test_idx) {
            test_pred.push_back(result.predicted[i]);
            test_truth.push_back(labels[i]);
        }
        result.fold_metrics.push_back(
            compute_metrics(ConfusionMatrix::from_predictions(test_pred, test_truth)));
        result.fold_eval_sizes.push_back(test_idx.size());
    } else {
        constexpr std::size_t kFolds = 5;
        auto fold_of = stratified_fold_assignment(labels, kFolds, derive_seed(seed, "cv"));
        for (std::size_t fold = 0; fold < kFolds; ++fold) {
            std::vector<std::size_t> train_idx, val_idx;
            for (std::size_t i = 0; i < points.size(); ++i) {
                (fold_of[i] == fold ? val_idx : train_idx).push_back(i);
            }
            auto train_pts = point_coords(points, train_idx);
            auto train_lbl = label_subset(labels, train_idx);
            // SMOTE strictly inside the training fold; validation stays raw
            smote(train_pts, train_lbl, 5, derive_seed(seed, "smote", fold));
            KnnModel knn = knn_fit(std::move(train_pts), std::move(train_lbl), k);

            std::vector<int> val_pred, val_truth;
            for (auto i : val_idx) {
                int p = knn_predict(knn, points[i].probs);
                result.predicted[i] = p;
                val_pred.push_back(p);
                val_truth.push_back(labels[i]);
            }
            result.fold_metrics.push_back(
                compute_metrics(ConfusionMatrix::from_predictions(val_pred, val_truth)));
            result.fold_eval_sizes.push_back(val_idx.size());
        }
    }
    result.summary = mean_metrics(result.fold_metrics);
    return result;
}

void save_account_points(const std::vector<AccountPoint>& points,
                         const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());

    std::size_t dim = points.empty() ? 10 : points[0].probs.size();
    out << "account_id,label";
    for (std::size_t i = 0; i < dim; ++i) out << ",p" << i;
    out << "\n";
    char buf[32];
    for (const auto& p : points) {
        out << p.account_id << "," << (p.label ? "attack" : "normal");
        for (double v : p.probs) {
            auto res = std::to_chars(buf, buf + sizeof(buf), v);
            out << ',' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
        }
        out << "\n";
    }
    if (!out) throw IoError("write failed: " + path.string());
}

std::vector<AccountPoint> load_account_points(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty points file", 0);
    std::size_t line_no = 1;

    std::vector<AccountPoint> points;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell;
        AccountPoint p;
        if (!std::getline(row, cell, ',')) throw ParseError("missing account_id", line_no);
        p.account_id = cell;
        if (!std::getline(row, cell, ',')) throw ParseError("missing label", line_no);
        if (cell == "attack") p.label = 1;
        else if (cell == "normal") p.label = 0;
        else throw ParseError("unknown label '" + cell + "'", line_no);
        while (std::getline(row, cell, ',')) {
            double v{};
            auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (res.ec != std::errc{}) throw ParseError("bad probability", line_no);
            p.probs.push_back(v);
        }
        points.push_back(std::move(p));
    }
    return points;
}

}  // namespace poisonguard
