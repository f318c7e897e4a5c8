#include "poisonguard/train.hpp"

#include <algorithm>
#include <numeric>

#include "poisonguard/error.hpp"
#include "poisonguard/stratify.hpp"

namespace poisonguard::nn {

TrainConfig default_train_config(Scenario scenario) {
    TrainConfig cfg;
    if (scenario == Scenario::Default) {
        cfg.balanced_class_weights = false;
        cfg.class_weights = {1.0, 1.0};
        cfg.l1_coeff = 0.0;
        cfg.l2_coeff = 0.0;
        cfg.folds = 1;  // single holdout, no CV
    } else {
        cfg.balanced_class_weights = true;
        cfg.l1_coeff = 1e-5;
        cfg.l2_coeff = 1e-4;
        cfg.folds = 5;
    }
    return cfg;
}

std::array<double, 2> balanced_weights(const std::vector<int>& labels) {
    std::array<std::size_t, 2> counts{0, 0};
    for (int l : labels) counts[static_cast<std::size_t>(l)]++;
    if (counts[0] == 0 || counts[1] == 0) {
        throw StratificationError("balanced weights need both classes present");
    }
    double n = static_cast<double>(labels.size());
    // w_c = N / (2 * N_c): sample-mean weight is exactly 1.
    return {n / (2.0 * static_cast<double>(counts[0])),
            n / (2.0 * static_cast<double>(counts[1]))};
}

Tensor batch_tensor(const std::vector<PairedSample>& samples,
                    const std::vector<std::size_t>& indices) {
    Tensor batch({indices.size(), 1, kGridSide, kGridSide});
    double* dst = batch.data();
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const auto& grid = samples[indices[k]].grid;
        for (std::size_t i = 0; i < kGridSize; ++i) dst[k * kGridSize + i] = grid[i];
    }
    return batch;
}

namespace {

std::vector<int> sample_labels(const std::vector<PairedSample>& samples,
                               const std::vector<std::size_t>& indices) {
    std::vector<int> labels(indices.size());
    for (std::size_t k = 0; k < indices.size(); ++k) {
        labels[k] = samples[indices[k]].label == SampleLabel::Attack ? 1 : 0;
    }
    return labels;
}

// Momentum SGD state, one velocity buffer per parameter tensor.
class SgdOptimizer {
public:
    SgdOptimizer(Network& net, double lr, double momentum) : lr_(lr), momentum_(momentum) {
        for (auto& p : net.parameters()) velocities_.emplace_back(p.value->shape());
    }

    void set_learning_rate(double lr) { lr_ = lr; }

    void step(Network& net) {
        auto params = net.parameters();
        for (std::size_t i = 0; i < params.size(); ++i) {
            Tensor& v = velocities_[i];
            Tensor& w = *params[i].value;
            const Tensor& g = *params[i].grad;
            for (std::size_t j = 0; j < w.size(); ++j) {
                v[j] = momentum_ * v[j] - lr_ * g[j];
                w[j] += v[j];
            }
        }
    }

private:
    double lr_, momentum_;
    std::vector<Tensor> velocities_;
};

}  // namespace

TrainResult train_network(Network& net, const std::vector<PairedSample>& samples,
                          const TrainConfig& config) {
    if (samples.empty()) throw std::invalid_argument("train_network: no samples");
    if (config.learning_rate <= 0.0) throw std::invalid_argument("learning_rate must be > 0");
    if (config.epochs < 1 || config.batch_size < 1) {
        throw std::invalid_argument("epochs and batch_size must be >= 1");
    }

    TrainConfig cfg = config;
    std::vector<std::size_t> all(samples.size());
    std::iota(all.begin(), all.end(), 0);
    if (cfg.balanced_class_weights) {
        cfg.class_weights = balanced_weights(sample_labels(samples, all));
    }

    net.reseed_dropout(derive_seed(cfg.seed, "dropout-stream"));
    Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));
    SgdOptimizer opt(net, cfg.learning_rate, cfg.momentum);

    TrainResult result;
    std::vector<std::size_t> order = all;
    const std::size_t decay_epoch =
        cfg.lr_decay_factor != 1.0
            ? static_cast<std::size_t>(cfg.lr_decay_at * static_cast<double>(cfg.epochs))
            : cfg.epochs;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (epoch == decay_epoch && epoch > 0) {
            opt.set_learning_rate(cfg.learning_rate * cfg.lr_decay_factor);
        }
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double epoch_loss = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            std::size_t end = std::min(order.size(), start + cfg.batch_size);
            std::vector<std::size_t> batch_idx(order.begin() + start, order.begin() + end);

            Tensor batch = batch_tensor(samples, batch_idx);
            std::vector<int> labels = sample_labels(samples, batch_idx);

            net.zero_grads();
            Tensor logits = net.forward(batch, true);
            LossResult loss = softmax_cross_entropy(logits, labels, cfg.class_weights);
            net.backward(loss.dlogits);
            add_regularization_gradients(net, cfg.l1_coeff, cfg.l2_coeff);
            opt.step(net);

            epoch_loss += loss.loss + regularization_penalty(net, cfg.l1_coeff, cfg.l2_coeff);
            ++n_batches;
        }
        result.epoch_losses.push_back(epoch_loss / static_cast<double>(n_batches));
    }
    return result;
}

std::vector<double> predict_attack_probabilities(Network& net,
                                                 const std::vector<PairedSample>& samples,
                                                 std::size_t batch_size) {
    std::vector<double> probs;
    probs.reserve(samples.size());
    for (std::size_t start = 0; start < samples.size(); start += batch_size) {
        std::size_t end = std::min(samples.size(), start + batch_size);
        std::vector<std::size_t> idx(end - start);
        std::iota(idx.begin(), idx.end(), start);
        Tensor logits = net.forward(batch_tensor(samples, idx), false);
        Tensor p = softmax2(logits);
        for (std::size_t i = 0; i < idx.size(); ++i) probs.push_back(p.at2(i, 1));
    }
    return probs;
}

double predict_proba(const TrainedModel& model, const PairedSample& sample) {
    if (!model.is_trained()) throw StateError("predict_proba on an untrained model");
    return predict_attack_probabilities(*model.network, {sample}).front();
}

MetricsReport evaluate_samples(Network& net, const std::vector<PairedSample>& samples) {
    auto probs = predict_attack_probabilities(net, samples);
    std::vector<int> preds(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) preds[i] = probs[i] >= 0.5 ? 1 : 0;
    std::vector<std::size_t> all(samples.size());
    std::iota(all.begin(), all.end(), 0);
    return compute_metrics(ConfusionMatrix::from_predictions(preds, sample_labels(samples, all)));
}

TrainedModel train_stratified_cv(const std::vector<PairedSample>& dataset,
                                 const NetworkSpec& spec, const TrainConfig& config) {
    if (dataset.empty()) throw std::invalid_argument("train_stratified_cv: empty dataset");

    TrainedModel model;
    model.spec = spec;
    model.config = config;

    std::vector<std::size_t> all(dataset.size());
    std::iota(all.begin(), all.end(), 0);
    std::vector<int> labels = sample_labels(dataset, all);

    if (config.folds >= 2) {
        auto fold_of = stratified_fold_assignment(labels, config.folds,
                                                  derive_seed(config.seed, "cv-folds"));
        for (std::size_t fold = 0; fold < config.folds; ++fold) {
            std::vector<PairedSample> train, val;
            for (std::size_t i = 0; i < dataset.size(); ++i) {
                (fold_of[i] == fold ? val : train).push_back(dataset[i]);
            }
            TrainConfig fold_cfg = config;
            fold_cfg.seed = derive_seed(config.seed, "fold", fold);
            Network net(spec, derive_seed(fold_cfg.seed, "net-init"));
            train_network(net, train, fold_cfg);
            model.fold_metrics.push_back(evaluate_samples(net, val));
        }
    }

    TrainConfig final_cfg = config;
    final_cfg.seed = derive_seed(config.seed, "final");
    if (config.balanced_class_weights) {
        final_cfg.class_weights = balanced_weights(labels);
        final_cfg.balanced_class_weights = false;  // record the resolved weights
    }
    auto net = std::make_shared<Network>(spec, derive_seed(final_cfg.seed, "net-init"));
    TrainResult res = train_network(*net, dataset, final_cfg);
    model.network = std::move(net);
    model.loss_curve = std::move(res.epoch_losses);
    model.config = final_cfg;
    return model;
}

TrainConfig grid_search(const std::vector<PairedSample>& dataset, const NetworkSpec& spec,
                        const TrainConfig& base, const TrainGrid& grid) {
    if (grid.learning_rates.empty() || grid.l1_coeffs.empty() || grid.l2_coeffs.empty()) {
        throw std::invalid_argument("grid_search: every grid axis needs at least one value");
    }
    if (base.folds < 2) {
        throw std::invalid_argument("grid_search needs cross-validation (folds >= 2)");
    }

    struct Candidate {
        TrainConfig cfg;
        double mean_f1 = -1.0;
    };
    Candidate best;

    for (double lr : grid.learning_rates) {
        for (double l1 : grid.l1_coeffs) {
            for (double l2 : grid.l2_coeffs) {
                TrainConfig cfg = base;
                cfg.learning_rate = lr;
                cfg.l1_coeff = l1;
                cfg.l2_coeff = l2;
                TrainedModel m = train_stratified_cv(dataset, spec, cfg);
                double mean_f1 = 0.0;
                for (const auto& fm : m.fold_metrics) mean_f1 += fm.f1;
                mean_f1 /= static_cast<double>(m.fold_metrics.size());

                bool better = mean_f1 > best.mean_f1;
                if (!better && mean_f1 == best.mean_f1) {
                    if (l2 < best.cfg.l2_coeff) better = true;
                    else if (l2 == best.cfg.l2_coeff && lr < best.cfg.learning_rate) better = true;
                }
                if (better) best = {cfg, mean_f1};
            }
        }
    }
    return best.cfg;
}

}  // namespace poisonguard::nn
