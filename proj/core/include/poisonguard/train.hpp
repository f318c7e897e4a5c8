#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "poisonguard/metrics.hpp"
#include "poisonguard/network.hpp"
#include "poisonguard/pairing.hpp"

namespace poisonguard::nn {

struct TrainConfig {
    double learning_rate = 0.01;
    double momentum = 0.9;
    // Step schedule: lr multiplies by lr_decay_factor once, at
    // floor(lr_decay_at * epochs). Factor 1 keeps a constant rate.
    double lr_decay_factor = 1.0;
    double lr_decay_at = 0.6;
    std::size_t epochs = 30;
    std::size_t batch_size = 32;
    double l1_coeff = 0.0;
    double l2_coeff = 0.0;
    // Resolved per-class loss weights {Normal, Attack}. When
    // balanced_class_weights is set they are recomputed from the training
    // labels as inverse class frequency with sample-mean 1.
    std::array<double, 2> class_weights = {1.0, 1.0};
    bool balanced_class_weights = false;
    std::size_t folds = 5;  // < 2 disables cross-validation
    std::uint64_t seed = 0;

    bool operator==(const TrainConfig&) const = default;
};

// The methodology knobs per scenario: Scenario1/2 train with balanced class
// weights, L1+L2 penalties and 5-fold CV; Default turns all of that off.
TrainConfig default_train_config(Scenario scenario);

std::array<double, 2> balanced_weights(const std::vector<int>& labels);

struct TrainResult {
    std::vector<double> epoch_losses;  // mean training loss per epoch
};

// Plain mini-batch SGD with momentum over the given samples; mutates `net`.
// Fully deterministic for a fixed config seed.
TrainResult train_network(Network& net, const std::vector<PairedSample>& samples,
                          const TrainConfig& config);

struct TrainedModel {
    NetworkSpec spec;
    std::shared_ptr<Network> network;  // inference-safe once training is done
    TrainConfig config;                // with resolved class weights
    std::vector<MetricsReport> fold_metrics;
    std::vector<double> loss_curve;

    bool is_trained() const { return network != nullptr; }
};

// Stratified k-fold training: per-fold validation metrics, then a final
// model fitted on the entire dataset with the same configuration.
TrainedModel train_stratified_cv(const std::vector<PairedSample>& dataset,
                                 const NetworkSpec& spec, const TrainConfig& config);

struct TrainGrid {
    std::vector<double> learning_rates;
    std::vector<double> l1_coeffs;
    std::vector<double> l2_coeffs;
};

// Exhaustive search over the grid; each point is scored by mean fold F1.
// Ties break toward lower l2_coeff, then lower learning_rate.
TrainConfig grid_search(const std::vector<PairedSample>& dataset, const NetworkSpec& spec,
                        const TrainConfig& base, const TrainGrid& grid);

// P(Attack) for a batch of samples; inference mode.
std::vector<double> predict_attack_probabilities(Network& net,
                                                 const std::vector<PairedSample>& samples,
                                                 std::size_t batch_size = 64);

// P(Attack) for one sample. Throws StateError on an untrained model.
double predict_proba(const TrainedModel& model, const PairedSample& sample);

// Threshold 0.5 on P(Attack), confusion against sample labels.
MetricsReport evaluate_samples(Network& net, const std::vector<PairedSample>& samples);

// (B,1,32,32) batch tensor from sample grids; exposed for tests.
Tensor batch_tensor(const std::vector<PairedSample>& samples,
                    const std::vector<std::size_t>& indices);

}  // namespace poisonguard::nn
