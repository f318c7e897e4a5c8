#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "poisonguard/aggregate.hpp"
#include "poisonguard/attack.hpp"
#include "poisonguard/corpus.hpp"
#include "poisonguard/metrics.hpp"
#include "poisonguard/train.hpp"

namespace poisonguard {

struct CorpusConfig {
    std::size_t n_accounts = 200;
    float noise_sigma = 0.1f;
    std::uint32_t run_count = 10;
    std::uint64_t seed = 1;
    std::string manifest_path;  // when set, ingest instead of generating
};

struct AttackConfig {
    double attacker_fraction = 0.10;
    double victim_fraction = 0.05;
    std::uint64_t seed = 2;
};

struct ScenarioResult {
    MetricsReport cnn;  // sample-level detector metrics on the test split
    std::vector<MetricsReport> cnn_fold_metrics;
    MetricsReport knn_default;   // account-level, default k-NN implementation
    MetricsReport knn_proposed;  // account-level, SMOTE + stratified CV
};

// Full pipeline: corpus -> poison -> 80/20 split -> pairs -> CNN -> account
// points -> k-NN under both implementations. run_seed drives the split,
// pairing, training and k-NN sub-streams; corpus and attack seeds live in
// their configs, so a run is reproducible from those three seeds.
ScenarioResult run_scenario(nn::Scenario scenario, const CorpusConfig& corpus_cfg,
                            const AttackConfig& attack_cfg, const nn::TrainConfig& train_cfg,
                            std::uint64_t run_seed);

struct SweepRow {
    double fraction = 0.0;
    MetricsReport default_impl;
    MetricsReport proposed_impl;
};

struct SweepResult {
    std::vector<SweepRow> rows;  // one per attack fraction, seed-averaged
};

// Runs the pipeline for every (fraction, seed) cell with the given CNN
// scenario and averages the two k-NN implementations' account-level metrics
// per fraction. Cells execute in parallel; results do not depend on
// scheduling.
SweepResult run_sweep(const std::vector<double>& fractions, const CorpusConfig& corpus_cfg,
                      const nn::TrainConfig& train_cfg, nn::Scenario scenario,
                      const std::vector<std::uint64_t>& seeds);

}  // namespace poisonguard
