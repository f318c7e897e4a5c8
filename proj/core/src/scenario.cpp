#include "poisonguard/scenario.hpp"

#include <stdexcept>

#include "poisonguard/manifest.hpp"
#include "poisonguard/parallel.hpp"

namespace poisonguard {

ScenarioResult run_scenario(nn::Scenario scenario, const CorpusConfig& corpus_cfg,
                            const AttackConfig& attack_cfg, const nn::TrainConfig& train_cfg,
                            std::uint64_t run_seed) {
    Corpus corpus = corpus_cfg.manifest_path.empty()
                        ? generate_corpus(corpus_cfg.n_accounts, corpus_cfg.noise_sigma,
                                          corpus_cfg.run_count, corpus_cfg.seed)
                        : load_manifest(corpus_cfg.manifest_path);

    auto [attackers, remaining] =
        select_attackers(corpus, attack_cfg.attacker_fraction, attack_cfg.seed);
    auto victims = select_victims(remaining, attack_cfg.victim_fraction,
                                  derive_seed(attack_cfg.seed, "victims"));
    PoisonPlan plan = build_plan(attackers, victims, derive_seed(attack_cfg.seed, "plan"));
    plan.attacker_fraction = attack_cfg.attacker_fraction;
    plan.victim_fraction = attack_cfg.victim_fraction;
    Corpus poisoned = apply_poison(remaining, plan, attackers);

    SplitSpec split{0.8, derive_seed(run_seed, "split")};
    auto [train_corpus, test_corpus] = split_train_test(poisoned, split);

    std::uint64_t pair_seed = derive_seed(run_seed, "pairs");
    auto train_samples = build_dataset(train_corpus, pair_seed);
    auto test_samples = build_dataset(test_corpus, pair_seed);

    nn::TrainConfig cfg = train_cfg;
    cfg.seed = derive_seed(run_seed, "train");
    nn::TrainedModel model =
        nn::train_stratified_cv(train_samples, nn::build_network(scenario), cfg);

    ScenarioResult result;
    result.cnn = nn::evaluate_samples(*model.network, test_samples);
    result.cnn_fold_metrics = model.fold_metrics;

    auto points = aggregate_probabilities(model, poisoned, derive_seed(run_seed, "agg-pairs"),
                                          poisoned.run_count);
    result.knn_default =
        classify_accounts(points, KnnImplementation::DefaultImpl, derive_seed(run_seed, "knn"))
            .summary;
    result.knn_proposed =
        classify_accounts(points, KnnImplementation::ProposedImpl, derive_seed(run_seed, "knn"))
            .summary;
    return result;
}

SweepResult run_sweep(const std::vector<double>& fractions, const CorpusConfig& corpus_cfg,
                      const nn::TrainConfig& train_cfg, nn::Scenario scenario,
                      const std::vector<std::uint64_t>& seeds) {
    if (fractions.empty()) throw std::invalid_argument("run_sweep: no fractions");
    if (seeds.empty()) throw std::invalid_argument("run_sweep: no seeds");
    for (double f : fractions) {
        if (f <= 0.0 || f >= 0.5) {
            throw std::invalid_argument("run_sweep: fractions must lie in (0, 0.5)");
        }
    }

    const std::size_t cells = fractions.size() * seeds.size();
    std::vector<ScenarioResult> results(cells);

    parallel_for_each(cells, [&](std::size_t cell) {
        std::size_t fi = cell / seeds.size();
        std::size_t si = cell % seeds.size();
        AttackConfig attack;
        attack.attacker_fraction = fractions[fi];
        attack.seed = derive_seed(seeds[si], "attack");
        CorpusConfig corpus = corpus_cfg;
        corpus.seed = derive_seed(seeds[si], "corpus");
        results[cell] = run_scenario(scenario, corpus, attack, train_cfg,
                                     derive_seed(seeds[si], "run", fi));
    });

    SweepResult sweep;
    for (std::size_t fi = 0; fi < fractions.size(); ++fi) {
        std::vector<MetricsReport> def, prop;
        for (std::size_t si = 0; si < seeds.size(); ++si) {
            const auto& r = results[fi * seeds.size() + si];
            def.push_back(r.knn_default);
            prop.push_back(r.knn_proposed);
        }
        sweep.rows.push_back({fractions[fi], mean_metrics(def), mean_metrics(prop)});
    }
    return sweep;
}

}  // namespace poisonguard
