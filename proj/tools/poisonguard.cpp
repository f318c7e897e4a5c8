// poisonguard: simulate targeted poisoning of voice-auth embedding corpora
// and evaluate the two-stage CNN + k-NN defense against it.
//
// Subcommands: gen, poison, train, detect, sweep. Every stochastic command
// takes a mandatory --seed; rerunning with identical arguments reproduces
// output files byte for byte. Exit codes: 0 ok, 1 runtime/IO failure,
// 2 usage error.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "poisonguard/aggregate.hpp"
#include "poisonguard/attack.hpp"
#include "poisonguard/corpus.hpp"
#include "poisonguard/error.hpp"
#include "poisonguard/manifest.hpp"
#include "poisonguard/metrics.hpp"
#include "poisonguard/network.hpp"
#include "poisonguard/report.hpp"
#include "poisonguard/scenario.hpp"
#include "poisonguard/train.hpp"

namespace pg = poisonguard;

namespace {

void print_metrics(const std::string& tag, const pg::MetricsReport& m) {
    std::printf("%s acc=%.4f prec=%.4f recall=%.4f f1=%.4f fpr=%.4f fnr=%.4f\n", tag.c_str(),
                m.accuracy, m.precision, m.recall, m.f1, m.fpr, m.fnr);
}

struct TrainFlags {
    double learning_rate = 0.0;  // 0 = scenario default
    long epochs = 0;
    long batch_size = 0;
    double l1 = -1.0;
    double l2 = -1.0;
    long folds = -1;
    long filters1 = 0;
    long filters2 = 0;
    long hidden = 0;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
    cmd->add_option("--lr", f.learning_rate, "Learning rate (default 0.01)");
    cmd->add_option("--epochs", f.epochs, "Training epochs (default 30)");
    cmd->add_option("--batch", f.batch_size, "Mini-batch size (default 32)");
    cmd->add_option("--l1", f.l1, "L1 penalty coefficient");
    cmd->add_option("--l2", f.l2, "L2 penalty coefficient");
    cmd->add_option("--folds", f.folds, "Cross-validation folds; <2 disables CV");
    cmd->add_option("--filters1", f.filters1, "Filters in the first conv block");
    cmd->add_option("--filters2", f.filters2, "Filters in the second conv block");
    cmd->add_option("--hidden", f.hidden, "Hidden units in the dense head");
}

pg::nn::TrainConfig resolve_train_config(pg::nn::Scenario scenario, const TrainFlags& f,
                                         std::uint64_t seed) {
    pg::nn::TrainConfig cfg = pg::nn::default_train_config(scenario);
    if (f.learning_rate > 0.0) cfg.learning_rate = f.learning_rate;
    if (f.epochs > 0) cfg.epochs = static_cast<std::size_t>(f.epochs);
    if (f.batch_size > 0) cfg.batch_size = static_cast<std::size_t>(f.batch_size);
    if (f.l1 >= 0.0) cfg.l1_coeff = f.l1;
    if (f.l2 >= 0.0) cfg.l2_coeff = f.l2;
    if (f.folds >= 0) cfg.folds = static_cast<std::size_t>(f.folds);
    cfg.seed = seed;
    return cfg;
}

pg::nn::NetworkSpec resolve_network_spec(pg::nn::Scenario scenario, const TrainFlags& f) {
    pg::nn::NetworkSpec spec = pg::nn::build_network(scenario);
    if (f.filters1 > 0) spec.conv1_filters = static_cast<std::size_t>(f.filters1);
    if (f.filters2 > 0) spec.conv2_filters = static_cast<std::size_t>(f.filters2);
    if (f.hidden > 0) spec.hidden_units = static_cast<std::size_t>(f.hidden);
    return spec;
}

// ------------------------------------------------------------------- gen

int cmd_gen(std::size_t accounts, double sigma, long runs, std::uint64_t seed,
            const std::string& output) {
    pg::Corpus corpus = pg::generate_corpus(accounts, static_cast<float>(sigma),
                                            static_cast<std::uint32_t>(runs), seed);
    pg::save_corpus(corpus, output);
    std::printf("wrote %zu accounts x %u runs to %s\n", corpus.size(), corpus.run_count,
                output.c_str());
    return 0;
}

// ---------------------------------------------------------------- poison

int cmd_poison(const std::string& input, double attacker_fraction, double victim_fraction,
               std::uint64_t seed, const std::string& output, const std::string& plan_path,
               const std::string& replay_path) {
    pg::Corpus corpus = pg::load_manifest(input);

    pg::PoisonPlan plan;
    std::vector<pg::Account> attackers;
    pg::Corpus remaining;

    if (!replay_path.empty()) {
        plan = pg::load_plan(replay_path);
        remaining.run_count = corpus.run_count;
        remaining.seed = corpus.seed;
        for (const auto& acct : corpus.accounts) {
            if (plan.attacker_ids.contains(acct.account_id)) {
                attackers.push_back(acct);
            } else {
                remaining.accounts.push_back(acct);
            }
        }
        if (attackers.size() != plan.attacker_ids.size()) {
            throw pg::ConsistencyError("plan lists attackers missing from the corpus");
        }
    } else {
        auto selected = pg::select_attackers(corpus, attacker_fraction, seed);
        attackers = std::move(selected.first);
        remaining = std::move(selected.second);
        auto victims = pg::select_victims(remaining, victim_fraction,
                                          pg::derive_seed(seed, "victims"));
        plan = pg::build_plan(attackers, victims, pg::derive_seed(seed, "plan"));
        plan.attacker_fraction = attacker_fraction;
        plan.victim_fraction = victim_fraction;
    }

    pg::Corpus poisoned = pg::apply_poison(remaining, plan, attackers);
    pg::save_corpus(poisoned, output);
    if (!plan_path.empty()) pg::save_plan(plan, plan_path);

    std::printf("attackers=%zu victims=%zu remaining=%zu -> %s\n", attackers.size(),
                plan.victim_ids.size(), poisoned.size(), output.c_str());
    return 0;
}

// ----------------------------------------------------------------- train

int cmd_train(const std::string& input, const std::string& scenario_name, std::uint64_t seed,
              const std::string& model_path, const std::string& fold_metrics_path,
              double train_fraction, const TrainFlags& flags) {
    pg::nn::Scenario scenario = pg::nn::parse_scenario(scenario_name);
    pg::Corpus corpus = pg::load_manifest(input);

    pg::SplitSpec split{train_fraction, pg::derive_seed(seed, "split")};
    auto [train_corpus, test_corpus] = pg::split_train_test(corpus, split);

    std::uint64_t pair_seed = pg::derive_seed(seed, "pairs");
    auto train_samples = pg::build_dataset(train_corpus, pair_seed);
    auto test_samples = pg::build_dataset(test_corpus, pair_seed);

    pg::nn::TrainConfig cfg = resolve_train_config(scenario, flags, pg::derive_seed(seed, "train"));
    pg::nn::NetworkSpec spec = resolve_network_spec(scenario, flags);

    pg::nn::TrainedModel model = pg::nn::train_stratified_cv(train_samples, spec, cfg);
    pg::nn::save_checkpoint(*model.network, model_path);

    if (!fold_metrics_path.empty() && !model.fold_metrics.empty()) {
        std::ofstream out(fold_metrics_path, std::ios::binary);
        if (!out) throw pg::IoError("cannot open for writing: " + fold_metrics_path);
        out << "fold,accuracy,precision,recall,f1,fpr,fnr\n";
        char buf[160];
        for (std::size_t i = 0; i < model.fold_metrics.size(); ++i) {
            const auto& m = model.fold_metrics[i];
            std::snprintf(buf, sizeof(buf), "%zu,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", i, m.accuracy,
                          m.precision, m.recall, m.f1, m.fpr, m.fnr);
            out << buf;
        }
    }

    print_metrics("test", pg::nn::evaluate_samples(*model.network, test_samples));
    std::printf("checkpoint -> %s\n", model_path.c_str());
    return 0;
}

// ---------------------------------------------------------------- detect

int cmd_detect(const std::string& input, const std::string& model_path, const std::string& impl,
               std::uint64_t seed, const std::string& verdicts_path,
               const std::string& points_path, bool allow_any_runs) {
    pg::Corpus corpus = pg::load_manifest(input);
    auto network = pg::nn::load_checkpoint(model_path);

    pg::nn::TrainedModel model;
    model.spec = network->spec();
    model.network = std::move(network);

    std::uint32_t expected = allow_any_runs ? corpus.run_count : 10;
    auto points = pg::aggregate_probabilities(model, corpus, pg::derive_seed(seed, "agg-pairs"),
                                              expected);
    if (!points_path.empty()) pg::save_account_points(points, points_path);

    pg::KnnImplementation mode = impl == "proposed" ? pg::KnnImplementation::ProposedImpl
                                                    : pg::KnnImplementation::DefaultImpl;
    auto result = pg::classify_accounts(points, mode, pg::derive_seed(seed, "knn"));

    std::ofstream out(verdicts_path, std::ios::binary);
    if (!out) throw pg::IoError("cannot open for writing: " + verdicts_path);
    out << "account_id,truth,verdict\n";
    for (std::size_t i = 0; i < points.size(); ++i) {
        out << points[i].account_id << ',' << (points[i].label ? "attack" : "normal") << ','
            << (result.predicted[i] ? "attack" : "normal") << "\n";
    }
    if (!out) throw pg::IoError("write failed: " + verdicts_path);

    print_metrics(impl, result.summary);
    std::printf("verdicts -> %s\n", verdicts_path.c_str());
    return 0;
}

// ----------------------------------------------------------------- sweep

int cmd_sweep(std::size_t accounts, double sigma, long runs, std::vector<double> fractions,
              std::uint64_t seed, long n_seeds, const std::string& scenario_name,
              const std::string& output, const std::string& format_name, bool assert_trends,
              const TrainFlags& flags) {
    pg::nn::Scenario scenario = pg::nn::parse_scenario(scenario_name);
    pg::CorpusConfig corpus_cfg;
    corpus_cfg.n_accounts = accounts;
    corpus_cfg.noise_sigma = static_cast<float>(sigma);
    corpus_cfg.run_count = static_cast<std::uint32_t>(runs);

    pg::nn::TrainConfig train_cfg = resolve_train_config(scenario, flags, 0);

    std::vector<std::uint64_t> seeds;
    for (long i = 0; i < n_seeds; ++i) seeds.push_back(seed + static_cast<std::uint64_t>(i));

    pg::SweepResult sweep = pg::run_sweep(fractions, corpus_cfg, train_cfg, scenario, seeds);
    pg::emit_report(pg::to_comparison_table(sweep), pg::parse_report_format(format_name), output);

    for (const auto& row : sweep.rows) {
        print_metrics(pg::fraction_label(row.fraction) + " default", row.default_impl);
        print_metrics(pg::fraction_label(row.fraction) + " proposed", row.proposed_impl);
    }
    std::printf("report -> %s\n", output.c_str());

    if (assert_trends) {
        constexpr double kTolerance = 0.05;
        for (std::size_t i = 1; i < sweep.rows.size(); ++i) {
            if (sweep.rows[i].default_impl.recall >
                    sweep.rows[i - 1].default_impl.recall + kTolerance ||
                sweep.rows[i].proposed_impl.recall >
                    sweep.rows[i - 1].proposed_impl.recall + kTolerance) {
                std::fprintf(stderr, "trend violation: recall increased at fraction %s\n",
                             pg::fraction_label(sweep.rows[i].fraction).c_str());
                return 1;
            }
        }
        std::printf("trend check passed: recall non-increasing in attack fraction\n");
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"poisonguard: poisoning attack simulator and defense toolkit "
                 "for embedding-based voice authentication"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Config file mirroring the flags (flags win)");

    // gen
    auto* gen = app.add_subcommand("gen", "Generate a synthetic embedding corpus");
    std::size_t gen_accounts = 200;
    double gen_sigma = 0.1;
    long gen_runs = 10;
    std::uint64_t gen_seed = 0;
    std::string gen_output;
    gen->add_option("--accounts", gen_accounts, "Number of accounts")->required();
    gen->add_option("--sigma", gen_sigma, "Per-coordinate Gaussian noise");
    gen->add_option("--runs", gen_runs, "Embedding runs per utterance slot");
    gen->add_option("--seed", gen_seed, "Generator seed")->required();
    gen->add_option("-o,--output", gen_output, "Output manifest (.pgb = binary)")->required();

    // poison
    auto* poison = app.add_subcommand("poison", "Stage a targeted poisoning attack");
    std::string poison_in, poison_out, poison_plan, poison_replay;
    double poison_af = 0.10, poison_vf = 0.05;
    std::uint64_t poison_seed = 0;
    poison->add_option("--in", poison_in, "Input corpus manifest")->required();
    poison->add_option("--attacker-fraction", poison_af, "Fraction labelled attackers");
    poison->add_option("--victim-fraction", poison_vf, "Fraction of remaining hit");
    poison->add_option("--seed", poison_seed, "Selection seed")->required();
    poison->add_option("-o,--output", poison_out, "Poisoned corpus output")->required();
    poison->add_option("--plan", poison_plan, "Plan file for audit/replay");
    poison->add_option("--replay", poison_replay, "Replay a saved plan instead of sampling");

    // train
    auto* train = app.add_subcommand("train", "Train a detector on a poisoned corpus");
    std::string train_in, train_scenario = "scenario1", train_model, train_folds_csv;
    std::uint64_t train_seed = 0;
    double train_fraction = 0.8;
    TrainFlags train_flags;
    train->add_option("--in", train_in, "Poisoned corpus manifest")->required();
    train->add_option("--scenario", train_scenario, "scenario1|scenario2|default");
    train->add_option("--seed", train_seed, "Training seed")->required();
    train->add_option("-o,--model", train_model, "Checkpoint output")->required();
    train->add_option("--fold-metrics", train_folds_csv, "Per-fold validation metrics CSV");
    train->add_option("--train-fraction", train_fraction, "Train split fraction");
    add_train_flags(train, train_flags);

    // detect
    auto* detect = app.add_subcommand("detect", "Classify accounts with a trained model");
    std::string detect_in, detect_model, detect_impl = "proposed", detect_out, detect_points;
    std::uint64_t detect_seed = 0;
    bool detect_any_runs = false;
    detect->add_option("--in", detect_in, "Corpus manifest")->required();
    detect->add_option("--model", detect_model, "Trained checkpoint")->required();
    detect->add_option("--impl", detect_impl, "default|proposed k-NN implementation");
    detect->add_option("--seed", detect_seed, "Pairing/k-NN seed")->required();
    detect->add_option("-o,--verdicts", detect_out, "Per-account verdict CSV")->required();
    detect->add_option("--points", detect_points, "Also write account points CSV");
    detect->add_flag("--allow-any-runs", detect_any_runs,
                     "Accept corpora whose run count is not 10");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Attack-fraction sweep over both k-NN impls");
    std::size_t sweep_accounts = 200;
    double sweep_sigma = 0.1;
    long sweep_runs = 10;
    std::vector<double> sweep_fractions{0.001, 0.01, 0.05, 0.10};
    std::uint64_t sweep_seed = 0;
    long sweep_n_seeds = 10;
    std::string sweep_scenario = "scenario1", sweep_out, sweep_format = "csv";
    bool sweep_assert = false;
    TrainFlags sweep_flags;
    sweep->add_option("--accounts", sweep_accounts, "Accounts per generated corpus");
    sweep->add_option("--sigma", sweep_sigma, "Corpus noise sigma");
    sweep->add_option("--runs", sweep_runs, "Embedding runs per slot");
    sweep->add_option("--fractions", sweep_fractions, "Attack fractions to sweep")
        ->delimiter(',');
    sweep->add_option("--seed", sweep_seed, "Base seed")->required();
    sweep->add_option("--n-seeds", sweep_n_seeds, "Seeds averaged per cell");
    sweep->add_option("--scenario", sweep_scenario, "CNN scenario for all cells");
    sweep->add_option("-o,--output", sweep_out, "Report output path")->required();
    sweep->add_option("--format", sweep_format, "csv|json|md");
    sweep->add_flag("--assert-trends", sweep_assert,
                    "Exit nonzero if recall increases with the attack fraction");
    add_train_flags(sweep, sweep_flags);

    try {
        app.parse(argc, argv);
        if (gen->parsed()) {
            return cmd_gen(gen_accounts, gen_sigma, gen_runs, gen_seed, gen_output);
        }
        if (poison->parsed()) {
            return cmd_poison(poison_in, poison_af, poison_vf, poison_seed, poison_out,
                              poison_plan, poison_replay);
        }
        if (train->parsed()) {
            return cmd_train(train_in, train_scenario, train_seed, train_model, train_folds_csv,
                             train_fraction, train_flags);
        }
        if (detect->parsed()) {
            return cmd_detect(detect_in, detect_model, detect_impl, detect_seed, detect_out,
                              detect_points, detect_any_runs);
        }
        if (sweep->parsed()) {
            return cmd_sweep(sweep_accounts, sweep_sigma, sweep_runs, sweep_fractions, sweep_seed,
                             sweep_n_seeds, sweep_scenario, sweep_out, sweep_format, sweep_assert,
                             sweep_flags);
        }
        return 2;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
