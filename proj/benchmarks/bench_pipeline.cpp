#include <benchmark/benchmark.h>

#include "poisonguard/aggregate.hpp"
#include "poisonguard/attack.hpp"
#include "poisonguard/pairing.hpp"

using namespace poisonguard;

static void BM_GenerateCorpus(benchmark::State& state) {
    auto n = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        Corpus c = generate_corpus(n, 0.1f, 1, 7);
        benchmark::DoNotOptimize(c.accounts.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GenerateCorpus)->Arg(50)->Arg(200);

static void BM_BuildDataset(benchmark::State& state) {
    Corpus c = generate_corpus(static_cast<std::size_t>(state.range(0)), 0.1f, 10, 7);
    for (auto _ : state) {
        auto samples = build_dataset(c, 3);
        benchmark::DoNotOptimize(samples.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0) * 10);
}
BENCHMARK(BM_BuildDataset)->Arg(50)->Arg(200);

static void BM_ApplyPoison(benchmark::State& state) {
    Corpus corpus = generate_corpus(static_cast<std::size_t>(state.range(0)), 0.1f, 10, 7);
    auto [attackers, remaining] = select_attackers(corpus, 0.05, 3);
    auto victims = select_victims(remaining, 0.05, 4);
    PoisonPlan plan = build_plan(attackers, victims, 5);
    for (auto _ : state) {
        Corpus poisoned = apply_poison(remaining, plan, attackers);
        benchmark::DoNotOptimize(poisoned.accounts.data());
    }
}
BENCHMARK(BM_ApplyPoison)->Arg(200);

static void BM_KnnPredict(benchmark::State& state) {
    Rng rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::vector<double>> pts;
    std::vector<int> labels;
    for (int64_t i = 0; i < state.range(0); ++i) {
        std::vector<double> p(10);
        for (auto& v : p) v = u(rng);
        pts.push_back(std::move(p));
        labels.push_back(static_cast<int>(rng() % 2));
    }
    KnnModel model = knn_fit(std::move(pts), std::move(labels), 11);
    std::vector<double> query(10, 0.5);
    for (auto _ : state) {
        benchmark::DoNotOptimize(knn_predict(model, query));
    }
}
BENCHMARK(BM_KnnPredict)->Arg(200)->Arg(2000);

static void BM_Smote(benchmark::State& state) {
    Rng rng(10);
    std::normal_distribution<double> gauss(0.0, 0.1);
    for (auto _ : state) {
        state.PauseTiming();
        std::vector<std::vector<double>> pts;
        std::vector<int> labels;
        for (int64_t i = 0; i < state.range(0); ++i) {
            std::vector<double> p(10);
            for (auto& v : p) v = 0.3 + gauss(rng);
            pts.push_back(std::move(p));
            labels.push_back(i < state.range(0) / 20 ? 1 : 0);
        }
        state.ResumeTiming();
        smote(pts, labels, 5, 11);
        benchmark::DoNotOptimize(pts.data());
    }
}
BENCHMARK(BM_Smote)->Arg(200);

BENCHMARK_MAIN();
