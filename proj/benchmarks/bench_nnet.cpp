#include <benchmark/benchmark.h>

#include "poisonguard/network.hpp"
#include "poisonguard/rng.hpp"

using namespace poisonguard;
using namespace poisonguard::nn;

namespace {

Tensor random_batch(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::uniform_real_distribution<double> dist(-0.1, 0.1);
    Tensor batch({n, 1, 32, 32});
    for (std::size_t i = 0; i < batch.size(); ++i) batch[i] = dist(rng);
    return batch;
}

Scenario scenario_of(int64_t i) {
    switch (i) {
        case 0: return Scenario::Scenario1;
        case 1: return Scenario::Scenario2;
        default: return Scenario::Default;
    }
}

}  // namespace

static void BM_ForwardInference(benchmark::State& state) {
    Network net(build_network(scenario_of(state.range(0))), 7);
    Tensor batch = random_batch(32, 11);
    for (auto _ : state) {
        Tensor logits = net.forward(batch, false);
        benchmark::DoNotOptimize(logits.data());
    }
    state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_ForwardInference)->Arg(0)->Arg(1)->Arg(2);

static void BM_TrainStep(benchmark::State& state) {
    Network net(build_network(scenario_of(state.range(0))), 7);
    Tensor batch = random_batch(32, 11);
    std::vector<int> labels(32);
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % 2;
    for (auto _ : state) {
        net.zero_grads();
        Tensor logits = net.forward(batch, true);
        auto loss = softmax_cross_entropy(logits, labels, {1.0, 1.0});
        net.backward(loss.dlogits);
        benchmark::DoNotOptimize(loss.loss);
    }
    state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Arg(2);
