#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "poisonguard/error.hpp"
#include "poisonguard/network.hpp"

using namespace poisonguard;
using namespace poisonguard::nn;

namespace {

void fill_random(Tensor& t, Rng& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
}

}  // namespace

TEST_CASE("scenario architectures match their contracts") {
    Network s1(build_network(Scenario::Scenario1), 1);
    auto n1 = s1.layer_names();
    CHECK(n1 == std::vector<std::string>{"conv1", "bn1", "relu1", "pool1", "drop1", "flatten",
                                         "dense1", "relu_fc", "dense2"});

    Network s2(build_network(Scenario::Scenario2), 1);
    auto n2 = s2.layer_names();
    CHECK(n2 == std::vector<std::string>{"conv1", "bn1", "relu1", "pool1", "drop1", "conv2",
                                         "bn2", "relu2", "pool2", "drop2", "flatten", "dense1",
                                         "relu_fc", "dense2"});

    // the baseline's stage list counts 12 layers
    Network def(build_network(Scenario::Default), 1);
    auto nd = def.layer_names();
    CHECK(nd.size() == 12);
    CHECK(nd == std::vector<std::string>{"conv1", "relu1", "pool1", "drop1", "conv2", "relu2",
                                         "pool2", "drop2", "flatten", "dense1", "relu_fc",
                                         "dense2"});
}

TEST_CASE("conv kernels are 4x4 then 3x3 and the head emits 2 logits") {
    for (auto scenario : {Scenario::Scenario1, Scenario::Scenario2, Scenario::Default}) {
        Network net(build_network(scenario), 5);
        auto params = net.parameters();
        // conv1.weight shape (O, 1, 4, 4)
        REQUIRE(params[0].name == "conv1.weight");
        CHECK(params[0].value->dim(2) == 4);
        CHECK(params[0].value->dim(3) == 4);
        if (scenario != Scenario::Scenario1) {
            bool found = false;
            for (auto& p : params) {
                if (p.name == "conv2.weight") {
                    CHECK(p.value->dim(2) == 3);
                    CHECK(p.value->dim(3) == 3);
                    found = true;
                }
            }
            CHECK(found);
        }
        Rng rng(3);
        Tensor input({2, 1, 32, 32});
        fill_random(input, rng);
        Tensor logits = net.forward(input, false);
        CHECK(logits.shape() == std::vector<std::size_t>{2, 2});
        CHECK(logits.all_finite());
    }
}

TEST_CASE("batch norm present exactly where the scenario says") {
    auto has_bn = [](Network& net) {
        for (auto& p : net.parameters()) {
            if (p.name.find("bn") != std::string::npos) return true;
        }
        return false;
    };
    Network s1(build_network(Scenario::Scenario1), 1);
    Network s2(build_network(Scenario::Scenario2), 1);
    Network def(build_network(Scenario::Default), 1);
    CHECK(has_bn(s1));
    CHECK(has_bn(s2));
    CHECK_FALSE(has_bn(def));
}

TEST_CASE("inference is deterministic, training-mode dropout is not a no-op") {
    Network net(build_network(Scenario::Scenario1), 11);
    Rng rng(4);
    Tensor input({3, 1, 32, 32});
    fill_random(input, rng);

    Tensor a = net.forward(input, false);
    Tensor b = net.forward(input, false);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);

    net.reseed_dropout(1);
    Tensor t1 = net.forward(input, true);
    Tensor t2 = net.forward(input, true);  // mask advances
    double diff = 0.0;
    for (std::size_t i = 0; i < t1.size(); ++i) diff += std::abs(t1[i] - t2[i]);
    CHECK(diff > 0.0);
}

TEST_CASE("backward demands a training-mode forward first") {
    Network net(build_network(Scenario::Default), 2);
    Rng rng(5);
    Tensor input({1, 1, 32, 32});
    fill_random(input, rng);
    net.forward(input, false);
    Tensor g({1, 2});
    CHECK_THROWS_AS(net.backward(g), StateError);
}

TEST_CASE("zero upstream gradient produces zero parameter gradients") {
    Network net(build_network(Scenario::Scenario2), 6);
    Rng rng(6);
    Tensor input({2, 1, 32, 32});
    fill_random(input, rng);
    net.zero_grads();
    net.forward(input, true);
    Tensor zero({2, 2});
    net.backward(zero);
    for (auto& p : net.parameters()) {
        for (std::size_t i = 0; i < p.grad->size(); ++i) CHECK((*p.grad)[i] == 0.0);
    }
}

TEST_CASE("end-to-end loss gradient matches finite differences") {
    // tiny two-block network with batch norm, dropout frozen per probe,
    // class weights and an L2 penalty: the full training loss surface
    NetworkSpec spec;
    spec.scenario = Scenario::Scenario2;
    spec.conv1_filters = 2;
    spec.conv2_filters = 3;
    spec.hidden_units = 6;
    Network net(spec, 21);

    Rng rng(22);
    Tensor input({2, 1, 32, 32});
    fill_random(input, rng);
    std::vector<int> labels{1, 0};
    const std::array<double, 2> weights{1.0, 2.5};
    const double l2 = 0.01;

    auto loss_fn = [&]() {
        net.reseed_dropout(99);
        Tensor logits = net.forward(input, true);
        return softmax_cross_entropy(logits, labels, weights).loss +
               regularization_penalty(net, 0.0, l2);
    };

    net.zero_grads();
    net.reseed_dropout(99);
    Tensor logits = net.forward(input, true);
    auto loss = softmax_cross_entropy(logits, labels, weights);
    net.backward(loss.dlogits);
    add_regularization_gradients(net, 0.0, l2);

    const double eps = 1e-3;
    const double f0 = loss_fn();
    double worst = 0.0;
    std::size_t checked = 0, skipped = 0;
    auto eval_at = [&](double& slot, double saved, double h) {
        slot = saved + h;
        double v = loss_fn();
        slot = saved;
        return v;
    };
    for (auto& p : net.parameters()) {
        for (std::size_t i = 0; i < p.value->size(); ++i) {
            // subsample big tensors to keep the suite quick
            if (p.value->size() > 64 && i % 5 != 0) continue;
            double saved = (*p.value)[i];
            double up = eval_at((*p.value)[i], saved, eps);
            double down = eval_at((*p.value)[i], saved, -eps);
            double up_h = eval_at((*p.value)[i], saved, eps / 2.0);
            double down_h = eval_at((*p.value)[i], saved, -eps / 2.0);
            double numeric = (up - down) / (2.0 * eps);
            double numeric_half = (up_h - down_h) / eps;

            // Central differences are a valid derivative estimate only where
            // the loss is smooth on [x-eps, x+eps]. A max-pool argmax or relu
            // sign flip inside the interval breaks either the two-step-size
            // agreement or the quadratic scaling of the second difference
            // D(h) = f(x+h)+f(x-h)-2f(x) ~ f'' h^2 (a kink adds a linear
            // term, so D(eps) stops being ~4 D(eps/2)). Skip such points.
            double d_full = up + down - 2.0 * f0;
            double d_half = up_h + down_h - 2.0 * f0;
            bool fd_mismatch = std::abs(numeric - numeric_half) >
                               1e-4 * std::max({std::abs(numeric), std::abs(numeric_half), 1.0});
            bool curvature_break =
                std::abs(d_full - 4.0 * d_half) >
                std::max(1e-9 * std::max(1.0, std::abs(f0)),
                         0.25 * std::max(std::abs(d_full), 4.0 * std::abs(d_half)));
            if (fd_mismatch || curvature_break) {
                ++skipped;
                continue;
            }
            double analytic = (*p.grad)[i];
            double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-7});
            if (std::abs(analytic - numeric) >= 1e-8) {
                worst = std::max(worst, std::abs(analytic - numeric) / denom);
            }
            ++checked;
        }
    }
    CHECK(checked > 200);
    CHECK(worst < 1e-4);
    // kink crossings are rare: nearly every sampled coordinate is checkable
    CHECK(skipped * 10 < checked);
}

TEST_CASE("checkpoints round trip through float32") {
    NetworkSpec spec;
    spec.scenario = Scenario::Scenario1;
    spec.conv1_filters = 4;
    spec.hidden_units = 8;
    Network net(spec, 31);

    auto path = std::filesystem::temp_directory_path() / "pg_checkpoint_test.pgm";
    save_checkpoint(net, path);
    NetworkSpec loaded_spec;
    auto loaded = load_checkpoint(path, &loaded_spec);
    CHECK(loaded_spec == spec);

    auto orig_params = net.parameters();
    auto new_params = loaded->parameters();
    REQUIRE(orig_params.size() == new_params.size());
    for (std::size_t p = 0; p < orig_params.size(); ++p) {
        CHECK(orig_params[p].name == new_params[p].name);
        REQUIRE(orig_params[p].value->shape() == new_params[p].value->shape());
        for (std::size_t i = 0; i < orig_params[p].value->size(); ++i) {
            float as_f32 = static_cast<float>((*orig_params[p].value)[i]);
            CHECK((*new_params[p].value)[i] == static_cast<double>(as_f32));
        }
    }

    Rng rng(7);
    Tensor input({2, 1, 32, 32});
    fill_random(input, rng);
    Tensor a = net.forward(input, false);
    Tensor b = loaded->forward(input, false);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-5));
}

TEST_CASE("checkpoint loader rejects tampered files") {
    Network net(build_network(Scenario::Scenario1), 41);
    auto path = std::filesystem::temp_directory_path() / "pg_checkpoint_bad.pgm";
    save_checkpoint(net, path);

    // truncate mid-tensor
    auto size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, size / 2);
    CHECK_THROWS_AS(load_checkpoint(path), Error);
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/model.pgm"), IoError);
}

TEST_CASE("input shape is enforced") {
    Network net(build_network(Scenario::Scenario1), 8);
    Tensor bad({1, 1, 16, 16});
    CHECK_THROWS_AS(net.forward(bad, false), DimensionError);
}
