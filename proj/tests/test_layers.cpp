#include <doctest.h>

#include <cmath>
#include <functional>

#include "poisonguard/error.hpp"
#include "poisonguard/layers.hpp"
#include "poisonguard/network.hpp"

using namespace poisonguard;
using namespace poisonguard::nn;

namespace {

constexpr double kFdEps = 1e-3;
constexpr double kRelTol = 1e-4;

void fill_random(Tensor& t, Rng& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
}

double rel_error(double analytic, double numeric) {
    double denom = std::max(std::abs(analytic), std::abs(numeric));
    if (denom < 1e-7) return std::abs(analytic - numeric) < 1e-8 ? 0.0 : 1.0;
    return std::abs(analytic - numeric) / denom;
}

// Central finite differences of `loss` with respect to every entry of
// `values`, compared against `analytic`.
void check_gradient(Tensor& values, const Tensor& analytic,
                    const std::function<double()>& loss) {
    REQUIRE(values.size() == analytic.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        double saved = values[i];
        values[i] = saved + kFdEps;
        double up = loss();
        values[i] = saved - kFdEps;
        double down = loss();
        values[i] = saved;
        double numeric = (up - down) / (2.0 * kFdEps);
        worst = std::max(worst, rel_error(analytic[i], numeric));
    }
    CHECK(worst < kRelTol);
}

// Scalar probe loss: sum(output * projection), so dLoss/dOutput = projection.
struct ProbeLoss {
    Tensor projection;

    explicit ProbeLoss(const Tensor& reference, Rng& rng) : projection(reference.shape()) {
        fill_random(projection, rng);
    }
    double operator()(const Tensor& out) const {
        double s = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * projection[i];
        return s;
    }
};

}  // namespace

TEST_CASE("conv2d gradients match finite differences") {
    Rng rng(101);
    Conv2d conv("conv", 2, 3, 3, rng);
    Tensor input({2, 2, 6, 6});
    fill_random(input, rng);

    Tensor out = conv.forward(input, true);
    ProbeLoss probe(out, rng);
    Tensor grad_input = conv.backward(probe.projection);

    auto loss_fn = [&]() { return probe(conv.forward(input, false)); };
    check_gradient(input, grad_input, loss_fn);
}

TEST_CASE("conv2d parameter gradients match finite differences") {
    Rng rng(102);
    Conv2d conv("conv", 1, 2, 3, rng);
    Tensor input({2, 1, 5, 5});
    fill_random(input, rng);

    Tensor out = conv.forward(input, true);
    ProbeLoss probe(out, rng);
    conv.backward(probe.projection);

    auto loss_fn = [&]() { return probe(conv.forward(input, false)); };
    for (auto& p : conv.parameters()) {
        check_gradient(*p.value, *p.grad, loss_fn);
    }
}

TEST_CASE("conv2d backward agrees with a direct nested-loop oracle") {
    Rng rng(103);
    const std::size_t N = 2, I = 2, O = 3, K = 3, H = 5, W = 5;
    Conv2d conv("conv", I, O, K, rng);
    Tensor input({N, I, H, W});
    fill_random(input, rng);
    const std::size_t OH = H - K + 1, OW = W - K + 1;

    Tensor upstream({N, O, OH, OW});
    fill_random(upstream, rng);

    Tensor weight = *conv.parameters()[0].value;
    conv.forward(input, true);
    Tensor grad_input = conv.backward(upstream);
    Tensor weight_grad = *conv.parameters()[0].grad;
    Tensor bias_grad = *conv.parameters()[1].grad;

    // independent re-derivation with plain loops
    Tensor oracle_wg({O, I, K, K}), oracle_bg({O}), oracle_ig({N, I, H, W});
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t o = 0; o < O; ++o)
            for (std::size_t y = 0; y < OH; ++y)
                for (std::size_t x = 0; x < OW; ++x) {
                    double g = upstream.at4(n, o, y, x);
                    oracle_bg[o] += g;
                    for (std::size_t i = 0; i < I; ++i)
                        for (std::size_t ky = 0; ky < K; ++ky)
                            for (std::size_t kx = 0; kx < K; ++kx) {
                                oracle_wg.at4(o, i, ky, kx) +=
                                    g * input.at4(n, i, y + ky, x + kx);
                                oracle_ig.at4(n, i, y + ky, x + kx) +=
                                    g * weight.at4(o, i, ky, kx);
                            }
                }

    for (std::size_t i = 0; i < oracle_wg.size(); ++i) {
        CHECK(weight_grad[i] == doctest::Approx(oracle_wg[i]).epsilon(1e-9));
    }
    for (std::size_t i = 0; i < oracle_bg.size(); ++i) {
        CHECK(bias_grad[i] == doctest::Approx(oracle_bg[i]).epsilon(1e-9));
    }
    for (std::size_t i = 0; i < oracle_ig.size(); ++i) {
        CHECK(grad_input[i] == doctest::Approx(oracle_ig[i]).epsilon(1e-9));
    }
}

TEST_CASE("a 1x1 identity conv passes a constant input through") {
    Rng rng(104);
    Conv2d conv("conv", 1, 1, 1, rng);
    auto params = conv.parameters();
    (*params[0].value)[0] = 1.0;  // weight
    (*params[1].value)[0] = 0.0;  // bias
    Tensor input({1, 1, 4, 4});
    input.fill(0.7);
    Tensor out = conv.forward(input, false);
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == doctest::Approx(0.7));
}

TEST_CASE("dense gradients match finite differences") {
    Rng rng(105);
    Dense dense("fc", 7, 4, rng);
    Tensor input({3, 7});
    fill_random(input, rng);

    Tensor out = dense.forward(input, true);
    ProbeLoss probe(out, rng);
    Tensor grad_input = dense.backward(probe.projection);

    auto loss_fn = [&]() { return probe(dense.forward(input, false)); };
    check_gradient(input, grad_input, loss_fn);

    Dense dense2("fc2", 7, 4, rng);
    Tensor out2 = dense2.forward(input, true);
    ProbeLoss probe2(out2, rng);
    dense2.backward(probe2.projection);
    auto loss2 = [&]() { return probe2(dense2.forward(input, false)); };
    for (auto& p : dense2.parameters()) check_gradient(*p.value, *p.grad, loss2);
}

TEST_CASE("relu gradient masks non-positive inputs") {
    Rng rng(106);
    ReLU relu("relu");
    Tensor input({2, 3, 4, 4});
    fill_random(input, rng);

    Tensor out = relu.forward(input, true);
    ProbeLoss probe(out, rng);
    Tensor grad_input = relu.backward(probe.projection);
    auto loss_fn = [&]() { return probe(relu.forward(input, false)); };
    check_gradient(input, grad_input, loss_fn);
}

TEST_CASE("batch-norm normalizes to zero mean unit variance before scale/shift") {
    Rng rng(107);
    BatchNorm2d bn("bn", 4);
    Tensor input({8, 4, 5, 5});
    fill_random(input, rng, 3.0);
    for (std::size_t i = 0; i < input.size(); ++i) input[i] += 1.5;  // nonzero mean

    Tensor out = bn.forward(input, true);  // gamma=1, beta=0 at init
    const std::size_t per_channel = 8 * 5 * 5;
    for (std::size_t c = 0; c < 4; ++c) {
        double mean = 0.0, var = 0.0;
        for (std::size_t n = 0; n < 8; ++n)
            for (std::size_t y = 0; y < 5; ++y)
                for (std::size_t x = 0; x < 5; ++x) mean += out.at4(n, c, y, x);
        mean /= per_channel;
        for (std::size_t n = 0; n < 8; ++n)
            for (std::size_t y = 0; y < 5; ++y)
                for (std::size_t x = 0; x < 5; ++x) {
                    double d = out.at4(n, c, y, x) - mean;
                    var += d * d;
                }
        var /= per_channel;
        CHECK(std::abs(mean) < 1e-5);
        CHECK(std::abs(var - 1.0) < 1e-4);
    }
}

TEST_CASE("batch-norm gradients match finite differences") {
    Rng rng(108);
    BatchNorm2d bn("bn", 3);
    auto params = bn.parameters();
    fill_random(*params[0].value, rng);  // arbitrary gamma
    for (std::size_t i = 0; i < params[0].value->size(); ++i) (*params[0].value)[i] += 1.5;
    fill_random(*params[1].value, rng);  // arbitrary beta

    Tensor input({4, 3, 4, 4});
    fill_random(input, rng, 2.0);

    Tensor out = bn.forward(input, true);
    ProbeLoss probe(out, rng);
    Tensor grad_input = bn.backward(probe.projection);
    Tensor gamma_grad = *bn.parameters()[0].grad;
    Tensor beta_grad = *bn.parameters()[1].grad;

    // training-mode loss: batch statistics are part of the function
    BatchNorm2d fresh("bn2", 3);
    *fresh.parameters()[0].value = *params[0].value;
    *fresh.parameters()[1].value = *params[1].value;
    auto loss_fn = [&]() { return probe(fresh.forward(input, true)); };
    check_gradient(input, grad_input, loss_fn);
    check_gradient(*fresh.parameters()[0].value, gamma_grad, loss_fn);
    check_gradient(*fresh.parameters()[1].value, beta_grad, loss_fn);
}

TEST_CASE("batch-norm inference uses running statistics") {
    Rng rng(109);
    BatchNorm2d bn("bn", 2);
    Tensor input({16, 2, 3, 3});
    fill_random(input, rng, 2.0);
    for (int step = 0; step < 50; ++step) bn.forward(input, true);

    Tensor eval1 = bn.forward(input, false);
    Tensor eval2 = bn.forward(input, false);
    for (std::size_t i = 0; i < eval1.size(); ++i) CHECK(eval1[i] == eval2[i]);

    // after many updates on the same batch the running stats converge to the
    // batch stats, so eval output approaches train output
    Tensor train_out = bn.forward(input, true);
    double max_diff = 0.0;
    for (std::size_t i = 0; i < eval1.size(); ++i) {
        max_diff = std::max(max_diff, std::abs(eval1[i] - train_out[i]));
    }
    CHECK(max_diff < 0.05);
}

TEST_CASE("max-pool forwards window maxima and routes gradient to argmax") {
    Rng rng(110);
    MaxPool2d pool("pool");
    const std::size_t N = 2, C = 3, H = 7, W = 5;  // odd sizes: trailing row/col dropped
    Tensor input({N, C, H, W});
    fill_random(input, rng);

    Tensor out = pool.forward(input, true);
    REQUIRE(out.shape() == std::vector<std::size_t>{N, C, 3, 2});

    Tensor upstream(out.shape());
    fill_random(upstream, rng);
    Tensor grad_input = pool.backward(upstream);

    // brute-force oracle, first-in-window tie handling
    Tensor oracle_out({N, C, 3, 2});
    Tensor oracle_grad({N, C, H, W});
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t y = 0; y < 3; ++y)
                for (std::size_t x = 0; x < 2; ++x) {
                    double best = -1e300;
                    std::size_t by = 0, bx = 0;
                    for (std::size_t dy = 0; dy < 2; ++dy)
                        for (std::size_t dx = 0; dx < 2; ++dx) {
                            double v = input.at4(n, c, 2 * y + dy, 2 * x + dx);
                            if (v > best) {
                                best = v;
                                by = 2 * y + dy;
                                bx = 2 * x + dx;
                            }
                        }
                    oracle_out.at4(n, c, y, x) = best;
                    oracle_grad.at4(n, c, by, bx) += upstream.at4(n, c, y, x);
                }

    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == oracle_out[i]);
    for (std::size_t i = 0; i < grad_input.size(); ++i) {
        CHECK(grad_input[i] == doctest::Approx(oracle_grad[i]).epsilon(1e-12));
    }
}

TEST_CASE("max-pool gradient also passes finite differences") {
    Rng rng(111);
    MaxPool2d pool("pool");
    Tensor input({1, 2, 6, 6});
    fill_random(input, rng);

    Tensor out = pool.forward(input, true);
    ProbeLoss probe(out, rng);
    Tensor grad_input = pool.backward(probe.projection);
    auto loss_fn = [&]() { return probe(pool.forward(input, false)); };
    check_gradient(input, grad_input, loss_fn);
}

TEST_CASE("dropout zeroes about the configured fraction in training") {
    Rng rng(112);
    Rng dropout_rng(55);
    Dropout drop("drop", 0.2, &dropout_rng);
    Tensor input({1, 1, 100, 100});
    input.fill(1.0);

    Tensor out = drop.forward(input, true);
    std::size_t zeroed = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (out[i] == 0.0) {
            ++zeroed;
        } else {
            CHECK(out[i] == doctest::Approx(1.0 / 0.8));  // inverted scaling
        }
    }
    double fraction = static_cast<double>(zeroed) / static_cast<double>(out.size());
    CHECK(fraction == doctest::Approx(0.20).epsilon(0.10));
    CHECK(std::abs(fraction - 0.20) < 0.02);

    Tensor eval_out = drop.forward(input, false);
    for (std::size_t i = 0; i < eval_out.size(); ++i) CHECK(eval_out[i] == 1.0);
}

TEST_CASE("dropout gradient under a frozen mask matches finite differences") {
    Rng dropout_rng(77);
    Dropout drop("drop", 0.2, &dropout_rng);
    Rng rng(113);
    Tensor input({1, 1, 6, 6});
    fill_random(input, rng);

    dropout_rng.seed(31);
    Tensor out = drop.forward(input, true);
    ProbeLoss probe(out, rng);
    Tensor grad_input = drop.backward(probe.projection);

    auto loss_fn = [&]() {
        dropout_rng.seed(31);  // same mask on every probe
        return probe(drop.forward(input, true));
    };
    check_gradient(input, grad_input, loss_fn);
}

TEST_CASE("flatten round-trips shapes") {
    Rng rng(114);
    Flatten flat("flatten");
    Tensor input({3, 2, 4, 4});
    fill_random(input, rng);
    Tensor out = flat.forward(input, true);
    REQUIRE(out.shape() == std::vector<std::size_t>{3, 32});
    Tensor back = flat.backward(out);
    REQUIRE(back.shape() == input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) CHECK(back[i] == input[i]);
}

TEST_CASE("backward without forward is a state error") {
    Rng rng(115);
    Conv2d conv("conv", 1, 1, 3, rng);
    Tensor g({1, 1, 3, 3});
    CHECK_THROWS_AS(conv.backward(g), StateError);

    Dense dense("fc", 4, 2, rng);
    Tensor g2({1, 2});
    CHECK_THROWS_AS(dense.backward(g2), StateError);
}

TEST_CASE("softmax cross-entropy values and weighting") {
    Tensor logits({1, 2});
    logits.fill(0.0);

    auto ln2 = softmax_cross_entropy(logits, {0}, {1.0, 1.0});
    CHECK(ln2.loss == doctest::Approx(std::log(2.0)));
    auto ln2b = softmax_cross_entropy(logits, {1}, {1.0, 1.0});
    CHECK(ln2b.loss == doctest::Approx(std::log(2.0)));

    Tensor l2({1, 2});
    l2.at2(0, 0) = 0.3;
    l2.at2(0, 1) = -1.1;
    auto unweighted = softmax_cross_entropy(l2, {1}, {1.0, 1.0});
    auto weighted = softmax_cross_entropy(l2, {1}, {1.0, 19.0});
    CHECK(weighted.loss == doctest::Approx(19.0 * unweighted.loss));
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(weighted.dlogits[i] == doctest::Approx(19.0 * unweighted.dlogits[i]));
    }
}

TEST_CASE("softmax cross-entropy gradient matches finite differences") {
    Rng rng(116);
    Tensor logits({5, 2});
    fill_random(logits, rng, 2.0);
    std::vector<int> labels{0, 1, 1, 0, 1};
    std::array<double, 2> weights{0.7, 3.2};

    auto res = softmax_cross_entropy(logits, labels, weights);
    auto loss_fn = [&]() { return softmax_cross_entropy(logits, labels, weights).loss; };
    check_gradient(logits, res.dlogits, loss_fn);

    Tensor bad({1, 2});
    bad[0] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(softmax_cross_entropy(bad, {0}, weights), NumericError);
}

TEST_CASE("regularization penalty arithmetic") {
    Network net(build_network(Scenario::Scenario1), 3);
    for (auto& p : net.parameters()) p.value->fill(0.0);
    CHECK(regularization_penalty(net, 0.5, 0.25) == 0.0);

    // one regularized weight set to 2.0: 0.5*|2| + 0.25*4 = 2.0
    for (auto& p : net.parameters()) {
        if (p.regularized) {
            (*p.value)[0] = 2.0;
            break;
        }
    }
    CHECK(regularization_penalty(net, 0.5, 0.25) == doctest::Approx(2.0));
    CHECK_THROWS_AS(regularization_penalty(net, -0.1, 0.0), std::invalid_argument);
}

TEST_CASE("penalty gradient matches finite differences away from zero") {
    NetworkSpec spec;
    spec.scenario = Scenario::Scenario1;
    spec.conv1_filters = 2;
    spec.hidden_units = 4;
    Network net(spec, 9);
    Rng rng(117);
    // push weights away from the |w| kink
    for (auto& p : net.parameters()) {
        if (!p.regularized) continue;
        for (std::size_t i = 0; i < p.value->size(); ++i) {
            double sign = (*p.value)[i] >= 0.0 ? 1.0 : -1.0;
            (*p.value)[i] = sign * (0.2 + std::abs((*p.value)[i]));
        }
    }

    const double l1 = 0.17, l2 = 0.41;
    net.zero_grads();
    add_regularization_gradients(net, l1, l2);
    auto loss_fn = [&]() { return regularization_penalty(net, l1, l2); };
    for (auto& p : net.parameters()) {
        if (!p.regularized) continue;
        check_gradient(*p.value, *p.grad, loss_fn);
    }
    // non-regularized parameters receive no penalty gradient
    for (auto& p : net.parameters()) {
        if (p.regularized) continue;
        for (std::size_t i = 0; i < p.grad->size(); ++i) CHECK((*p.grad)[i] == 0.0);
    }
}
