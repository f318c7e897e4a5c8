#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "poisonguard/layers.hpp"
#include "poisonguard/tensor.hpp"

namespace poisonguard::nn {

enum class Scenario { Scenario1, Scenario2, Default };

std::string scenario_name(Scenario s);
Scenario parse_scenario(const std::string& name);

// Fixed detector architectures.
//
// Scenario1:  one conv block with batch norm
//   conv(4x4) -> bn -> relu -> pool -> dropout -> flatten -> dense -> relu -> dense
// Scenario2:  two conv blocks with batch norm
//   conv(4x4) block, conv(3x3) block, then the dense head
// Default:    two conv blocks, no batch norm (the unmodified baseline);
//   its stage list [conv, relu, pool, dropout] x2 + [flatten, dense, relu,
//   dense] counts 12 layers. Softmax lives in the loss and is not a stage.
struct NetworkSpec {
    Scenario scenario = Scenario::Scenario1;
    std::size_t conv1_filters = 16;
    std::size_t conv2_filters = 32;
    std::size_t hidden_units = 64;
    double dropout_rate = 0.20;

    bool has_second_block() const { return scenario != Scenario::Scenario1; }
    bool has_batch_norm() const { return scenario != Scenario::Default; }

    bool operator==(const NetworkSpec&) const = default;
};

NetworkSpec build_network(Scenario scenario);

class Network {
public:
    Network(const NetworkSpec& spec, std::uint64_t init_seed);

    // batch (N,1,32,32) -> logits (N,2). Dropout fires and batch-norm uses
    // batch statistics only in training mode.
    Tensor forward(const Tensor& batch, bool training);
    // Propagates dLoss/dLogits; parameter gradients accumulate.
    void backward(const Tensor& dlogits);

    void zero_grads();
    std::vector<ParamRef> parameters();
    std::vector<ParamRef> state_tensors();
    const NetworkSpec& spec() const { return spec_; }
    // The stage list under the documented layer-counting convention.
    std::vector<std::string> layer_names() const;
    std::size_t parameter_count();

    void reseed_dropout(std::uint64_t seed) { dropout_rng_.seed(seed); }

private:
    NetworkSpec spec_;
    Rng dropout_rng_;
    std::vector<std::unique_ptr<Layer>> layers_;
    bool has_pending_backward_ = false;
};

struct LossResult {
    double loss = 0.0;
    Tensor dlogits;
};

// Mean over the batch of w(label_i) * -log softmax(logits_i)[label_i].
// class_weights[0] applies to Normal, [1] to Attack.
LossResult softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                                 const std::array<double, 2>& class_weights);

// (N,2) logits -> (N,2) probabilities.
Tensor softmax2(const Tensor& logits);

// l1*sum|w| + l2*sum w^2 over regularized weights only.
double regularization_penalty(Network& net, double l1, double l2);
// Adds d(penalty)/dw to the accumulated gradients; sign(0) taken as 0.
void add_regularization_gradients(Network& net, double l1, double l2);

// Checkpoint: text header `pgmodel v1 scenario=<s>`, then per tensor a text
// line `tensor <name> <rank> <dims...>` followed by raw little-endian
// float32 data, terminated by `end`. Loading validates names and shapes
// against the spec line.
void save_checkpoint(Network& net, const std::filesystem::path& path);
// Returns a network with the stored spec and parameters.
std::unique_ptr<Network> load_checkpoint(const std::filesystem::path& path,
                                         NetworkSpec* out_spec = nullptr);

}  // namespace poisonguard::nn
