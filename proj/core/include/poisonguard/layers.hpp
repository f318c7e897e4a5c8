#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "poisonguard/rng.hpp"
#include "poisonguard/tensor.hpp"

namespace poisonguard::nn {

// Named view of a layer tensor. `grad` is null for non-trainable state
// (batch-norm running statistics). `regularized` marks the weight matrices
// that the L1/L2 penalty applies to (conv and dense weights, not biases,
// not batch-norm parameters).
struct ParamRef {
    std::string name;
    Tensor* value = nullptr;
    Tensor* grad = nullptr;
    bool regularized = false;
};

class Layer {
public:
    virtual ~Layer() = default;

    virtual Tensor forward(const Tensor& input, bool training) = 0;
    // Consumes the cache left by the previous forward. Throws StateError if
    // no cached activation is available.
    virtual Tensor backward(const Tensor& grad_output) = 0;

    virtual const std::string& name() const = 0;
    virtual std::vector<ParamRef> parameters() { return {}; }
    virtual std::vector<ParamRef> state_tensors() { return {}; }
};

class Conv2d final : public Layer {
public:
    // Valid convolution, stride 1. He-uniform init scaled by fan-in.
    Conv2d(std::string name, std::size_t in_channels, std::size_t out_channels,
           std::size_t kernel, Rng& init_rng);

    Tensor forward(const Tensor& input, bool training) override;
    Tensor backward(const Tensor& grad_output) override;
    const std::string& name() const override { return name_; }
    std::vector<ParamRef> parameters() override;

    // The first layer of a network never needs an input gradient; skipping
    // it saves roughly a third of the backward cost.
    void set_needs_input_grad(bool v) { needs_input_grad_ = v; }

    std::size_t in_channels() const { return in_channels_; }
    std::size_t out_channels() const { return out_channels_; }
    std::size_t kernel() const { return kernel_; }

private:
    std::string name_;
    std::size_t in_channels_, out_channels_, kernel_;
    bool needs_input_grad_ = true;
    Tensor weight_;  // (O, I, K, K)
    Tensor bias_;    // (O)
    Tensor weight_grad_, bias_grad_;
    Tensor cached_input_;
    bool has_cache_ = false;
};

class BatchNorm2d final : public Layer {
public:
    explicit BatchNorm2d(std::string name, std::size_t channels);

    Tensor forward(const Tensor& input, bool training) override;
    Tensor backward(const Tensor& grad_output) override;
    const std::string& name() const override { return name_; }
    std::vector<ParamRef> parameters() override;
    std::vector<ParamRef> state_tensors() override;

    static constexpr double kEps = 1e-5;
    static constexpr double kMomentum = 0.1;  // running = (1-m)*running + m*batch

private:
    std::string name_;
    std::size_t channels_;
    Tensor gamma_, beta_;
    Tensor gamma_grad_, beta_grad_;
    Tensor running_mean_, running_var_;
    // training-mode cache
    Tensor cached_norm_;  // x_hat
    std::vector<double> cached_inv_std_;
    bool has_cache_ = false;
};

class ReLU final : public Layer {
public:
    explicit ReLU(std::string name) : name_(std::move(name)) {}
    Tensor forward(const Tensor& input, bool training) override;
    Tensor backward(const Tensor& grad_output) override;
    const std::string& name() const override { return name_; }

private:
    std::string name_;
    Tensor cached_input_;
    bool has_cache_ = false;
};

class MaxPool2d final : public Layer {
public:
    // 2x2 window, stride 2; trailing odd rows/columns are dropped.
    explicit MaxPool2d(std::string name) : name_(std::move(name)) {}
    Tensor forward(const Tensor& input, bool training) override;
    Tensor backward(const Tensor& grad_output) override;
    const std::string& name() const override { return name_; }

private:
    std::string name_;
    std::vector<std::size_t> cached_argmax_;  // flat input index per output element
    std::vector<std::size_t> cached_input_shape_;
    bool has_cache_ = false;
};

class Dropout final : public Layer {
public:
    // Inverted dropout: surviving activations are scaled by 1/(1-rate) in
    // training mode; inference is the identity.
    Dropout(std::string name, double rate, Rng* rng)
        : name_(std::move(name)), rate_(rate), rng_(rng) {}

    Tensor forward(const Tensor& input, bool training) override;
    Tensor backward(const Tensor& grad_output) override;
    const std::string& name() const override { return name_; }
    double rate() const { return rate_; }

private:
    std::string name_;
    double rate_;
    Rng* rng_;
    std::vector<std::uint8_t> cached_mask_;
    bool has_cache_ = false;
};

class Flatten final : public Layer {
public:
    explicit Flatten(std::string name) : name_(std::move(name)) {}
    Tensor forward(const Tensor& input, bool training) override;
    Tensor backward(const Tensor& grad_output) override;
    const std::string& name() const override { return name_; }

private:
    std::string name_;
    std::vector<std::size_t> cached_input_shape_;
    bool has_cache_ = false;
};

class Dense final : public Layer {
public:
    Dense(std::string name, std::size_t in_features, std::size_t out_features, Rng& init_rng);

    Tensor forward(const Tensor& input, bool training) override;
    Tensor backward(const Tensor& grad_output) override;
    const std::string& name() const override { return name_; }
    std::vector<ParamRef> parameters() override;

    std::size_t in_features() const { return in_features_; }
    std::size_t out_features() const { return out_features_; }

private:
    std::string name_;
    std::size_t in_features_, out_features_;
    Tensor weight_;  // (out, in)
    Tensor bias_;    // (out)
    Tensor weight_grad_, bias_grad_;
    Tensor cached_input_;
    bool has_cache_ = false;
};

}  // namespace poisonguard::nn
