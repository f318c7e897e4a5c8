#include "poisonguard/network.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "poisonguard/error.hpp"

namespace poisonguard::nn {

std::string scenario_name(Scenario s) {
    switch (s) {
        case Scenario::Scenario1: return "scenario1";
        case Scenario::Scenario2: return "scenario2";
        case Scenario::Default: return "default";
    }
    return "scenario1";
}

Scenario parse_scenario(const std::string& name) {
    if (name == "scenario1") return Scenario::Scenario1;
    if (name == "scenario2") return Scenario::Scenario2;
    if (name == "default") return Scenario::Default;
    throw std::invalid_argument("unknown scenario '" + name + "'");
}

NetworkSpec build_network(Scenario scenario) {
    NetworkSpec spec;
    spec.scenario = scenario;
    return spec;
}

Network::Network(const NetworkSpec& spec, std::uint64_t init_seed)
    : spec_(spec), dropout_rng_(derive_seed(init_seed, "dropout")) {
    Rng init_rng(derive_seed(init_seed, "init"));

    // input (N,1,32,32)
    layers_.push_back(std::make_unique<Conv2d>("conv1", 1, spec.conv1_filters, 4, init_rng));
    static_cast<Conv2d*>(layers_.back().get())->set_needs_input_grad(false);
    if (spec.has_batch_norm()) {
        layers_.push_back(std::make_unique<BatchNorm2d>("bn1", spec.conv1_filters));
    }
    layers_.push_back(std::make_unique<ReLU>("relu1"));
    layers_.push_back(std::make_unique<MaxPool2d>("pool1"));
    layers_.push_back(std::make_unique<Dropout>("drop1", spec.dropout_rate, &dropout_rng_));
    std::size_t ch = spec.conv1_filters;
    std::size_t side = (32 - 4 + 1) / 2;  // 14

    if (spec.has_second_block()) {
        layers_.push_back(std::make_unique<Conv2d>("conv2", ch, spec.conv2_filters, 3, init_rng));
        if (spec.has_batch_norm()) {
            layers_.push_back(std::make_unique<BatchNorm2d>("bn2", spec.conv2_filters));
        }
        layers_.push_back(std::make_unique<ReLU>("relu2"));
        layers_.push_back(std::make_unique<MaxPool2d>("pool2"));
        layers_.push_back(std::make_unique<Dropout>("drop2", spec.dropout_rate, &dropout_rng_));
        ch = spec.conv2_filters;
        side = (side - 3 + 1) / 2;  // 6
    }

    layers_.push_back(std::make_unique<Flatten>("flatten"));
    layers_.push_back(
        std::make_unique<Dense>("dense1", ch * side * side, spec.hidden_units, init_rng));
    layers_.push_back(std::make_unique<ReLU>("relu_fc"));
    layers_.push_back(std::make_unique<Dense>("dense2", spec.hidden_units, 2, init_rng));
}

Tensor Network::forward(const Tensor& batch, bool training) {
    if (batch.rank() != 4 || batch.dim(1) != 1 || batch.dim(2) != 32 || batch.dim(3) != 32) {
        throw DimensionError("network input must be (N,1,32,32)");
    }
    Tensor t = batch;
    for (auto& layer : layers_) t = layer->forward(t, training);
    if (!t.all_finite()) throw NumericError("non-finite logits");
    has_pending_backward_ = training;
    return t;
}

void Network::backward(const Tensor& dlogits) {
    if (!has_pending_backward_) {
        throw StateError("backward without a preceding training-mode forward");
    }
    Tensor g = dlogits;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
        g = (*it)->backward(g);
    }
    has_pending_backward_ = false;
}

void Network::zero_grads() {
    for (auto& layer : layers_) {
        for (auto& p : layer->parameters()) p.grad->fill(0.0);
    }
}

std::vector<ParamRef> Network::parameters() {
    std::vector<ParamRef> out;
    for (auto& layer : layers_) {
        for (auto& p : layer->parameters()) out.push_back(p);
    }
    return out;
}

std::vector<ParamRef> Network::state_tensors() {
    std::vector<ParamRef> out;
    for (auto& layer : layers_) {
        for (auto& p : layer->state_tensors()) out.push_back(p);
    }
    return out;
}

std::vector<std::string> Network::layer_names() const {
    std::vector<std::string> names;
    for (const auto& layer : layers_) names.push_back(layer->name());
    return names;
}

std::size_t Network::parameter_count() {
    std::size_t n = 0;
    for (auto& p : parameters()) n += p.value->size();
    return n;
}

LossResult softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                                 const std::array<double, 2>& class_weights) {
    if (logits.rank() != 2 || logits.dim(1) != 2) {
        throw DimensionError("softmax_cross_entropy expects (N,2) logits");
    }
    if (logits.dim(0) != labels.size()) {
        throw DimensionError("logits batch size does not match labels");
    }
    if (!logits.all_finite()) throw NumericError("non-finite logits in loss");

    const std::size_t n = labels.size();
    LossResult result;
    result.dlogits = Tensor({n, 2});
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        int label = labels[i];
        if (label != 0 && label != 1) throw std::invalid_argument("labels must be 0 or 1");
        double z0 = logits.at2(i, 0), z1 = logits.at2(i, 1);
        double zmax = std::max(z0, z1);
        double e0 = std::exp(z0 - zmax), e1 = std::exp(z1 - zmax);
        double denom = e0 + e1;
        double p0 = e0 / denom, p1 = e1 / denom;
        double w = class_weights[static_cast<std::size_t>(label)];
        double p_label = label == 0 ? p0 : p1;
        total += w * -std::log(std::max(p_label, 1e-300));
        result.dlogits.at2(i, 0) = w * (p0 - (label == 0 ? 1.0 : 0.0)) / static_cast<double>(n);
        result.dlogits.at2(i, 1) = w * (p1 - (label == 1 ? 1.0 : 0.0)) / static_cast<double>(n);
    }
    result.loss = total / static_cast<double>(n);
    return result;
}

Tensor softmax2(const Tensor& logits) {
    Tensor probs({logits.dim(0), 2});
    for (std::size_t i = 0; i < logits.dim(0); ++i) {
        double z0 = logits.at2(i, 0), z1 = logits.at2(i, 1);
        double zmax = std::max(z0, z1);
        double e0 = std::exp(z0 - zmax), e1 = std::exp(z1 - zmax);
        probs.at2(i, 0) = e0 / (e0 + e1);
        probs.at2(i, 1) = e1 / (e0 + e1);
    }
    return probs;
}

double regularization_penalty(Network& net, double l1, double l2) {
    if (l1 < 0.0 || l2 < 0.0) throw std::invalid_argument("penalty coefficients must be >= 0");
    double p = 0.0;
    for (auto& param : net.parameters()) {
        if (!param.regularized) continue;
        for (std::size_t i = 0; i < param.value->size(); ++i) {
            double w = (*param.value)[i];
            p += l1 * std::abs(w) + l2 * w * w;
        }
    }
    return p;
}

void add_regularization_gradients(Network& net, double l1, double l2) {
    if (l1 == 0.0 && l2 == 0.0) return;
    for (auto& param : net.parameters()) {
        if (!param.regularized) continue;
        for (std::size_t i = 0; i < param.value->size(); ++i) {
            double w = (*param.value)[i];
            double sign = w > 0.0 ? 1.0 : (w < 0.0 ? -1.0 : 0.0);
            (*param.grad)[i] += l1 * sign + 2.0 * l2 * w;
        }
    }
}

// ------------------------------------------------------------- checkpoint

void save_checkpoint(Network& net, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());

    out << "pgmodel v1 scenario=" << scenario_name(net.spec().scenario) << "\n";
    auto write_tensor = [&out](const ParamRef& p) {
        out << "tensor " << p.name << " " << p.value->shape().size();
        for (auto d : p.value->shape()) out << " " << d;
        out << "\n";
        std::vector<float> f(p.value->size());
        for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<float>((*p.value)[i]);
        out.write(reinterpret_cast<const char*>(f.data()),
                  static_cast<std::streamsize>(f.size() * sizeof(float)));
        out << "\n";
    };
    for (auto& p : net.parameters()) write_tensor(p);
    for (auto& p : net.state_tensors()) write_tensor(p);
    out << "end\n";
    if (!out) throw IoError("write failed: " + path.string());
}

std::unique_ptr<Network> load_checkpoint(const std::filesystem::path& path,
                                         NetworkSpec* out_spec) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty checkpoint", 0);
    if (line.rfind("pgmodel v1 scenario=", 0) != 0) throw ParseError("bad checkpoint header", 1);
    Scenario scenario = parse_scenario(line.substr(20));

    std::map<std::string, Tensor> tensors;
    while (std::getline(in, line)) {
        if (line == "end") break;
        if (line.empty()) continue;
        std::istringstream meta(line);
        std::string kw, name;
        std::size_t rank = 0;
        meta >> kw >> name >> rank;
        if (kw != "tensor" || name.empty() || rank == 0 || rank > 4) {
            throw ParseError("bad tensor record '" + line + "'", 0);
        }
        std::vector<std::size_t> shape(rank);
        for (auto& d : shape) {
            if (!(meta >> d) || d == 0) throw ParseError("bad tensor shape", 0);
        }
        std::vector<float> f(shape_product(shape));
        if (!in.read(reinterpret_cast<char*>(f.data()),
                     static_cast<std::streamsize>(f.size() * sizeof(float)))) {
            throw ParseError("truncated checkpoint tensor " + name, 0);
        }
        in.get();  // trailing newline
        std::vector<double> d(f.begin(), f.end());
        tensors.emplace(name, Tensor(shape, std::move(d)));
    }

    NetworkSpec spec;
    spec.scenario = scenario;
    auto need = [&tensors](const std::string& name) -> const Tensor& {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw ParseError("checkpoint missing tensor " + name, 0);
        return it->second;
    };
    spec.conv1_filters = need("conv1.weight").dim(0);
    if (spec.has_second_block()) spec.conv2_filters = need("conv2.weight").dim(0);
    spec.hidden_units = need("dense1.weight").dim(0);

    auto net = std::make_unique<Network>(spec, /*init_seed=*/0);
    std::size_t consumed = 0;
    auto load_into = [&](ParamRef p) {
        const Tensor& stored = need(p.name);
        if (stored.shape() != p.value->shape()) {
            throw DimensionError("checkpoint tensor " + p.name + " has wrong shape");
        }
        *p.value = stored;
        ++consumed;
    };
    for (auto& p : net->parameters()) load_into(p);
    for (auto& p : net->state_tensors()) load_into(p);
    if (consumed != tensors.size()) {
        throw ParseError("checkpoint holds unexpected tensors", 0);
    }
    if (out_spec) *out_spec = spec;
    return net;
}

}  // namespace poisonguard::nn
