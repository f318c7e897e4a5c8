#include "poisonguard/layers.hpp"

#include <algorithm>
#include <cmath>

#include "poisonguard/error.hpp"

namespace poisonguard::nn {

namespace {

void require_4d(const Tensor& t, const std::string& who) {
    if (t.rank() != 4) throw DimensionError(who + ": expected a 4-d (N,C,H,W) tensor");
}

double he_uniform_limit(std::size_t fan_in) {
    return std::sqrt(6.0 / static_cast<double>(fan_in));
}

}  // namespace

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(std::string name, std::size_t in_channels, std::size_t out_channels,
               std::size_t kernel, Rng& init_rng)
    : name_(std::move(name)),
      in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      weight_({out_channels, in_channels, kernel, kernel}),
      bias_({out_channels}),
      weight_grad_({out_channels, in_channels, kernel, kernel}),
      bias_grad_({out_channels}) {
    double limit = he_uniform_limit(in_channels * kernel * kernel);
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t i = 0; i < weight_.size(); ++i) weight_[i] = dist(init_rng);
}

Tensor Conv2d::forward(const Tensor& input, bool training) {
    require_4d(input, name_);
    if (input.dim(1) != in_channels_) {
        throw DimensionError(name_ + ": input has " + std::to_string(input.dim(1)) +
                             " channels, expected " + std::to_string(in_channels_));
    }
    const std::size_t n_batch = input.dim(0), h = input.dim(2), w = input.dim(3);
    if (h < kernel_ || w < kernel_) throw DimensionError(name_ + ": input smaller than kernel");
    const std::size_t oh = h - kernel_ + 1, ow = w - kernel_ + 1;

    Tensor out({n_batch, out_channels_, oh, ow});
    for (std::size_t n = 0; n < n_batch; ++n) {
        for (std::size_t o = 0; o < out_channels_; ++o) {
            double b = bias_[o];
            for (std::size_t y = 0; y < oh; ++y) {
                double* out_row = &out.at4(n, o, y, 0);
                for (std::size_t x = 0; x < ow; ++x) out_row[x] = b;
            }
            for (std::size_t i = 0; i < in_channels_; ++i) {
                for (std::size_t ky = 0; ky < kernel_; ++ky) {
                    for (std::size_t kx = 0; kx < kernel_; ++kx) {
                        const double wgt = weight_.at4(o, i, ky, kx);
                        for (std::size_t y = 0; y < oh; ++y) {
                            const double* in_row = &input.at4(n, i, y + ky, kx);
                            double* out_row = &out.at4(n, o, y, 0);
                            for (std::size_t x = 0; x < ow; ++x) {
                                out_row[x] += wgt * in_row[x];
                            }
                        }
                    }
                }
            }
        }
    }
    if (training) {
        cached_input_ = input;
        has_cache_ = true;
    }
    return out;
}

Tensor Conv2d::backward(const Tensor& grad_output) {
    if (!has_cache_) throw StateError(name_ + ": backward without forward");
    const Tensor& input = cached_input_;
    const std::size_t n_batch = input.dim(0), h = input.dim(2), w = input.dim(3);
    const std::size_t oh = h - kernel_ + 1, ow = w - kernel_ + 1;

    // gradients accumulate; Network::zero_grads() resets them
    for (std::size_t n = 0; n < n_batch; ++n) {
        for (std::size_t o = 0; o < out_channels_; ++o) {
            double bsum = 0.0;
            for (std::size_t y = 0; y < oh; ++y) {
                const double* g_row = &grad_output.at4(n, o, y, 0);
                for (std::size_t x = 0; x < ow; ++x) bsum += g_row[x];
            }
            bias_grad_[o] += bsum;
            for (std::size_t i = 0; i < in_channels_; ++i) {
                for (std::size_t ky = 0; ky < kernel_; ++ky) {
                    for (std::size_t kx = 0; kx < kernel_; ++kx) {
                        double acc = 0.0;
                        for (std::size_t y = 0; y < oh; ++y) {
                            const double* in_row = &input.at4(n, i, y + ky, kx);
                            const double* g_row = &grad_output.at4(n, o, y, 0);
                            for (std::size_t x = 0; x < ow; ++x) {
                                acc += in_row[x] * g_row[x];
                            }
                        }
                        weight_grad_.at4(o, i, ky, kx) += acc;
                    }
                }
            }
        }
    }

    Tensor grad_input;
    if (needs_input_grad_) {
        grad_input = Tensor({n_batch, in_channels_, h, w});
        for (std::size_t n = 0; n < n_batch; ++n) {
            for (std::size_t o = 0; o < out_channels_; ++o) {
                for (std::size_t i = 0; i < in_channels_; ++i) {
                    for (std::size_t ky = 0; ky < kernel_; ++ky) {
                        for (std::size_t kx = 0; kx < kernel_; ++kx) {
                            const double wgt = weight_.at4(o, i, ky, kx);
                            for (std::size_t y = 0; y < oh; ++y) {
                                const double* g_row = &grad_output.at4(n, o, y, 0);
                                double* gi_row = &grad_input.at4(n, i, y + ky, kx);
                                for (std::size_t x = 0; x < ow; ++x) {
                                    gi_row[x] += wgt * g_row[x];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    has_cache_ = false;
    return grad_input;
}

std::vector<ParamRef> Conv2d::parameters() {
    return {{name_ + ".weight", &weight_, &weight_grad_, true},
            {name_ + ".bias", &bias_, &bias_grad_, false}};
}

// ------------------------------------------------------------ BatchNorm2d

BatchNorm2d::BatchNorm2d(std::string name, std::size_t channels)
    : name_(std::move(name)),
      channels_(channels),
      gamma_({channels}),
      beta_({channels}),
      gamma_grad_({channels}),
      beta_grad_({channels}),
      running_mean_({channels}),
      running_var_({channels}) {
    gamma_.fill(1.0);
    running_var_.fill(1.0);
}

Tensor BatchNorm2d::forward(const Tensor& input, bool training) {
    require_4d(input, name_);
    if (input.dim(1) != channels_) throw DimensionError(name_ + ": channel mismatch");
    const std::size_t n_batch = input.dim(0), h = input.dim(2), w = input.dim(3);
    const std::size_t per_channel = n_batch * h * w;

    Tensor out({n_batch, channels_, h, w});
    if (training) {
        cached_norm_ = Tensor({n_batch, channels_, h, w});
        cached_inv_std_.assign(channels_, 0.0);
        for (std::size_t c = 0; c < channels_; ++c) {
            double mean = 0.0;
            for (std::size_t n = 0; n < n_batch; ++n)
                for (std::size_t y = 0; y < h; ++y)
                    for (std::size_t x = 0; x < w; ++x) mean += input.at4(n, c, y, x);
            mean /= static_cast<double>(per_channel);

            double var = 0.0;
            for (std::size_t n = 0; n < n_batch; ++n)
                for (std::size_t y = 0; y < h; ++y)
                    for (std::size_t x = 0; x < w; ++x) {
                        double d = input.at4(n, c, y, x) - mean;
                        var += d * d;
                    }
            var /= static_cast<double>(per_channel);  // biased, used for normalization

            double inv_std = 1.0 / std::sqrt(var + kEps);
            cached_inv_std_[c] = inv_std;
            for (std::size_t n = 0; n < n_batch; ++n)
                for (std::size_t y = 0; y < h; ++y)
                    for (std::size_t x = 0; x < w; ++x) {
                        double xn = (input.at4(n, c, y, x) - mean) * inv_std;
                        cached_norm_.at4(n, c, y, x) = xn;
                        out.at4(n, c, y, x) = gamma_[c] * xn + beta_[c];
                    }

            double unbiased = per_channel > 1
                                  ? var * static_cast<double>(per_channel) /
                                        static_cast<double>(per_channel - 1)
                                  : var;
            running_mean_[c] = (1.0 - kMomentum) * running_mean_[c] + kMomentum * mean;
            running_var_[c] = (1.0 - kMomentum) * running_var_[c] + kMomentum * unbiased;
        }
        has_cache_ = true;
    } else {
        for (std::size_t c = 0; c < channels_; ++c) {
            double inv_std = 1.0 / std::sqrt(running_var_[c] + kEps);
            double mean = running_mean_[c];
            for (std::size_t n = 0; n < n_batch; ++n)
                for (std::size_t y = 0; y < h; ++y)
                    for (std::size_t x = 0; x < w; ++x) {
                        out.at4(n, c, y, x) =
                            gamma_[c] * (input.at4(n, c, y, x) - mean) * inv_std + beta_[c];
                    }
        }
    }
    return out;
}

Tensor BatchNorm2d::backward(const Tensor& grad_output) {
    if (!has_cache_) throw StateError(name_ + ": backward without training-mode forward");
    const std::size_t n_batch = grad_output.dim(0), h = grad_output.dim(2),
                      w = grad_output.dim(3);
    const double m = static_cast<double>(n_batch * h * w);

    Tensor grad_input({n_batch, channels_, h, w});
    for (std::size_t c = 0; c < channels_; ++c) {
        double sum_dy = 0.0, sum_dy_xn = 0.0;
        for (std::size_t n = 0; n < n_batch; ++n)
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x) {
                    double dy = grad_output.at4(n, c, y, x);
                    sum_dy += dy;
                    sum_dy_xn += dy * cached_norm_.at4(n, c, y, x);
                }
        gamma_grad_[c] += sum_dy_xn;
        beta_grad_[c] += sum_dy;

        const double scale = gamma_[c] * cached_inv_std_[c];
        for (std::size_t n = 0; n < n_batch; ++n)
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x) {
                    double dy = grad_output.at4(n, c, y, x);
                    double xn = cached_norm_.at4(n, c, y, x);
                    grad_input.at4(n, c, y, x) =
                        scale * (dy - sum_dy / m - xn * sum_dy_xn / m);
                }
    }
    has_cache_ = false;
    return grad_input;
}

std::vector<ParamRef> BatchNorm2d::parameters() {
    return {{name_ + ".gamma", &gamma_, &gamma_grad_, false},
            {name_ + ".beta", &beta_, &beta_grad_, false}};
}

std::vector<ParamRef> BatchNorm2d::state_tensors() {
    return {{name_ + ".running_mean", &running_mean_, nullptr, false},
            {name_ + ".running_var", &running_var_, nullptr, false}};
}

// ------------------------------------------------------------------ ReLU

Tensor ReLU::forward(const Tensor& input, bool training) {
    Tensor out = input;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (out[i] < 0.0) out[i] = 0.0;
    }
    if (training) {
        cached_input_ = input;
        has_cache_ = true;
    }
    return out;
}

Tensor ReLU::backward(const Tensor& grad_output) {
    if (!has_cache_) throw StateError(name_ + ": backward without forward");
    Tensor grad = grad_output;
    for (std::size_t i = 0; i < grad.size(); ++i) {
        if (cached_input_[i] <= 0.0) grad[i] = 0.0;
    }
    has_cache_ = false;
    return grad;
}

// ------------------------------------------------------------- MaxPool2d

Tensor MaxPool2d::forward(const Tensor& input, bool training) {
    require_4d(input, name_);
    const std::size_t n_batch = input.dim(0), ch = input.dim(1);
    const std::size_t h = input.dim(2), w = input.dim(3);
    const std::size_t oh = h / 2, ow = w / 2;
    if (oh == 0 || ow == 0) throw DimensionError(name_ + ": input too small to pool");

    Tensor out({n_batch, ch, oh, ow});
    std::vector<std::size_t> argmax(out.size(), 0);

    std::size_t out_idx = 0;
    for (std::size_t n = 0; n < n_batch; ++n) {
        for (std::size_t c = 0; c < ch; ++c) {
            for (std::size_t y = 0; y < oh; ++y) {
                for (std::size_t x = 0; x < ow; ++x) {
                    // first maximum in row-major window order wins ties
                    std::size_t best = ((n * ch + c) * h + 2 * y) * w + 2 * x;
                    double best_v = input[best];
                    const std::size_t cand[3] = {best + 1, best + w, best + w + 1};
                    for (std::size_t k = 0; k < 3; ++k) {
                        if (input[cand[k]] > best_v) {
                            best_v = input[cand[k]];
                            best = cand[k];
                        }
                    }
                    out[out_idx] = best_v;
                    argmax[out_idx] = best;
                    ++out_idx;
                }
            }
        }
    }
    if (training) {
        cached_argmax_ = std::move(argmax);
        cached_input_shape_ = input.shape();
        has_cache_ = true;
    }
    return out;
}

Tensor MaxPool2d::backward(const Tensor& grad_output) {
    if (!has_cache_) throw StateError(name_ + ": backward without forward");
    Tensor grad_input(cached_input_shape_);
    for (std::size_t i = 0; i < grad_output.size(); ++i) {
        grad_input[cached_argmax_[i]] += grad_output[i];
    }
    has_cache_ = false;
    return grad_input;
}

// --------------------------------------------------------------- Dropout

Tensor Dropout::forward(const Tensor& input, bool training) {
    if (!training) return input;  // identity, no state touched
    if (rate_ == 0.0) {
        cached_mask_.clear();  // identity pass, but backward stays legal
        has_cache_ = true;
        return input;
    }
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double keep = 1.0 - rate_;
    Tensor out = input;
    cached_mask_.assign(input.size(), 0);
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (u(*rng_) < keep) {
            cached_mask_[i] = 1;
            out[i] /= keep;
        } else {
            out[i] = 0.0;
        }
    }
    has_cache_ = true;
    return out;
}

Tensor Dropout::backward(const Tensor& grad_output) {
    if (!has_cache_) throw StateError(name_ + ": backward without forward");
    has_cache_ = false;
    if (cached_mask_.empty()) return grad_output;
    Tensor grad = grad_output;
    const double keep = 1.0 - rate_;
    for (std::size_t i = 0; i < grad.size(); ++i) {
        grad[i] = cached_mask_[i] ? grad[i] / keep : 0.0;
    }
    return grad;
}

// --------------------------------------------------------------- Flatten

Tensor Flatten::forward(const Tensor& input, bool training) {
    if (training) {
        cached_input_shape_ = input.shape();
        has_cache_ = true;
    }
    std::size_t n_batch = input.dim(0);
    std::vector<double> data(input.data(), input.data() + input.size());
    return Tensor({n_batch, input.size() / n_batch}, std::move(data));
}

Tensor Flatten::backward(const Tensor& grad_output) {
    if (!has_cache_) throw StateError(name_ + ": backward without forward");
    has_cache_ = false;
    std::vector<double> data(grad_output.data(), grad_output.data() + grad_output.size());
    return Tensor(cached_input_shape_, std::move(data));
}

// ----------------------------------------------------------------- Dense

Dense::Dense(std::string name, std::size_t in_features, std::size_t out_features, Rng& init_rng)
    : name_(std::move(name)),
      in_features_(in_features),
      out_features_(out_features),
      weight_({out_features, in_features}),
      bias_({out_features}),
      weight_grad_({out_features, in_features}),
      bias_grad_({out_features}) {
    double limit = he_uniform_limit(in_features);
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t i = 0; i < weight_.size(); ++i) weight_[i] = dist(init_rng);
}

Tensor Dense::forward(const Tensor& input, bool training) {
    if (input.rank() != 2 || input.dim(1) != in_features_) {
        throw DimensionError(name_ + ": expected (N," + std::to_string(in_features_) + ") input");
    }
    const std::size_t n_batch = input.dim(0);
    Tensor out({n_batch, out_features_});
    for (std::size_t n = 0; n < n_batch; ++n) {
        const double* in_row = &input.at2(n, 0);
        for (std::size_t o = 0; o < out_features_; ++o) {
            const double* w_row = &weight_.at2(o, 0);
            double acc = bias_[o];
            for (std::size_t i = 0; i < in_features_; ++i) acc += w_row[i] * in_row[i];
            out.at2(n, o) = acc;
        }
    }
    if (training) {
        cached_input_ = input;
        has_cache_ = true;
    }
    return out;
}

Tensor Dense::backward(const Tensor& grad_output) {
    if (!has_cache_) throw StateError(name_ + ": backward without forward");
    const std::size_t n_batch = cached_input_.dim(0);

    for (std::size_t n = 0; n < n_batch; ++n) {
        const double* in_row = &cached_input_.at2(n, 0);
        const double* g_row = &grad_output.at2(n, 0);
        for (std::size_t o = 0; o < out_features_; ++o) {
            double g = g_row[o];
            bias_grad_[o] += g;
            double* wg_row = &weight_grad_.at2(o, 0);
            for (std::size_t i = 0; i < in_features_; ++i) wg_row[i] += g * in_row[i];
        }
    }

    Tensor grad_input({n_batch, in_features_});
    for (std::size_t n = 0; n < n_batch; ++n) {
        const double* g_row = &grad_output.at2(n, 0);
        double* gi_row = &grad_input.at2(n, 0);
        for (std::size_t o = 0; o < out_features_; ++o) {
            const double g = g_row[o];
            const double* w_row = &weight_.at2(o, 0);
            for (std::size_t i = 0; i < in_features_; ++i) gi_row[i] += g * w_row[i];
        }
    }
    has_cache_ = false;
    return grad_input;
}

std::vector<ParamRef> Dense::parameters() {
    return {{name_ + ".weight", &weight_, &weight_grad_, true},
            {name_ + ".bias", &bias_, &bias_grad_, false}};
}

}  // namespace poisonguard::nn
