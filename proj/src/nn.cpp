#include "nn.hpp"

#include <cmath>

namespace wdtl {

void glorot_init(Tensor& w, int fan_in, int fan_out, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& v : w->value) v = dist(rng);
}

Conv1dLayer make_conv1d(int filters, int in_channels, int kernel, int stride,
                        std::mt19937_64& rng, const std::string& name) {
    Conv1dLayer layer;
    layer.w = make_tensor({filters, in_channels, kernel}, true, name + ".w");
    layer.b = make_tensor({filters}, true, name + ".b");
    glorot_init(layer.w, in_channels * kernel, filters * kernel, rng);
    layer.stride = stride;
    return layer;
}

DenseLayer make_dense(int out, int in, std::mt19937_64& rng,
                      const std::string& name) {
    DenseLayer layer;
    layer.w = make_tensor({out, in}, true, name + ".w");
    layer.b = make_tensor({out}, true, name + ".b");
    glorot_init(layer.w, in, out, rng);
    return layer;
}

Tensor FeatureExtractor::forward(Tape& tape, const Tensor& x) const {
    Tensor v = tape.relu(tape.conv1d(x, conv1.w, conv1.b, conv1.stride));
    v = tape.maxpool1d(v, pool1.window, pool1.stride);
    v = tape.relu(tape.conv1d(v, conv2.w, conv2.b, conv2.stride));
    v = tape.maxpool1d(v, pool2.window, pool2.stride);
    return tape.flatten(v);
}

std::vector<Tensor> FeatureExtractor::params() const {
    return {conv1.w, conv1.b, conv2.w, conv2.b};
}

int FeatureExtractor::feature_dim(int input_len) const {
    int len = conv_out_len(input_len, conv1.kernel(), conv1.stride);
    len = (len - pool1.window) / pool1.stride + 1;
    len = conv_out_len(len, conv2.kernel(), conv2.stride);
    len = (len - pool2.window) / pool2.stride + 1;
    return conv2.filters() * len;
}

Tensor Discriminator::forward_logits(Tape& tape, const Tensor& h) const {
    Tensor a = tape.relu(tape.linear(h, fc1.w, fc1.b));
    return tape.linear(a, fc2.w, fc2.b);
}

Tensor Discriminator::forward_probs(Tape& tape, const Tensor& h) const {
    return tape.softmax(forward_logits(tape, h));
}

std::vector<Tensor> Discriminator::params() const {
    return {fc1.w, fc1.b, fc2.w, fc2.b};
}

FeatureExtractor make_extractor(std::mt19937_64& rng) {
    FeatureExtractor f;
    f.conv1 = make_conv1d(8, 1, 20, 2, rng, "conv1");
    f.pool1 = {2, 2};
    f.conv2 = make_conv1d(16, 8, 20, 2, rng, "conv2");
    f.pool2 = {2, 2};
    return f;
}

Discriminator make_discriminator(std::mt19937_64& rng, int in, int hidden,
                                 int classes) {
    Discriminator d;
    d.fc1 = make_dense(hidden, in, rng, "fc1");
    d.fc2 = make_dense(classes, hidden, rng, "fc2");
    return d;
}

Optimizer::Optimizer(OptKind kind, double learning_rate,
                     std::vector<Tensor> params)
    : kind_(kind), lr_(learning_rate), params_(std::move(params)) {
    if (lr_ <= 0.0) throw ContractError("optimizer: learning rate must be > 0");
    if (kind_ == OptKind::Adam) {
        for (const auto& p : params_) {
            m_.emplace_back(p->value.size(), 0.0);
            v_.emplace_back(p->value.size(), 0.0);
        }
    }
}

void Optimizer::step(StepDirection direction) {
    const double sign = direction == StepDirection::Descent ? 1.0 : -1.0;
    ++step_count_;
    if (kind_ == OptKind::PlainGradient) {
        for (auto& p : params_)
            for (int i = 0; i < p->size(); ++i)
                p->value[i] -= sign * lr_ * p->grad[i];
        return;
    }
    const double bc1 = 1.0 - std::pow(kBeta1, step_count_);
    const double bc2 = 1.0 - std::pow(kBeta2, step_count_);
    for (size_t j = 0; j < params_.size(); ++j) {
        auto& p = params_[j];
        auto& m = m_[j];
        auto& v = v_[j];
        for (int i = 0; i < p->size(); ++i) {
            const double g = p->grad[i];
            m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g;
            v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p->value[i] -= sign * lr_ * mhat / (std::sqrt(vhat) + kEps);
        }
    }
}

void Optimizer::zero_grad() {
    for (auto& p : params_) p->zero_grad();
}

} // namespace wdtl
