#pragma once
// Layers, initialization and optimizers for the 1-D CNN classifier:
// conv(8,k20,s2) -> pool(2,2) -> conv(16,k20,s2) -> pool(2,2) -> flatten
// -> dense 128 -> dense 4 -> softmax.

#include <random>
#include <vector>

#include "tensor.hpp"

namespace wdtl {

struct Conv1dLayer {
    Tensor w; // [filters, in_channels, k]
    Tensor b; // [filters]
    int stride = 1;

    int filters() const { return w->shape[0]; }
    int kernel() const { return w->shape[2]; }
};

struct MaxPool1dLayer {
    int window = 2;
    int stride = 2;
};

struct DenseLayer {
    Tensor w; // [out, in]
    Tensor b; // [out]
};

// Glorot-style uniform(-limit, limit), limit = sqrt(6/(fan_in+fan_out));
// biases zero.
void glorot_init(Tensor& w, int fan_in, int fan_out, std::mt19937_64& rng);

Conv1dLayer make_conv1d(int filters, int in_channels, int kernel, int stride,
                        std::mt19937_64& rng, const std::string& name);
DenseLayer make_dense(int out, int in, std::mt19937_64& rng,
                      const std::string& name);

// The Table-style feature extractor r_f; flattens to 896 features on a
// 1000-bin input.
struct FeatureExtractor {
    Conv1dLayer conv1;
    MaxPool1dLayer pool1;
    Conv1dLayer conv2;
    MaxPool1dLayer pool2;

    // x: [B, 1, input_len] -> [B, feature_dim]
    Tensor forward(Tape& tape, const Tensor& x) const;
    std::vector<Tensor> params() const;
    int feature_dim(int input_len) const;
};

// The two fully-connected classification layers r_d (FC1 relu, FC2 linear).
struct Discriminator {
    DenseLayer fc1;
    DenseLayer fc2;

    Tensor forward_logits(Tape& tape, const Tensor& h) const;
    Tensor forward_probs(Tape& tape, const Tensor& h) const;
    std::vector<Tensor> params() const;
};

inline constexpr int kInputLen = 1000;
inline constexpr int kFeatureDim = 896;
inline constexpr int kNumClasses = 4;

FeatureExtractor make_extractor(std::mt19937_64& rng);
Discriminator make_discriminator(std::mt19937_64& rng,
                                 int in = kFeatureDim, int hidden = 128,
                                 int classes = kNumClasses);

enum class OptKind { PlainGradient, Adam };
enum class StepDirection { Descent, Ascent };

// One optimizer instance owns the moment state for a fixed parameter list.
class Optimizer {
public:
    Optimizer(OptKind kind, double learning_rate, std::vector<Tensor> params);

    // Applies p -/+ alpha * update(grad) and clears nothing; callers zero
    // grads explicitly.
    void step(StepDirection direction);
    void zero_grad();

    long step_count() const { return step_count_; }

private:
    OptKind kind_;
    double lr_;
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_, v_;
    long step_count_ = 0;

    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;
};

} // namespace wdtl
