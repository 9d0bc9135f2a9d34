#pragma once
// Source-domain pretraining and the three-player adaptation loop:
// critic ascent (x critic_steps), discriminator descent, extractor
// descent; plus the supervised variant and versioned checkpointing.

#include <functional>
#include <map>
#include <optional>
#include <string>

#include "data.hpp"
#include "eval.hpp"
#include "nn.hpp"
#include "wdgrl.hpp"

namespace wdtl {

struct AdaptConfig {
    int batch_size = 32;
    int critic_steps = 10;
    double lr_critic = 1e-3;
    double lr_main = 2e-4;
    double rho = 10.0;
    double lambda = 0.1;
    int max_iterations = 5000;
    int eval_every = 100;
    OptKind optimizer = OptKind::Adam;
    uint64_t seed = 1;
    bool reinit_discriminator = false;
    // 32-bit matrix products during training (values still stored as
    // double); evaluation and all gradient checks stay 64-bit
    bool fp32 = false;

    void validate() const;
    std::map<std::string, std::string> snapshot() const;
};

struct Model {
    FeatureExtractor extractor;
    Discriminator discriminator;
    Critic critic;

    static Model init(uint64_t seed);
    std::vector<std::pair<std::string, Tensor>> named_params() const;
    Model clone() const;
};

struct ModelCheckpoint {
    Model model;
    std::map<std::string, std::string> config;
    int iteration = 0;
    double validation_accuracy = -1.0;
};

// Versioned binary ("WDCK"), float32 parameter payload, little-endian.
void save_checkpoint(const ModelCheckpoint& ckpt, const std::string& path);
ModelCheckpoint load_checkpoint(const std::string& path);

struct PretrainResult {
    ModelCheckpoint best;
    std::vector<double> loss_curve; // l_c per iteration
    double best_validation_accuracy = -1.0;
};

// Cross-entropy-only training of extractor + discriminator on an 80/20
// stratified split; returns the best-validation checkpoint.
PretrainResult pretrain(const Dataset& source, const AdaptConfig& cfg);

// Called after each phase of every iteration when set; phase is one of
// 'c' (critic inner loop done), 'd' (discriminator step), 'f' (extractor
// step). Used by tests to assert update isolation.
using PhaseObserver = std::function<void(int iteration, char phase, const Model&)>;

// Algorithm-1 adaptation. Target labels, when present, are hidden from
// training and used only for accuracy reporting / best-checkpoint
// selection. `labeled_target`, when nonempty, switches to the supervised
// variant: the classification batch becomes source + resampled labeled
// target (labeled fraction capped at 50%).
std::pair<ModelCheckpoint, RunReport> adapt(
    const Dataset& source, const Dataset& target, const AdaptConfig& cfg,
    const ModelCheckpoint& init, const Dataset* labeled_target = nullptr,
    const PhaseObserver& observer = nullptr);

std::pair<ModelCheckpoint, RunReport> adapt_supervised(
    const Dataset& source, const Dataset& target_labeled_small,
    const Dataset& target_unlabeled, const AdaptConfig& cfg,
    const ModelCheckpoint& init);

} // namespace wdtl
