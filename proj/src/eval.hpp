#pragma once
// Target-domain accuracy measurement, repeated-run statistics
// (Student-t 95% CI), and flattened-feature export.

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "data.hpp"
#include "nn.hpp"

namespace wdtl {

// Stacks dataset rows into a [B, 1, 1000] input tensor.
Tensor batch_input(const Dataset& ds, const std::vector<int>& indices);

struct EvalResult {
    double accuracy = 0.0;
    // confusion[truth][predicted]
    std::array<std::array<int, kNumClasses>, kNumClasses> confusion{};
};

EvalResult evaluate(const FeatureExtractor& extractor,
                    const Discriminator& discriminator, const Dataset& ds);

struct IterLog {
    int iteration = 0;
    double l_c = 0.0;
    double l_wd = 0.0;
    double l_grad = 0.0;
    double target_accuracy = -1.0; // -1 when the set carries no labels
};

struct RunReport {
    std::vector<IterLog> logs;
    double best_accuracy = -1.0;
    int best_iteration = -1;
    double final_accuracy = -1.0;
    EvalResult final_eval;
};

struct AggregateReport {
    std::vector<double> accuracies;
    double mean = 0.0;
    double ci_half_width = 0.0;
    bool ci_available = false; // needs at least 2 runs
};

AggregateReport aggregate(const std::vector<double>& accuracies);

// Runs `run(seed)` for seeds base_seed..base_seed+R-1 and aggregates the
// returned accuracies.
AggregateReport repeated_runs(const std::function<double(uint64_t)>& run,
                              int repetitions, uint64_t base_seed);

// CSV: header domain,label,h0..h895; one row per sample.
void export_features(const FeatureExtractor& extractor, const Dataset& ds,
                     const std::string& path);

void write_report_json(const RunReport& report, const std::string& path);
void write_aggregate_json(const AggregateReport& report, const std::string& path);

} // namespace wdtl
