#include "eval.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

namespace wdtl {

Tensor batch_input(const Dataset& ds, const std::vector<int>& indices) {
    const int B = static_cast<int>(indices.size());
    Tensor x = make_tensor({B, 1, kSpectrumBins});
    for (int b = 0; b < B; ++b) {
        const auto& bins = ds.samples[indices[b]].bins;
        if (static_cast<int>(bins.size()) != kSpectrumBins)
            throw DimensionError("batch_input: sample width mismatch");
        double* row = x->value.data() + static_cast<size_t>(b) * kSpectrumBins;
        for (int k = 0; k < kSpectrumBins; ++k) row[k] = bins[k];
    }
    return x;
}

EvalResult evaluate(const FeatureExtractor& extractor,
                    const Discriminator& discriminator, const Dataset& ds) {
    if (!ds.fully_labeled())
        throw ContractError("evaluate: dataset must be labeled");
    EvalResult result;
    const int n = static_cast<int>(ds.samples.size());
    constexpr int kChunk = 64;
    for (int start = 0; start < n; start += kChunk) {
        const int count = std::min(kChunk, n - start);
        std::vector<int> idx(count);
        std::iota(idx.begin(), idx.end(), start);
        Tape tape;
        Tensor h = extractor.forward(tape, batch_input(ds, idx));
        Tensor logits = discriminator.forward_logits(tape, h);
        for (int b = 0; b < count; ++b) {
            const double* row =
                logits->value.data() + static_cast<size_t>(b) * kNumClasses;
            int pred = 0;
            for (int c = 1; c < kNumClasses; ++c)
                if (row[c] > row[pred]) pred = c;
            result.confusion[ds.samples[start + b].label][pred] += 1;
        }
    }
    int correct = 0;
    for (int c = 0; c < kNumClasses; ++c) correct += result.confusion[c][c];
    result.accuracy = static_cast<double>(correct) / n;
    return result;
}

AggregateReport aggregate(const std::vector<double>& accuracies) {
    if (accuracies.empty())
        throw ContractError("aggregate: need at least one run");
    AggregateReport rep;
    rep.accuracies = accuracies;
    const int r = static_cast<int>(accuracies.size());
    rep.mean = std::accumulate(accuracies.begin(), accuracies.end(), 0.0) / r;
    if (r >= 2) {
        double ss = 0.0;
        for (double a : accuracies) ss += (a - rep.mean) * (a - rep.mean);
        const double sd = std::sqrt(ss / (r - 1));
        boost::math::students_t_distribution<double> dist(r - 1);
        const double t = boost::math::quantile(dist, 0.975);
        rep.ci_half_width = t * sd / std::sqrt(static_cast<double>(r));
        rep.ci_available = true;
    }
    return rep;
}

AggregateReport repeated_runs(const std::function<double(uint64_t)>& run,
                              int repetitions, uint64_t base_seed) {
    if (repetitions < 1)
        throw ContractError("repeated_runs: repetitions must be >= 1");
    std::vector<double> accs;
    accs.reserve(repetitions);
    for (int i = 0; i < repetitions; ++i) accs.push_back(run(base_seed + i));
    return aggregate(accs);
}

void export_features(const FeatureExtractor& extractor, const Dataset& ds,
                     const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    const int dim = extractor.feature_dim(kInputLen);
    out << "domain,label";
    for (int k = 0; k < dim; ++k) out << ",h" << k;
    out << "\n";
    const int n = static_cast<int>(ds.samples.size());
    constexpr int kChunk = 64;
    char buf[32];
    for (int start = 0; start < n; start += kChunk) {
        const int count = std::min(kChunk, n - start);
        std::vector<int> idx(count);
        std::iota(idx.begin(), idx.end(), start);
        Tape tape;
        Tensor h = extractor.forward(tape, batch_input(ds, idx));
        for (int b = 0; b < count; ++b) {
            out << ds.domain_tag << ",";
            if (ds.samples[start + b].labeled()) out << ds.samples[start + b].label;
            const double* row = h->value.data() + static_cast<size_t>(b) * dim;
            for (int k = 0; k < dim; ++k) {
                const int len = std::snprintf(buf, sizeof(buf), ",%.9g", row[k]);
                out.write(buf, len);
            }
            out << "\n";
        }
    }
    if (!out) throw IoError("write failed: " + path);
}

void write_report_json(const RunReport& report, const std::string& path) {
    nlohmann::json j;
    j["best_accuracy"] = report.best_accuracy;
    j["best_iteration"] = report.best_iteration;
    j["final_accuracy"] = report.final_accuracy;
    j["confusion"] = report.final_eval.confusion;
    nlohmann::json logs = nlohmann::json::array();
    for (const auto& l : report.logs)
        logs.push_back({{"iteration", l.iteration},
                        {"l_c", l.l_c},
                        {"l_wd", l.l_wd},
                        {"l_grad", l.l_grad},
                        {"target_accuracy", l.target_accuracy}});
    j["logs"] = std::move(logs);
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
}

void write_aggregate_json(const AggregateReport& report,
                          const std::string& path) {
    nlohmann::json j;
    j["accuracies"] = report.accuracies;
    j["mean"] = report.mean;
    j["ci_half_width"] = report.ci_half_width;
    j["ci_available"] = report.ci_available;
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
}

} // namespace wdtl
