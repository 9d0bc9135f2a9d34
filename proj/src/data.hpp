#pragma once
// Dataset container, deterministic synthetic bearing-signal generator,
// CSV/binary persistence, stratified splitting, and minibatch iteration.

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dsp.hpp"
#include "errors.hpp"

namespace wdtl {

inline constexpr int kClassCount = 4;
// Normal=0, InnerRace=1, OuterRace=2, Roller=3
extern const std::array<const char*, kClassCount> kClassNames;

struct Spectrum {
    std::vector<float> bins; // exactly 1000
    int label = -1;          // -1 = unlabeled

    bool labeled() const { return label >= 0; }
};

struct Dataset {
    std::vector<Spectrum> samples;
    std::string domain_tag;

    bool fully_labeled() const;
    double labeled_fraction() const;
    std::vector<int> labels() const;
};

struct SynthConfig {
    int n_per_class = 256;
    double shaft_hz = 30.0;
    // characteristic-frequency ratios per fault class
    double inner_multiplier = 5.4;
    double outer_multiplier = 3.6;
    double roller_multiplier = 4.7;
    double noise_sigma = 0.75;
    int harmonics = 4;
    double tone_amplitude = 1.0;
    double sensor_attenuation = 1.0; // scales the fault component only
    double sample_rate_hz = 12000.0;
    bool normalize = true;
    uint64_t seed = 1;
    std::string domain_tag = "synth";
};

// Per class: raw 2000-sample records at 12 kHz -> segment/FFT/clip/
// normalize. Normal is pure Gaussian noise; fault class c adds
// amplitude-modulated harmonics of f_c = multiplier_c * shaft_hz.
Dataset synth_generate(const SynthConfig& cfg);

// Binary: magic "WDTL" v1, little-endian; CSV: domain,label,f0..f999.
void save_dataset(const Dataset& ds, const std::string& path,
                  const std::string& format); // "binary" | "csv"
Dataset load_dataset(const std::string& path); // sniffs format

// Stratified by label when labels exist; disjoint and exhaustive.
std::pair<Dataset, Dataset> split(const Dataset& ds, double fraction,
                                  uint64_t seed);

// Deterministic per-class sample for the supervised scenario.
Dataset label_subset(const Dataset& ds, int count_per_class, uint64_t seed);

// Epoch-wise shuffled index stream; final partial batch dropped.
class BatchIterator {
public:
    BatchIterator(int dataset_size, int batch_size, uint64_t seed);
    // Returns batch_size indices, reshuffling at epoch boundaries.
    std::vector<int> next();

private:
    int n_;
    int batch_size_;
    std::vector<int> order_;
    int cursor_ = 0;
    std::mt19937_64 rng_;

    void reshuffle();
};

} // namespace wdtl
