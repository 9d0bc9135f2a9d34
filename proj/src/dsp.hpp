#pragma once
// Raw-signal preprocessing: fixed-length segmentation, FFT magnitude
// spectrum, left-half clipping, per-sample max normalization.

#include <complex>
#include <vector>

#include "errors.hpp"

namespace wdtl {

struct RawRecord {
    std::vector<double> samples;
    double sample_rate_hz = 12000.0;
};

inline constexpr int kSegmentLength = 2000;
inline constexpr int kSpectrumBins = 1000;

// Non-overlapping by default; trailing remainder discarded. Returns an
// empty list when the record is shorter than one segment.
std::vector<std::vector<double>> segment(const RawRecord& record,
                                         int segment_length = kSegmentLength,
                                         int hop = kSegmentLength);

// In-place FFT, power-of-two lengths only.
void fft_pow2(std::vector<std::complex<double>>& a, bool inverse);

// Arbitrary-length FFT (radix-2 directly, Bluestein otherwise).
std::vector<std::complex<double>> fft(const std::vector<std::complex<double>>& x);

// |X_k| for k = 0..N-1.
std::vector<double> fft_magnitude(const std::vector<double>& x);

// Keeps the first half of an even-length spectrum.
std::vector<double> clip_left_half(const std::vector<double>& mags);

// Divides by the maximum bin; throws ContractError on an all-zero input.
std::vector<double> normalize_max(const std::vector<double>& spectrum);

// segment (already cut) -> 1000-bin spectrum.
std::vector<double> preprocess_segment(const std::vector<double>& seg,
                                       bool normalize = true);

} // namespace wdtl
