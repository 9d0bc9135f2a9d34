#include "dsp.hpp"

#include <cmath>
#include <numbers>

namespace wdtl {

std::vector<std::vector<double>> segment(const RawRecord& record,
                                         int segment_length, int hop) {
    if (segment_length < 1 || hop < 1)
        throw ContractError("segment: segment_length and hop must be >= 1");
    std::vector<std::vector<double>> out;
    const int n = static_cast<int>(record.samples.size());
    if (n < segment_length) return out;
    const int count = (n - segment_length) / hop + 1;
    out.reserve(count);
    for (int s = 0; s < count; ++s) {
        auto begin = record.samples.begin() + static_cast<long>(s) * hop;
        out.emplace_back(begin, begin + segment_length);
    }
    return out;
}

static bool is_pow2(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void fft_pow2(std::vector<std::complex<double>>& a, bool inverse) {
    const size_t n = a.size();
    if (!is_pow2(n)) throw ContractError("fft_pow2: length must be a power of two");
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang =
            2.0 * std::numbers::pi / static_cast<double>(len) * (inverse ? 1 : -1);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t j = 0; j < len / 2; ++j) {
                const std::complex<double> u = a[i + j];
                const std::complex<double> v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse)
        for (auto& c : a) c /= static_cast<double>(n);
}

// Bluestein's chirp-z reformulation; exact DFT for any length.
static std::vector<std::complex<double>> fft_bluestein(
    const std::vector<std::complex<double>>& x) {
    const size_t n = x.size();
    size_t m = 1;
    while (m < 2 * n - 1) m <<= 1;

    std::vector<std::complex<double>> chirp(n);
    for (size_t k = 0; k < n; ++k) {
        // k^2 mod 2n keeps the angle argument small
        const unsigned long long k2 =
            (static_cast<unsigned long long>(k) * k) % (2 * n);
        const double ang = std::numbers::pi * static_cast<double>(k2) /
                           static_cast<double>(n);
        chirp[k] = {std::cos(ang), -std::sin(ang)};
    }

    std::vector<std::complex<double>> a(m, {0.0, 0.0});
    std::vector<std::complex<double>> b(m, {0.0, 0.0});
    for (size_t k = 0; k < n; ++k) a[k] = x[k] * chirp[k];
    b[0] = std::conj(chirp[0]);
    for (size_t k = 1; k < n; ++k) b[k] = b[m - k] = std::conj(chirp[k]);

    fft_pow2(a, false);
    fft_pow2(b, false);
    for (size_t k = 0; k < m; ++k) a[k] *= b[k];
    fft_pow2(a, true);

    std::vector<std::complex<double>> out(n);
    for (size_t k = 0; k < n; ++k) out[k] = a[k] * chirp[k];
    return out;
}

std::vector<std::complex<double>> fft(const std::vector<std::complex<double>>& x) {
    if (x.empty()) throw ContractError("fft: empty input");
    if (is_pow2(x.size())) {
        auto a = x;
        fft_pow2(a, false);
        return a;
    }
    return fft_bluestein(x);
}

std::vector<double> fft_magnitude(const std::vector<double>& x) {
    std::vector<std::complex<double>> cx(x.size());
    for (size_t i = 0; i < x.size(); ++i) cx[i] = {x[i], 0.0};
    auto X = fft(cx);
    std::vector<double> mags(X.size());
    for (size_t i = 0; i < X.size(); ++i) mags[i] = std::abs(X[i]);
    return mags;
}

std::vector<double> clip_left_half(const std::vector<double>& mags) {
    if (mags.size() % 2 != 0)
        throw DimensionError("clip_left_half: input length must be even");
    return {mags.begin(), mags.begin() + static_cast<long>(mags.size() / 2)};
}

std::vector<double> normalize_max(const std::vector<double>& spectrum) {
    double mx = 0.0;
    for (double v : spectrum) mx = std::max(mx, std::abs(v));
    if (mx == 0.0)
        throw ContractError("normalize_max: all-zero spectrum rejected");
    std::vector<double> out(spectrum.size());
    for (size_t i = 0; i < spectrum.size(); ++i) out[i] = spectrum[i] / mx;
    return out;
}

std::vector<double> preprocess_segment(const std::vector<double>& seg,
                                       bool normalize) {
    if (static_cast<int>(seg.size()) != kSegmentLength)
        throw DimensionError("preprocess_segment: expected 2000 samples");
    auto spectrum = clip_left_half(fft_magnitude(seg));
    return normalize ? normalize_max(spectrum) : spectrum;
}

} // namespace wdtl
