#include "data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "rng.hpp"

namespace wdtl {

const std::array<const char*, kClassCount> kClassNames = {
    "Normal", "InnerRace", "OuterRace", "Roller"};

bool Dataset::fully_labeled() const {
    for (const auto& s : samples)
        if (!s.labeled()) return false;
    return !samples.empty();
}

double Dataset::labeled_fraction() const {
    if (samples.empty()) return 0.0;
    int n = 0;
    for (const auto& s : samples) n += s.labeled() ? 1 : 0;
    return static_cast<double>(n) / samples.size();
}

std::vector<int> Dataset::labels() const {
    std::vector<int> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.label);
    return out;
}

static double class_frequency(const SynthConfig& cfg, int label) {
    switch (label) {
        case 1: return cfg.inner_multiplier * cfg.shaft_hz;
        case 2: return cfg.outer_multiplier * cfg.shaft_hz;
        case 3: return cfg.roller_multiplier * cfg.shaft_hz;
        default: return 0.0;
    }
}

Dataset synth_generate(const SynthConfig& cfg) {
    if (cfg.n_per_class < 1) throw ContractError("synth: n_per_class must be >= 1");
    if (cfg.shaft_hz <= 0.0) throw ContractError("synth: shaft_hz must be > 0");
    if (cfg.noise_sigma < 0.0) throw ContractError("synth: noise_sigma must be >= 0");
    if (cfg.sensor_attenuation <= 0.0 || cfg.sensor_attenuation > 1.0)
        throw ContractError("synth: sensor_attenuation must be in (0,1]");

    Dataset ds;
    ds.domain_tag = cfg.domain_tag;
    ds.samples.reserve(static_cast<size_t>(cfg.n_per_class) * kClassCount);

    const double dt = 1.0 / cfg.sample_rate_hz;
    for (int label = 0; label < kClassCount; ++label) {
        auto rng = make_rng(cfg.seed, std::string("synth-class") + std::to_string(label));
        std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
        std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
        const double f_c = class_frequency(cfg, label);

        for (int s = 0; s < cfg.n_per_class; ++s) {
            std::vector<double> raw(kSegmentLength);
            std::vector<double> phases(cfg.harmonics);
            for (int m = 0; m < cfg.harmonics; ++m) phases[m] = phase(rng);
            const double mod_phase = phase(rng);

            for (int i = 0; i < kSegmentLength; ++i) {
                const double t = i * dt;
                double v = noise(rng);
                if (label != 0) {
                    double tones = 0.0;
                    for (int m = 1; m <= cfg.harmonics; ++m)
                        tones += cfg.tone_amplitude / m *
                                 std::sin(2.0 * std::numbers::pi * m * f_c * t +
                                          phases[m - 1]);
                    const double mod =
                        1.0 + 0.5 * std::sin(2.0 * std::numbers::pi *
                                                 cfg.shaft_hz * t +
                                             mod_phase);
                    v += cfg.sensor_attenuation * mod * tones;
                }
                raw[i] = v;
            }
            auto bins = preprocess_segment(raw, cfg.normalize);
            Spectrum sp;
            sp.bins.assign(bins.begin(), bins.end());
            sp.label = label;
            ds.samples.push_back(std::move(sp));
        }
    }
    return ds;
}

// ---- persistence -----------------------------------------------------

namespace {

constexpr char kMagic[4] = {'W', 'D', 'T', 'L'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_le(std::ostream& out, T v) {
    unsigned char buf[sizeof(T)];
    for (size_t i = 0; i < sizeof(T); ++i)
        buf[i] = static_cast<unsigned char>((static_cast<uint64_t>(v) >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

void write_f32_le(std::ostream& out, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    write_le<uint32_t>(out, bits);
}

template <typename T>
T read_le(std::istream& in, size_t& offset, const char* what) {
    unsigned char buf[sizeof(T)];
    in.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (!in) {
        std::ostringstream msg;
        msg << "truncated file reading " << what << " at byte " << offset;
        throw FormatError(msg.str());
    }
    offset += sizeof(T);
    uint64_t v = 0;
    for (size_t i = 0; i < sizeof(T); ++i)
        v |= static_cast<uint64_t>(buf[i]) << (8 * i);
    return static_cast<T>(v);
}

float read_f32_le(std::istream& in, size_t& offset, const char* what) {
    const uint32_t bits = read_le<uint32_t>(in, offset, what);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

void save_binary(const Dataset& ds, const std::string& path) {
    const bool labeled = ds.fully_labeled();
    if (!labeled)
        for (const auto& s : ds.samples)
            if (s.labeled())
                throw ContractError(
                    "binary format stores labels all-or-nothing; dataset is "
                    "partially labeled");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(kMagic, 4);
    write_le<uint32_t>(out, kVersion);
    write_le<uint32_t>(out, static_cast<uint32_t>(ds.samples.size()));
    write_le<uint32_t>(out, kSpectrumBins);
    write_le<uint8_t>(out, labeled ? 1 : 0);
    write_le<uint16_t>(out, static_cast<uint16_t>(ds.domain_tag.size()));
    out.write(ds.domain_tag.data(), static_cast<long>(ds.domain_tag.size()));
    for (const auto& s : ds.samples) {
        for (float v : s.bins) write_f32_le(out, v);
        if (labeled) write_le<uint8_t>(out, static_cast<uint8_t>(s.label));
    }
    if (!out) throw IoError("write failed: " + path);
}

Dataset load_binary(std::istream& in) {
    size_t offset = 0;
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("bad magic at byte 0 (expected WDTL)");
    offset = 4;
    const uint32_t version = read_le<uint32_t>(in, offset, "version");
    if (version != kVersion) {
        std::ostringstream msg;
        msg << "unsupported dataset version " << version << " at byte 4";
        throw FormatError(msg.str());
    }
    const uint32_t n = read_le<uint32_t>(in, offset, "sample count");
    const uint32_t flen = read_le<uint32_t>(in, offset, "feature length");
    if (flen != kSpectrumBins) {
        std::ostringstream msg;
        msg << "feature length " << flen << " at byte 12 (expected "
            << kSpectrumBins << ")";
        throw FormatError(msg.str());
    }
    const uint8_t has_labels = read_le<uint8_t>(in, offset, "label flag");
    const uint16_t tag_len = read_le<uint16_t>(in, offset, "tag length");
    Dataset ds;
    ds.domain_tag.resize(tag_len);
    in.read(ds.domain_tag.data(), tag_len);
    if (!in) throw FormatError("truncated domain tag at byte " + std::to_string(offset));
    offset += tag_len;

    ds.samples.resize(n);
    for (uint32_t i = 0; i < n; ++i) {
        auto& s = ds.samples[i];
        s.bins.resize(kSpectrumBins);
        for (int k = 0; k < kSpectrumBins; ++k)
            s.bins[k] = read_f32_le(in, offset, "sample data");
        if (has_labels) {
            const uint8_t lab = read_le<uint8_t>(in, offset, "label");
            if (lab >= kClassCount) {
                std::ostringstream msg;
                msg << "label " << int(lab) << " out of range at byte "
                    << (offset - 1);
                throw FormatError(msg.str());
            }
            s.label = lab;
        }
    }
    return ds;
}

void save_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "domain,label";
    for (int k = 0; k < kSpectrumBins; ++k) out << ",f" << k;
    out << "\n";
    char buf[32];
    for (const auto& s : ds.samples) {
        out << ds.domain_tag << ",";
        if (s.labeled()) out << s.label;
        for (float v : s.bins) {
            const int len = std::snprintf(buf, sizeof(buf), ",%.9g", v);
            out.write(buf, len);
        }
        out << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

Dataset load_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line))
        throw FormatError("empty csv file at line 1");
    {
        std::ostringstream expected;
        expected << "domain,label";
        for (int k = 0; k < kSpectrumBins; ++k) expected << ",f" << k;
        if (line != expected.str())
            throw FormatError("bad csv header at line 1");
    }
    Dataset ds;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        Spectrum s;
        s.bins.reserve(kSpectrumBins);
        size_t pos = 0;
        int field = 0;
        const char* data = line.data();
        const size_t len = line.size();
        while (pos <= len) {
            size_t end = line.find(',', pos);
            if (end == std::string::npos) end = len;
            std::string_view tok(data + pos, end - pos);
            if (field == 0) {
                if (ds.samples.empty() && ds.domain_tag.empty())
                    ds.domain_tag = std::string(tok);
            } else if (field == 1) {
                if (!tok.empty()) {
                    int lab = -1;
                    auto [p, ec] = std::from_chars(tok.begin(), tok.end(), lab);
                    if (ec != std::errc() || p != tok.end() || lab < 0 ||
                        lab >= kClassCount)
                        throw FormatError("bad label at line " +
                                          std::to_string(line_no));
                    s.label = lab;
                }
            } else {
                float v = 0.0f;
                auto [p, ec] = std::from_chars(tok.begin(), tok.end(), v);
                if (ec != std::errc() || p != tok.end())
                    throw FormatError("bad feature value at line " +
                                      std::to_string(line_no) + ", column " +
                                      std::to_string(field + 1));
                s.bins.push_back(v);
            }
            ++field;
            if (end == len) break;
            pos = end + 1;
        }
        if (static_cast<int>(s.bins.size()) != kSpectrumBins)
            throw FormatError("row with " + std::to_string(s.bins.size()) +
                              " features at line " + std::to_string(line_no) +
                              " (expected " + std::to_string(kSpectrumBins) + ")");
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

} // namespace

void save_dataset(const Dataset& ds, const std::string& path,
                  const std::string& format) {
    if (format == "binary")
        save_binary(ds, path);
    else if (format == "csv")
        save_csv(ds, path);
    else
        throw ContractError("unknown dataset format: " + format);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    char head[4] = {0, 0, 0, 0};
    in.read(head, 4);
    in.clear();
    in.seekg(0);
    if (std::memcmp(head, kMagic, 4) == 0) return load_binary(in);
    return load_csv(in);
}

// ---- splitting / batching --------------------------------------------

std::pair<Dataset, Dataset> split(const Dataset& ds, double fraction,
                                  uint64_t seed) {
    if (fraction <= 0.0 || fraction >= 1.0)
        throw ContractError("split: fraction must be in (0,1)");
    // group by label; all unlabeled samples form one stratum
    std::vector<std::vector<int>> strata(kClassCount + 1);
    for (int i = 0; i < static_cast<int>(ds.samples.size()); ++i) {
        const int lab = ds.samples[i].label;
        strata[lab >= 0 ? lab : kClassCount].push_back(i);
    }
    auto rng = make_rng(seed, "split");
    Dataset a, b;
    a.domain_tag = b.domain_tag = ds.domain_tag;
    for (auto& idx : strata) {
        if (idx.empty()) continue;
        if (idx.size() < 2)
            throw ContractError("split: stratum with fewer than 2 samples");
        std::shuffle(idx.begin(), idx.end(), rng);
        const int take = static_cast<int>(
            std::llround(fraction * static_cast<double>(idx.size())));
        for (size_t j = 0; j < idx.size(); ++j)
            (static_cast<int>(j) < take ? a : b).samples.push_back(
                ds.samples[idx[j]]);
    }
    return {std::move(a), std::move(b)};
}

Dataset label_subset(const Dataset& ds, int count_per_class, uint64_t seed) {
    if (count_per_class < 0)
        throw ContractError("label_subset: count_per_class must be >= 0");
    Dataset out;
    out.domain_tag = ds.domain_tag;
    if (count_per_class == 0) return out;
    std::vector<std::vector<int>> strata(kClassCount);
    for (int i = 0; i < static_cast<int>(ds.samples.size()); ++i)
        if (ds.samples[i].labeled()) strata[ds.samples[i].label].push_back(i);
    auto rng = make_rng(seed, "label-subset");
    for (int lab = 0; lab < kClassCount; ++lab) {
        auto& idx = strata[lab];
        if (static_cast<int>(idx.size()) < count_per_class)
            throw ContractError("label_subset: class " + std::string(kClassNames[lab]) +
                                " has fewer than requested samples");
        std::shuffle(idx.begin(), idx.end(), rng);
        for (int j = 0; j < count_per_class; ++j)
            out.samples.push_back(ds.samples[idx[j]]);
    }
    return out;
}

BatchIterator::BatchIterator(int dataset_size, int batch_size, uint64_t seed)
    : n_(dataset_size), batch_size_(batch_size), rng_(make_rng(seed, "batch")) {
    if (batch_size < 1) throw ContractError("batch size must be >= 1");
    if (dataset_size < batch_size)
        throw ContractError("dataset smaller than one batch");
    order_.resize(n_);
    std::iota(order_.begin(), order_.end(), 0);
    reshuffle();
}

void BatchIterator::reshuffle() {
    std::shuffle(order_.begin(), order_.end(), rng_);
    cursor_ = 0;
}

std::vector<int> BatchIterator::next() {
    if (cursor_ + batch_size_ > n_) reshuffle();
    std::vector<int> out(order_.begin() + cursor_,
                         order_.begin() + cursor_ + batch_size_);
    cursor_ += batch_size_;
    return out;
}

} // namespace wdtl
