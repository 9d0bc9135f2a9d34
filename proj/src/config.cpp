#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace wdtl {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

int parse_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const int r = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ContractError("config key '" + key + "': expected integer, got '" + v + "'");
    }
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ContractError("config key '" + key + "': expected number, got '" + v + "'");
    }
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const uint64_t r = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ContractError("config key '" + key + "': expected integer, got '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ContractError("config key '" + key + "': expected true/false, got '" + v + "'");
}

std::string fmt_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr); // shortest round-trip form
}

} // namespace

RunConfig RunConfig::defaults() { return RunConfig{}; }

const std::vector<std::string>& RunConfig::known_keys() {
    static const std::vector<std::string> keys = {
        "batch_size",      "critic_steps",     "lr_critic",
        "lr_main",         "rho",              "lambda",
        "max_iterations",  "optimizer",        "seed",
        "precision",
        "normalize",       "eval_every",       "runs",
        "reinit_discriminator",                "labeled_per_class",
        "synth_n_per_class", "synth_shaft_hz", "synth_noise_sigma",
        "synth_harmonics", "synth_attenuation", "synth_tone_amplitude",
        "domain_tag",
    };
    return keys;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    if (key == "batch_size") adapt.batch_size = parse_int(key, value);
    else if (key == "critic_steps") adapt.critic_steps = parse_int(key, value);
    else if (key == "lr_critic") adapt.lr_critic = parse_double(key, value);
    else if (key == "lr_main") adapt.lr_main = parse_double(key, value);
    else if (key == "rho") adapt.rho = parse_double(key, value);
    else if (key == "lambda") adapt.lambda = parse_double(key, value);
    else if (key == "max_iterations") adapt.max_iterations = parse_int(key, value);
    else if (key == "eval_every") adapt.eval_every = parse_int(key, value);
    else if (key == "seed") {
        adapt.seed = parse_u64(key, value);
        synth.seed = adapt.seed;
    } else if (key == "optimizer") {
        if (value == "adam") adapt.optimizer = OptKind::Adam;
        else if (value == "plain") adapt.optimizer = OptKind::PlainGradient;
        else throw ContractError("config key 'optimizer': expected adam|plain, got '" + value + "'");
    } else if (key == "precision") {
        if (value == "f32") adapt.fp32 = true;
        else if (value == "f64") adapt.fp32 = false;
        else throw ContractError("config key 'precision': expected f32|f64, got '" + value + "'");
    } else if (key == "normalize") {
        if (value == "max") synth.normalize = true;
        else if (value == "none") synth.normalize = false;
        else throw ContractError("config key 'normalize': expected max|none, got '" + value + "'");
    } else if (key == "runs") runs = parse_int(key, value);
    else if (key == "reinit_discriminator")
        adapt.reinit_discriminator = parse_bool(key, value);
    else if (key == "labeled_per_class") labeled_per_class = parse_int(key, value);
    else if (key == "synth_n_per_class") synth.n_per_class = parse_int(key, value);
    else if (key == "synth_shaft_hz") synth.shaft_hz = parse_double(key, value);
    else if (key == "synth_noise_sigma") synth.noise_sigma = parse_double(key, value);
    else if (key == "synth_harmonics") synth.harmonics = parse_int(key, value);
    else if (key == "synth_attenuation") synth.sensor_attenuation = parse_double(key, value);
    else if (key == "synth_tone_amplitude") synth.tone_amplitude = parse_double(key, value);
    else if (key == "domain_tag") synth.domain_tag = value;
    else throw ContractError("unknown config key '" + key + "'");
}

std::string RunConfig::get(const std::string& key) const {
    if (key == "batch_size") return std::to_string(adapt.batch_size);
    if (key == "critic_steps") return std::to_string(adapt.critic_steps);
    if (key == "lr_critic") return fmt_double(adapt.lr_critic);
    if (key == "lr_main") return fmt_double(adapt.lr_main);
    if (key == "rho") return fmt_double(adapt.rho);
    if (key == "lambda") return fmt_double(adapt.lambda);
    if (key == "max_iterations") return std::to_string(adapt.max_iterations);
    if (key == "eval_every") return std::to_string(adapt.eval_every);
    if (key == "seed") return std::to_string(adapt.seed);
    if (key == "optimizer")
        return adapt.optimizer == OptKind::Adam ? "adam" : "plain";
    if (key == "precision") return adapt.fp32 ? "f32" : "f64";
    if (key == "normalize") return synth.normalize ? "max" : "none";
    if (key == "runs") return std::to_string(runs);
    if (key == "reinit_discriminator")
        return adapt.reinit_discriminator ? "true" : "false";
    if (key == "labeled_per_class") return std::to_string(labeled_per_class);
    if (key == "synth_n_per_class") return std::to_string(synth.n_per_class);
    if (key == "synth_shaft_hz") return fmt_double(synth.shaft_hz);
    if (key == "synth_noise_sigma") return fmt_double(synth.noise_sigma);
    if (key == "synth_harmonics") return std::to_string(synth.harmonics);
    if (key == "synth_attenuation") return fmt_double(synth.sensor_attenuation);
    if (key == "synth_tone_amplitude") return fmt_double(synth.tone_amplitude);
    if (key == "domain_tag") return synth.domain_tag;
    throw ContractError("unknown config key '" + key + "'");
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    RunConfig cfg;
    std::set<std::string> seen;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ContractError(path + ":" + std::to_string(line_no) +
                                ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        cfg.set(key, value);
        seen.insert(key);
    }
    for (const auto& key : known_keys())
        if (!seen.count(key))
            cfg.notices.push_back("using default " + key + " = " + cfg.get(key));
    return cfg;
}

} // namespace wdtl
