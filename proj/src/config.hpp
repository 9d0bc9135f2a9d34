#pragma once
// Flat `key = value` run configuration with a closed schema; unknown
// keys are rejected, absent keys fall back to documented defaults and
// are reported as notices.

#include <string>
#include <vector>

#include "data.hpp"
#include "training.hpp"

namespace wdtl {

struct RunConfig {
    AdaptConfig adapt;
    SynthConfig synth;
    int runs = 5;
    int labeled_per_class = 0;
    // keys that fell back to their default when loading from file
    std::vector<std::string> notices;

    static RunConfig defaults();
    static RunConfig from_file(const std::string& path);

    // Throws ContractError on unknown key or unparsable value.
    void set(const std::string& key, const std::string& value);
    std::string get(const std::string& key) const;

    static const std::vector<std::string>& known_keys();
};

} // namespace wdtl
