#pragma once

#include <string>
#include <vector>

#include "selfact/harness.hpp"

// Flat `key = value` configuration over ExperimentConfig. Every recognized
// key has a documented default; unknown keys are rejected. '#' starts a
// comment; blank lines are ignored; later assignments win.

namespace selfact {

struct ConfigKey {
    std::string key;
    std::string default_value;
    std::string help;
};

// Every recognized key, its desk-scale default, and a one-line description.
const std::vector<ConfigKey>& config_keys();

// The defaults behind config_keys(). Differs from the raw struct defaults
// only in the pre-training budget, which is scaled down for desk runs
// (epochs 10, batch 64).
ExperimentConfig default_experiment_config();

// Parse onto the defaults. Throws DataError with a line number on unknown
// keys or unparseable values.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

// One `key=value` assignment (command-line override).
void apply_override(ExperimentConfig& config, const std::string& assignment);

// Every key in table order with the config's current values; equal configs
// produce equal strings. Basis of the fingerprint.
std::string canonical_config_string(const ExperimentConfig& config);

// 16 hex digits of FNV-1a over the canonical string.
std::string config_fingerprint(const ExperimentConfig& config);

}  // namespace selfact
