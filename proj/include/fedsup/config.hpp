#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fedsup/federation.hpp"

// Declarative experiment description: a flat `key = value` text file with
// typed keys. Unknown keys are errors so sweep-axis typos fail fast.
namespace fedsup {

enum class RunMode { federated, centralized, standalone };

struct ExperimentConfig {
    std::string run_name = "run";
    RunMode mode = RunMode::federated;
    std::string arch = "blink";  // blink | landmark

    FederationConfig fed;
    float dropout_conv = 0.25f;
    float dropout_dense = 0.5f;

    // synthetic dataset, used unless dataset_file is set
    int samples = 2000;
    int image_h = 24, image_w = 24;
    float noise_std = 0.3f;
    int jitter_px = 2;
    std::uint64_t dataset_seed = 7;
    std::string dataset_file;

    double partition_mu = 40.0;
    double partition_sigma = 3.0;
    std::uint64_t partition_seed = 0;
    bool sigma_is_variance = false;

    double eval_fraction = 0.2;
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    int pretrain_epochs = 0;  // feature-map warm start before training

    // Throws std::invalid_argument with a field-level message.
    void validate() const;
};

// Configuration or usage problem; the CLI maps it to exit code 2.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin);
ExperimentConfig load_config(const std::filesystem::path& path);

// Every key in a fixed order with the config's current values; written into
// run directories and reparsed by `compare`.
std::string normalized_config(const ExperimentConfig& cfg);

// Set one key from its text form; unknown keys or ill-typed values throw
// ConfigError. This is the sweep-axis entry point.
void apply_key(ExperimentConfig& cfg, const std::string& key, const std::string& value);

struct SweepSpec {
    ExperimentConfig base;
    std::string axis;
    std::vector<std::string> values;
};

// A sweep file is a config file plus `sweep_axis` and `sweep_values` keys.
SweepSpec load_sweep(const std::filesystem::path& path);

std::map<std::string, std::string> config_key_values(const ExperimentConfig& cfg);

}  // namespace fedsup
