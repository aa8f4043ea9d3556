#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedsup/config.hpp"
#include "fedsup/metrics.hpp"

// Drives whole experiments from an ExperimentConfig: dataset preparation,
// train/eval split, partitioning, the selected training mode per seed, and
// the on-disk run layout (<run-dir>/seed_<s>/{rounds.csv, uncertainty.csv,
// summary.json}, plus config.txt and the aggregate summary.json).
namespace fedsup {

struct SeedRun {
    std::uint64_t seed = 0;
    RunSummary summary;
    std::vector<RoundMetrics> rounds;
    long long total_client_images = 0;
    std::vector<double> edge_best_accuracies;  // standalone mode only
    std::string error;                         // nonempty when the seed failed
};

struct RunResult {
    ExperimentConfig config;
    std::vector<SeedRun> seeds;

    bool ok() const;
    std::vector<RunSummary> summaries() const;
};

// One full run per seed; run_dir may be empty for in-memory runs. jobs > 1
// executes seeds concurrently; outputs are identical either way.
RunResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& run_dir,
                         int jobs = 1);

nlohmann::json aggregate_summary(const RunResult& result);

struct SweepCellRow {
    std::string value;
    int seeds_ok = 0, seeds_failed = 0;
    double mean_best_accuracy = 0.0, std_best_accuracy = 0.0;
    std::optional<double> mean_rounds_to_target, std_rounds_to_target;
    int not_reached = 0;
    double mean_upload_ratio = 0.0;
};

struct SweepResult {
    std::vector<SweepCellRow> rows;
    int cell_count = 0;  // |values| x |seeds|
};

SweepResult run_sweep(const SweepSpec& sweep, const std::filesystem::path& sweep_dir, int jobs);

struct LoadedRun {
    std::filesystem::path dir;
    ExperimentConfig config;
    std::vector<RunSummary> summaries;
    std::vector<std::vector<RoundMetrics>> rounds_per_seed;
    std::vector<long long> total_client_images;
};

LoadedRun load_run_dir(const std::filesystem::path& dir);

// Candidate = runs[0], baselines = the rest. Returns the comparison document
// and writes comparison.json + plot CSVs under out_dir. Throws ConfigError
// when targets differ or configs diverge beyond aggregator/epsilon/M.
nlohmann::json compare_run_dirs(const std::vector<std::filesystem::path>& run_dirs,
                                const std::filesystem::path& out_dir);

// FNV-1a 64 over a file's bytes, hex-encoded; used for output digests.
std::string file_digest(const std::filesystem::path& path);

}  // namespace fedsup
