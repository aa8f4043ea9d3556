#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "fedsup/uncertainty.hpp"

// Measurement and accounting: per-round accuracy and traffic counters, run
// summaries (best accuracy, rounds to a target, upload ratio) and run-to-run
// comparisons in the shape of the experiment tables.
namespace fedsup {

struct RoundMetrics {
    int round = 0;
    double accuracy = 0.0;
    long long uploads_images = 0;
    long long uploads_bytes = 0;
    long long params_bytes = 0;
    std::vector<int> selected_edges;
    double mean_alpha = 0.0;
};

struct RunSummary {
    double best_accuracy = 0.0;
    int best_round = -1;
    std::optional<int> rounds_to_target;  // first round reaching the target
    double total_upload_ratio = 0.0;
};

// Per-run sink. Rounds must arrive with strictly increasing indices; each
// append is flushed so partial logs survive a crash. With a directory set,
// writes rounds.csv (round,accuracy,uploads_images,uploads_bytes,
// params_bytes,mean_alpha) and uncertainty.csv.
class RunLog {
public:
    RunLog() = default;
    explicit RunLog(const std::filesystem::path& dir);

    void record_round(const RoundMetrics& m);
    void record_uncertainty(int round, const std::vector<UncertaintyRecord>& records,
                            double epsilon);

    const std::vector<RoundMetrics>& rounds() const { return rounds_; }
    long long uploaded_record_count() const { return uploaded_records_; }

private:
    std::vector<RoundMetrics> rounds_;
    long long uploaded_records_ = 0;
    std::ofstream round_csv_;
    std::ofstream uncertainty_csv_;
};

// total_client_images is the per-round upload volume of the everything-
// uploads baseline; the ratio denominator is that volume times the number of
// rounds.
RunSummary summarize(const std::vector<RoundMetrics>& rounds, double target,
                     long long total_client_images);

struct SideStats {
    double mean_best_accuracy = 0.0;
    double std_best_accuracy = 0.0;
    std::optional<double> median_rounds_to_target;
    int not_reached = 0;
};

struct CompareReport {
    SideStats a, b;
    // 1 - median_a / median_b; absent when either median is undefined
    std::optional<double> round_reduction;
    bool reduction_is_lower_bound = false;  // some run missed the target
};

// a is the candidate, b the baseline; both sides must share the target.
CompareReport compare_runs(const std::vector<RunSummary>& a, double target_a,
                           const std::vector<RunSummary>& b, double target_b);

// Median over runs with unreached targets counted as +inf; empty when the
// median itself is unreached.
std::optional<double> median_rounds_to_target(const std::vector<RunSummary>& runs);

// Shortest-round-trip decimal formatting, locale-independent, so logs are
// byte-identical across runs.
std::string format_double(double v);

}  // namespace fedsup
