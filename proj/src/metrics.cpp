#include "fedsup/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fedsup {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

RunLog::RunLog(const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    round_csv_.open(dir / "rounds.csv", std::ios::trunc);
    if (!round_csv_) throw std::runtime_error("cannot open " + (dir / "rounds.csv").string());
    round_csv_ << "round,accuracy,uploads_images,uploads_bytes,params_bytes,mean_alpha\n";
    round_csv_.flush();
    uncertainty_csv_.open(dir / "uncertainty.csv", std::ios::trunc);
    if (!uncertainty_csv_)
        throw std::runtime_error("cannot open " + (dir / "uncertainty.csv").string());
    uncertainty_csv_ << "round,sample_id,r,alpha,predicted_class,uploaded\n";
    uncertainty_csv_.flush();
}

void RunLog::record_round(const RoundMetrics& m) {
    if (!rounds_.empty() && m.round <= rounds_.back().round)
        throw std::invalid_argument("record_round: round " + std::to_string(m.round) +
                                    " not after round " + std::to_string(rounds_.back().round));
    rounds_.push_back(m);
    if (round_csv_.is_open()) {
        round_csv_ << m.round << ',' << format_double(m.accuracy) << ',' << m.uploads_images
                   << ',' << m.uploads_bytes << ',' << m.params_bytes << ','
                   << format_double(m.mean_alpha) << '\n';
        round_csv_.flush();
        if (!round_csv_) throw std::runtime_error("record_round: write failed");
    }
}

void RunLog::record_uncertainty(int round, const std::vector<UncertaintyRecord>& records,
                                double epsilon) {
    for (const auto& rec : records) {
        const bool uploaded = rec.alpha >= epsilon;
        if (uploaded) ++uploaded_records_;
        if (uncertainty_csv_.is_open())
            uncertainty_csv_ << round << ',' << rec.sample_id << ',' << format_double(rec.r)
                             << ',' << format_double(rec.alpha) << ',' << rec.predicted_class
                             << ',' << (uploaded ? 1 : 0) << '\n';
    }
    if (uncertainty_csv_.is_open()) uncertainty_csv_.flush();
}

RunSummary summarize(const std::vector<RoundMetrics>& rounds, double target,
                     long long total_client_images) {
    RunSummary s;
    long long uploaded = 0;
    for (const auto& m : rounds) {
        if (m.accuracy > s.best_accuracy) {
            s.best_accuracy = m.accuracy;
            s.best_round = m.round;
        }
        if (!s.rounds_to_target && m.accuracy >= target) s.rounds_to_target = m.round;
        uploaded += m.uploads_images;
    }
    const long long denom = total_client_images * static_cast<long long>(rounds.size());
    s.total_upload_ratio = denom > 0 ? static_cast<double>(uploaded) / static_cast<double>(denom) : 0.0;
    return s;
}

namespace {

double mean_of(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

SideStats side_stats(const std::vector<RunSummary>& runs) {
    SideStats s;
    std::vector<double> best;
    best.reserve(runs.size());
    for (const auto& r : runs) {
        best.push_back(r.best_accuracy);
        if (!r.rounds_to_target) ++s.not_reached;
    }
    s.mean_best_accuracy = mean_of(best);
    s.std_best_accuracy = std_of(best);
    s.median_rounds_to_target = median_rounds_to_target(runs);
    return s;
}

}  // namespace

std::optional<double> median_rounds_to_target(const std::vector<RunSummary>& runs) {
    std::vector<double> vals;
    vals.reserve(runs.size());
    for (const auto& r : runs)
        vals.push_back(r.rounds_to_target ? static_cast<double>(*r.rounds_to_target)
                                          : std::numeric_limits<double>::infinity());
    std::sort(vals.begin(), vals.end());
    if (vals.empty()) return std::nullopt;
    const std::size_t n = vals.size();
    double med;
    if (n % 2 == 1)
        med = vals[n / 2];
    else
        med = 0.5 * (vals[n / 2 - 1] + vals[n / 2]);
    if (!std::isfinite(med)) return std::nullopt;
    return med;
}

CompareReport compare_runs(const std::vector<RunSummary>& a, double target_a,
                           const std::vector<RunSummary>& b, double target_b) {
    if (target_a != target_b)
        throw std::invalid_argument("compare_runs: targets differ (" + format_double(target_a) +
                                    " vs " + format_double(target_b) + ")");
    CompareReport rep;
    rep.a = side_stats(a);
    rep.b = side_stats(b);
    rep.reduction_is_lower_bound = rep.a.not_reached > 0 || rep.b.not_reached > 0;
    if (rep.a.median_rounds_to_target && rep.b.median_rounds_to_target &&
        *rep.b.median_rounds_to_target > 0.0)
        rep.round_reduction = 1.0 - *rep.a.median_rounds_to_target / *rep.b.median_rounds_to_target;
    return rep;
}

}  // namespace fedsup
