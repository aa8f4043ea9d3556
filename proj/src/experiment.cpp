#include "fedsup/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <thread>

#include "fedsup/features.hpp"

namespace fedsup {

namespace {

NetworkSpec network_for(const ExperimentConfig& cfg, int h, int w) {
    if (cfg.arch == "landmark")
        return build_landmark_net(h, w, 1, cfg.dropout_conv, cfg.dropout_dense);
    return build_blink_net(h, w, 1, cfg.dropout_conv, cfg.dropout_dense);
}

LabeledDataset prepare_dataset(const ExperimentConfig& cfg) {
    if (!cfg.dataset_file.empty()) return load_dataset(cfg.dataset_file);
    SyntheticBlinkSpec spec;
    spec.height = cfg.image_h;
    spec.width = cfg.image_w;
    spec.num_samples = cfg.samples;
    spec.noise_std = cfg.noise_std;
    spec.jitter_px = cfg.jitter_px;
    spec.seed = cfg.dataset_seed;
    return generate_blink_dataset(spec);
}

struct SplitData {
    LabeledDataset train;
    std::vector<Tensor> eval_images;
    std::vector<int> eval_labels;
};

SplitData split_dataset(const LabeledDataset& ds, double eval_fraction, RngStream rng) {
    std::vector<int> order(ds.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    const std::size_t eval_n =
        std::min(ds.size() > 1 ? ds.size() - 1 : std::size_t{0},
                 static_cast<std::size_t>(std::llround(eval_fraction * static_cast<double>(ds.size()))));
    SplitData out;
    out.train.class_names = ds.class_names;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const int idx = order[i];
        if (i < eval_n) {
            out.eval_images.push_back(ds.images[static_cast<std::size_t>(idx)]);
            out.eval_labels.push_back(ds.labels[static_cast<std::size_t>(idx)]);
        } else {
            out.train.images.push_back(ds.images[static_cast<std::size_t>(idx)]);
            out.train.labels.push_back(ds.labels[static_cast<std::size_t>(idx)]);
        }
    }
    return out;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Optional warm start: a few centralized epochs over texture feature maps
// before regular training begins.
ModelParams pretrain_on_features(const NetworkSpec& spec, const ExperimentConfig& cfg,
                                 const LabeledDataset& train, RngStream root) {
    LabeledDataset mapped;
    mapped.class_names = train.class_names;
    mapped.labels = train.labels;
    mapped.images.reserve(train.images.size());
    for (const auto& img : train.images) mapped.images.push_back(texture_feature_map(img));

    std::vector<int> order(mapped.size());
    std::iota(order.begin(), order.end(), 0);
    ModelParams params = init_params(spec, root.derive(rng_tag::init));
    return train_epochs(spec, std::move(params), mapped, order, cfg.pretrain_epochs,
                        cfg.fed.eta, cfg.fed.batch_size, root.derive(rng_tag::pretrain));
}

void write_seed_summary(const std::filesystem::path& dir, const SeedRun& run,
                        double target) {
    nlohmann::json j;
    j["seed"] = run.seed;
    j["best_accuracy"] = run.summary.best_accuracy;
    j["best_round"] = run.summary.best_round;
    if (run.summary.rounds_to_target)
        j["rounds_to_target"] = *run.summary.rounds_to_target;
    else
        j["rounds_to_target"] = nullptr;
    j["total_upload_ratio"] = run.summary.total_upload_ratio;
    j["rounds_executed"] = run.rounds.size();
    j["total_client_images"] = run.total_client_images;
    j["target_accuracy"] = target;
    if (!run.edge_best_accuracies.empty()) j["edge_best_accuracies"] = run.edge_best_accuracies;
    std::ofstream out(dir / "summary.json", std::ios::trunc);
    out << j.dump(2) << "\n";
}

SeedRun run_single_seed(const ExperimentConfig& cfg, std::uint64_t seed,
                        const std::filesystem::path& seed_dir) {
    SeedRun run;
    run.seed = seed;

    const LabeledDataset full = prepare_dataset(cfg);
    RngStream root(seed);
    SplitData split = split_dataset(full, cfg.eval_fraction, root.derive(rng_tag::split));

    const int h = split.train.images.empty() ? cfg.image_h : split.train.images.front().shape[0];
    const int w = split.train.images.empty() ? cfg.image_w : split.train.images.front().shape[1];
    const NetworkSpec spec = network_for(cfg, h, w);

    PartitionSpec pspec;
    pspec.num_parts = cfg.fed.clients;
    pspec.mu = cfg.partition_mu;
    pspec.sigma = cfg.partition_sigma;
    pspec.sigma_is_variance = cfg.sigma_is_variance;
    pspec.seed = mix_seed(cfg.partition_seed, seed);
    const Partition partition = partition_unbalanced(split.train.size(), pspec);

    long long client_images = 0;
    for (const auto& part : partition.parts) client_images += static_cast<long long>(part.size());
    run.total_client_images = client_images;

    ModelParams warm;
    const ModelParams* initial = nullptr;
    if (cfg.pretrain_epochs > 0) {
        warm = pretrain_on_features(spec, cfg, split.train, root);
        initial = &warm;
    }

    RunLog log = seed_dir.empty() ? RunLog() : RunLog(seed_dir);

    if (cfg.mode == RunMode::federated) {
        std::vector<EdgeState> edges = build_edges(partition, cfg.fed.edges);
        std::function<void(int, const ModelParams&)> checkpoint_sink;
        if (!seed_dir.empty() && cfg.fed.checkpoint_every > 0) {
            const auto ckpt_dir = seed_dir / "checkpoints";
            std::filesystem::create_directories(ckpt_dir);
            checkpoint_sink = [ckpt_dir](int round, const ModelParams& params) {
                char name[32];
                std::snprintf(name, sizeof(name), "round_%04d.fsup", round);
                save_params(params, ckpt_dir / name);
            };
        }
        cloud_execute(spec, cfg.fed, edges, split.train, split.eval_images, split.eval_labels,
                      root, &log, checkpoint_sink, initial);
        run.rounds = log.rounds();
    } else if (cfg.mode == RunMode::centralized) {
        std::vector<int> order(split.train.size());
        std::iota(order.begin(), order.end(), 0);
        const auto trajectory =
            run_centralized_sgd(spec, cfg.fed, split.train, order, split.eval_images,
                                split.eval_labels, root, nullptr, initial);
        for (const auto& p : trajectory) {
            RoundMetrics m;
            m.round = p.round;
            m.accuracy = p.accuracy;
            log.record_round(m);
        }
        run.rounds = log.rounds();
    } else {
        std::vector<EdgeState> edges = build_edges(partition, cfg.fed.edges);
        const auto trajectories = run_standalone_sgd(spec, cfg.fed, edges, split.train,
                                                     split.eval_images, split.eval_labels, root);
        std::size_t max_rounds = 0;
        for (const auto& t : trajectories) {
            max_rounds = std::max(max_rounds, t.size());
            double best = 0.0;
            for (const auto& p : t) best = std::max(best, static_cast<double>(p.accuracy));
            if (!t.empty()) run.edge_best_accuracies.push_back(best);
        }
        for (std::size_t r = 0; r < max_rounds; ++r) {
            double acc = 0.0;
            int live = 0;
            for (const auto& t : trajectories)
                if (r < t.size()) {
                    acc += t[r].accuracy;
                    ++live;
                }
            RoundMetrics m;
            m.round = static_cast<int>(r);
            m.accuracy = live > 0 ? acc / live : 0.0;
            log.record_round(m);
        }
        run.rounds = log.rounds();
    }

    run.summary = summarize(run.rounds, cfg.fed.target_accuracy, run.total_client_images);
    if (cfg.mode == RunMode::standalone && !run.edge_best_accuracies.empty()) {
        // the headline number for standalone is the mean of per-edge bests
        double acc = 0.0;
        for (double b : run.edge_best_accuracies) acc += b;
        run.summary.best_accuracy = acc / static_cast<double>(run.edge_best_accuracies.size());
    }
    if (!seed_dir.empty()) write_seed_summary(seed_dir, run, cfg.fed.target_accuracy);
    return run;
}

void parallel_tasks(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn) {
    if (jobs <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    const int workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), count);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t)
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                fn(i);
            }
        });
    for (auto& th : pool) th.join();
}

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

}  // namespace

bool RunResult::ok() const {
    return std::all_of(seeds.begin(), seeds.end(),
                       [](const SeedRun& s) { return s.error.empty(); });
}

std::vector<RunSummary> RunResult::summaries() const {
    std::vector<RunSummary> out;
    out.reserve(seeds.size());
    for (const auto& s : seeds)
        if (s.error.empty()) out.push_back(s.summary);
    return out;
}

RunResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& run_dir,
                         int jobs) {
    cfg.validate();
    RunResult result;
    result.config = cfg;
    result.seeds.resize(cfg.seeds.size());

    if (!run_dir.empty()) {
        std::filesystem::create_directories(run_dir);
        std::ofstream cfg_out(run_dir / "config.txt", std::ios::trunc);
        cfg_out << normalized_config(cfg);
    }

    parallel_tasks(cfg.seeds.size(), jobs, [&](std::size_t i) {
        const std::uint64_t seed = cfg.seeds[i];
        std::filesystem::path seed_dir;
        if (!run_dir.empty()) {
            seed_dir = run_dir / ("seed_" + std::to_string(seed));
            std::filesystem::create_directories(seed_dir);
        }
        try {
            result.seeds[i] = run_single_seed(cfg, seed, seed_dir);
        } catch (const std::exception& e) {
            result.seeds[i].seed = seed;
            result.seeds[i].error = e.what();
        }
    });

    if (!run_dir.empty()) {
        std::ofstream out(run_dir / "summary.json", std::ios::trunc);
        out << aggregate_summary(result).dump(2) << "\n";
    }
    return result;
}

nlohmann::json aggregate_summary(const RunResult& result) {
    std::vector<double> best, ratios;
    std::vector<RunSummary> summaries;
    nlohmann::json per_seed = nlohmann::json::array();
    for (const auto& s : result.seeds) {
        nlohmann::json j;
        j["seed"] = s.seed;
        if (!s.error.empty()) {
            j["error"] = s.error;
            per_seed.push_back(j);
            continue;
        }
        best.push_back(s.summary.best_accuracy);
        ratios.push_back(s.summary.total_upload_ratio);
        summaries.push_back(s.summary);
        j["best_accuracy"] = s.summary.best_accuracy;
        j["best_round"] = s.summary.best_round;
        if (s.summary.rounds_to_target)
            j["rounds_to_target"] = *s.summary.rounds_to_target;
        else
            j["rounds_to_target"] = nullptr;
        j["total_upload_ratio"] = s.summary.total_upload_ratio;
        per_seed.push_back(j);
    }

    int not_reached = 0;
    std::vector<double> reached;
    for (const auto& s : summaries) {
        if (s.rounds_to_target)
            reached.push_back(static_cast<double>(*s.rounds_to_target));
        else
            ++not_reached;
    }

    nlohmann::json j;
    j["target_accuracy"] = result.config.fed.target_accuracy;
    j["num_seeds"] = result.seeds.size();
    j["per_seed"] = per_seed;
    j["best_accuracy_mean"] = mean_of(best);
    j["best_accuracy_std"] = std_of(best);
    j["upload_ratio_mean"] = mean_of(ratios);
    j["not_reached"] = not_reached;
    j["rounds_to_target_mean"] =
        reached.empty() ? nlohmann::json(nullptr) : nlohmann::json(mean_of(reached));
    j["rounds_to_target_std"] =
        reached.empty() ? nlohmann::json(nullptr) : nlohmann::json(std_of(reached));
    const auto median = median_rounds_to_target(summaries);
    j["rounds_to_target_median"] = median ? nlohmann::json(*median) : nlohmann::json(nullptr);
    return j;
}

SweepResult run_sweep(const SweepSpec& sweep, const std::filesystem::path& sweep_dir, int jobs) {
    SweepResult result;
    result.cell_count = static_cast<int>(sweep.values.size() * sweep.base.seeds.size());

    std::filesystem::create_directories(sweep_dir);
    nlohmann::json table = nlohmann::json::array();
    std::string csv = "value,seeds_ok,seeds_failed,best_accuracy_mean,best_accuracy_std,"
                      "rounds_to_target_mean,rounds_to_target_std,not_reached,upload_ratio_mean\n";

    for (const auto& value : sweep.values) {
        ExperimentConfig cfg = sweep.base;
        apply_key(cfg, sweep.axis, value);
        cfg.run_name = sweep.axis + "=" + value;
        const RunResult run = run_experiment(cfg, sweep_dir / cfg.run_name, jobs);

        SweepCellRow row;
        row.value = value;
        std::vector<double> best, ratios, reached;
        for (const auto& s : run.seeds) {
            if (!s.error.empty()) {
                ++row.seeds_failed;
                continue;
            }
            ++row.seeds_ok;
            best.push_back(s.summary.best_accuracy);
            ratios.push_back(s.summary.total_upload_ratio);
            if (s.summary.rounds_to_target)
                reached.push_back(static_cast<double>(*s.summary.rounds_to_target));
            else
                ++row.not_reached;
        }
        row.mean_best_accuracy = mean_of(best);
        row.std_best_accuracy = std_of(best);
        row.mean_upload_ratio = mean_of(ratios);
        if (!reached.empty()) {
            row.mean_rounds_to_target = mean_of(reached);
            row.std_rounds_to_target = std_of(reached);
        }
        result.rows.push_back(row);

        nlohmann::json jr;
        jr["value"] = value;
        jr["seeds_ok"] = row.seeds_ok;
        jr["seeds_failed"] = row.seeds_failed;
        jr["best_accuracy_mean"] = row.mean_best_accuracy;
        jr["best_accuracy_std"] = row.std_best_accuracy;
        jr["rounds_to_target_mean"] = row.mean_rounds_to_target
                                          ? nlohmann::json(*row.mean_rounds_to_target)
                                          : nlohmann::json(nullptr);
        jr["rounds_to_target_std"] = row.std_rounds_to_target
                                         ? nlohmann::json(*row.std_rounds_to_target)
                                         : nlohmann::json(nullptr);
        jr["not_reached"] = row.not_reached;
        jr["upload_ratio_mean"] = row.mean_upload_ratio;
        table.push_back(jr);

        csv += row.value + "," + std::to_string(row.seeds_ok) + "," +
               std::to_string(row.seeds_failed) + "," + format_double(row.mean_best_accuracy) +
               "," + format_double(row.std_best_accuracy) + "," +
               (row.mean_rounds_to_target ? format_double(*row.mean_rounds_to_target) : "") +
               "," + (row.std_rounds_to_target ? format_double(*row.std_rounds_to_target) : "") +
               "," + std::to_string(row.not_reached) + "," +
               format_double(row.mean_upload_ratio) + "\n";
    }

    nlohmann::json doc;
    doc["axis"] = sweep.axis;
    doc["cell_count"] = result.cell_count;
    doc["rows"] = table;
    std::ofstream jout(sweep_dir / "table.json", std::ios::trunc);
    jout << doc.dump(2) << "\n";
    std::ofstream cout_(sweep_dir / "table.csv", std::ios::trunc);
    cout_ << csv;
    return result;
}

namespace {

std::vector<RoundMetrics> parse_rounds_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<RoundMetrics> rounds;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (header) {
            header = false;
            continue;
        }
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        RoundMetrics m;
        std::getline(ss, field, ',');
        m.round = std::stoi(field);
        std::getline(ss, field, ',');
        m.accuracy = std::stod(field);
        std::getline(ss, field, ',');
        m.uploads_images = std::stoll(field);
        std::getline(ss, field, ',');
        m.uploads_bytes = std::stoll(field);
        std::getline(ss, field, ',');
        m.params_bytes = std::stoll(field);
        std::getline(ss, field, ',');
        m.mean_alpha = std::stod(field);
        rounds.push_back(m);
    }
    return rounds;
}

}  // namespace

LoadedRun load_run_dir(const std::filesystem::path& dir) {
    LoadedRun run;
    run.dir = dir;
    if (!std::filesystem::exists(dir / "config.txt"))
        throw ConfigError("not a run directory (missing config.txt): " + dir.string());
    run.config = load_config(dir / "config.txt");

    std::vector<std::filesystem::path> seed_dirs;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_directory() && entry.path().filename().string().rfind("seed_", 0) == 0)
            seed_dirs.push_back(entry.path());
    std::sort(seed_dirs.begin(), seed_dirs.end());
    if (seed_dirs.empty()) throw ConfigError("run directory has no seed results: " + dir.string());

    for (const auto& sd : seed_dirs) {
        std::ifstream in(sd / "summary.json");
        if (!in) throw std::runtime_error("missing " + (sd / "summary.json").string());
        nlohmann::json j;
        in >> j;
        RunSummary s;
        s.best_accuracy = j.at("best_accuracy").get<double>();
        s.best_round = j.at("best_round").get<int>();
        if (!j.at("rounds_to_target").is_null())
            s.rounds_to_target = j.at("rounds_to_target").get<int>();
        s.total_upload_ratio = j.at("total_upload_ratio").get<double>();
        run.summaries.push_back(s);
        run.total_client_images.push_back(j.value("total_client_images", 0ll));
        run.rounds_per_seed.push_back(parse_rounds_csv(sd / "rounds.csv"));
    }
    return run;
}

nlohmann::json compare_run_dirs(const std::vector<std::filesystem::path>& run_dirs,
                                const std::filesystem::path& out_dir) {
    if (run_dirs.size() < 2) throw ConfigError("compare: need at least two run directories");
    std::vector<LoadedRun> runs;
    runs.reserve(run_dirs.size());
    for (const auto& d : run_dirs) runs.push_back(load_run_dir(d));

    static const std::vector<std::string> allowed_diffs = {"aggregator", "epsilon", "M",
                                                           "run_name"};
    const auto base_kv = config_key_values(runs.front().config);
    for (std::size_t i = 1; i < runs.size(); ++i) {
        const auto kv = config_key_values(runs[i].config);
        std::string diff;
        for (const auto& [key, value] : base_kv) {
            const auto it = kv.find(key);
            if (it != kv.end() && it->second == value) continue;
            if (std::find(allowed_diffs.begin(), allowed_diffs.end(), key) != allowed_diffs.end())
                continue;
            diff += "  " + key + ": " + value + " vs " +
                    (it == kv.end() ? std::string("<missing>") : it->second) + "\n";
        }
        if (!diff.empty())
            throw ConfigError("compare: configs differ beyond aggregator/epsilon/M between " +
                              runs.front().dir.string() + " and " + runs[i].dir.string() + ":\n" +
                              diff);
    }

    const double target = runs.front().config.fed.target_accuracy;
    for (const auto& r : runs)
        if (r.config.fed.target_accuracy != target)
            throw ConfigError("compare: target_accuracy differs between runs");

    std::filesystem::create_directories(out_dir);

    nlohmann::json doc;
    doc["candidate"] = runs.front().config.run_name;
    doc["target_accuracy"] = target;
    nlohmann::json comparisons = nlohmann::json::array();
    for (std::size_t i = 1; i < runs.size(); ++i) {
        const CompareReport rep =
            compare_runs(runs.front().summaries, target, runs[i].summaries, target);
        nlohmann::json c;
        c["baseline"] = runs[i].config.run_name;
        c["candidate_best_accuracy_mean"] = rep.a.mean_best_accuracy;
        c["candidate_best_accuracy_std"] = rep.a.std_best_accuracy;
        c["baseline_best_accuracy_mean"] = rep.b.mean_best_accuracy;
        c["baseline_best_accuracy_std"] = rep.b.std_best_accuracy;
        c["candidate_median_rounds"] = rep.a.median_rounds_to_target
                                           ? nlohmann::json(*rep.a.median_rounds_to_target)
                                           : nlohmann::json(nullptr);
        c["baseline_median_rounds"] = rep.b.median_rounds_to_target
                                          ? nlohmann::json(*rep.b.median_rounds_to_target)
                                          : nlohmann::json(nullptr);
        c["round_reduction"] = rep.round_reduction ? nlohmann::json(*rep.round_reduction)
                                                   : nlohmann::json(nullptr);
        c["reduction_is_lower_bound"] = rep.reduction_is_lower_bound;
        c["candidate_not_reached"] = rep.a.not_reached;
        c["baseline_not_reached"] = rep.b.not_reached;
        comparisons.push_back(c);
    }
    doc["comparisons"] = comparisons;
    {
        std::ofstream out(out_dir / "comparison.json", std::ios::trunc);
        out << doc.dump(2) << "\n";
    }

    // plot-ready series: one row per executed round, one column per run
    std::size_t max_rounds = 0;
    for (const auto& r : runs)
        for (const auto& seed_rounds : r.rounds_per_seed)
            max_rounds = std::max(max_rounds, seed_rounds.size());

    auto series_csv = [&](const std::function<double(const RoundMetrics&, long long)>& value) {
        std::string csv = "round";
        for (const auto& r : runs) csv += "," + r.config.run_name;
        csv += "\n";
        for (std::size_t round = 0; round < max_rounds; ++round) {
            csv += std::to_string(round);
            for (const auto& r : runs) {
                double acc = 0.0;
                int live = 0;
                for (std::size_t s = 0; s < r.rounds_per_seed.size(); ++s)
                    if (round < r.rounds_per_seed[s].size()) {
                        acc += value(r.rounds_per_seed[s][round],
                                     s < r.total_client_images.size() ? r.total_client_images[s] : 0);
                        ++live;
                    }
                csv += ",";
                if (live > 0) csv += format_double(acc / live);
            }
            csv += "\n";
        }
        return csv;
    };

    {
        std::ofstream out(out_dir / "plot_accuracy.csv", std::ios::trunc);
        out << series_csv([](const RoundMetrics& m, long long) { return m.accuracy; });
    }
    {
        std::ofstream out(out_dir / "plot_uploads.csv", std::ios::trunc);
        out << series_csv([](const RoundMetrics& m, long long total) {
            return total > 0 ? static_cast<double>(m.uploads_images) / static_cast<double>(total)
                             : static_cast<double>(m.uploads_images);
        });
    }
    return doc;
}

std::string file_digest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    char c;
    while (in.get(c)) {
        hash ^= static_cast<unsigned char>(c);
        hash *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return std::string(buf);
}

}  // namespace fedsup
