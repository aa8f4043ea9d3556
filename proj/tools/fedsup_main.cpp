#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedsup/config.hpp"
#include "fedsup/data.hpp"
#include "fedsup/experiment.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

fs::path default_out_root() {
    if (const char* env = std::getenv("FEDSUP_OUT")) return fs::path(env);
    return fs::path("runs");
}

int cmd_generate(int samples, std::uint64_t seed, int height, int width, float noise,
                 int jitter, const std::string& out_file) {
    fedsup::SyntheticBlinkSpec spec;
    spec.num_samples = samples;
    spec.seed = seed;
    spec.height = height;
    spec.width = width;
    spec.noise_std = noise;
    spec.jitter_px = jitter;
    const fedsup::LabeledDataset ds = fedsup::generate_blink_dataset(spec);
    const fs::path path(out_file);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fedsup::save_dataset(ds, path);
    std::cout << "wrote " << ds.size() << " samples to " << path.string() << "\n"
              << "digest " << fedsup::file_digest(path) << "\n";
    return kExitOk;
}

int cmd_run(const std::string& config_file, const std::string& out,
            const std::vector<std::uint64_t>& seed_override, int jobs,
            int checkpoint_every) {
    fedsup::ExperimentConfig cfg = fedsup::load_config(config_file);
    if (!seed_override.empty()) cfg.seeds = seed_override;
    if (checkpoint_every >= 0) cfg.fed.checkpoint_every = checkpoint_every;
    cfg.validate();

    const fs::path run_dir = (out.empty() ? default_out_root() : fs::path(out)) / cfg.run_name;
    const fedsup::RunResult result = fedsup::run_experiment(cfg, run_dir, jobs);

    std::cout << "run " << cfg.run_name << ": " << result.seeds.size() << " seed(s) -> "
              << run_dir.string() << "\n";
    for (const auto& s : result.seeds) {
        if (!s.error.empty()) {
            std::cerr << "seed " << s.seed << " failed: " << s.error << "\n";
            continue;
        }
        std::cout << "  seed " << s.seed << ": best "
                  << fedsup::format_double(s.summary.best_accuracy) << " @ round "
                  << s.summary.best_round << ", rounds-to-target "
                  << (s.summary.rounds_to_target ? std::to_string(*s.summary.rounds_to_target)
                                                 : std::string("not-reached"))
                  << ", upload ratio " << fedsup::format_double(s.summary.total_upload_ratio)
                  << "\n";
    }
    return result.ok() ? kExitOk : kExitRuntime;
}

int cmd_sweep(const std::string& sweep_file, const std::string& out, int jobs) {
    const fedsup::SweepSpec sweep = fedsup::load_sweep(sweep_file);
    sweep.base.validate();

    const fs::path sweep_dir =
        (out.empty() ? default_out_root() : fs::path(out)) / sweep.base.run_name;
    const fedsup::SweepResult result = fedsup::run_sweep(sweep, sweep_dir, jobs);

    std::cout << "sweep " << sweep.axis << " over " << sweep.values.size() << " value(s), "
              << result.cell_count << " cell(s) -> " << sweep_dir.string() << "\n";
    bool any_failed = false;
    for (const auto& row : result.rows) {
        std::cout << "  " << sweep.axis << "=" << row.value << ": best "
                  << fedsup::format_double(row.mean_best_accuracy) << " ("
                  << fedsup::format_double(row.std_best_accuracy) << "), rounds "
                  << (row.mean_rounds_to_target
                          ? fedsup::format_double(*row.mean_rounds_to_target)
                          : std::string("not-reached"))
                  << ", upload ratio " << fedsup::format_double(row.mean_upload_ratio);
        if (row.seeds_failed > 0) {
            std::cout << " [" << row.seeds_failed << " cell(s) FAILED]";
            any_failed = true;
        }
        std::cout << "\n";
    }
    return any_failed ? kExitRuntime : kExitOk;
}

int cmd_compare(const std::vector<std::string>& run_dirs, const std::string& out) {
    std::vector<fs::path> dirs(run_dirs.begin(), run_dirs.end());
    const fs::path out_dir = out.empty() ? default_out_root() / "compare" : fs::path(out);
    const nlohmann::json doc = fedsup::compare_run_dirs(dirs, out_dir);
    std::cout << doc.dump(2) << "\n";
    std::cout << "report -> " << out_dir.string() << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"FedSup federated fatigue-supervision simulator"};
    app.require_subcommand(1);

    // generate
    auto* generate = app.add_subcommand("generate", "Write a synthetic eye-state dataset file");
    int g_samples = 2000, g_height = 24, g_width = 24, g_jitter = 2;
    std::uint64_t g_seed = 7;
    float g_noise = 0.3f;
    std::string g_out = "dataset.fsds";
    generate->add_option("--samples", g_samples, "number of images");
    generate->add_option("--seed", g_seed, "generator seed");
    generate->add_option("--height", g_height, "image height (>= 12)");
    generate->add_option("--width", g_width, "image width (>= 12)");
    generate->add_option("--noise", g_noise, "Gaussian pixel noise std");
    generate->add_option("--jitter", g_jitter, "max center jitter in px");
    generate->add_option("--out", g_out, "output file path");

    // run
    auto* run = app.add_subcommand("run", "Execute one experiment config across its seeds");
    std::string r_config, r_out;
    std::vector<std::uint64_t> r_seeds;
    int r_jobs = 1, r_checkpoint = -1;
    run->add_option("--config", r_config, "experiment config file")->required();
    run->add_option("--out", r_out, "output root (default $FEDSUP_OUT or ./runs)");
    run->add_option("--seed", r_seeds, "override the config's seed list");
    run->add_option("--jobs", r_jobs, "parallel seeds")->check(CLI::PositiveNumber);
    run->add_option("--checkpoint-every", r_checkpoint, "rounds between checkpoints (0 = off)");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Run a one-axis parameter sweep");
    std::string s_config, s_out;
    int s_jobs = 1;
    sweep->add_option("--config", s_config, "sweep config file")->required();
    sweep->add_option("--out", s_out, "output root (default $FEDSUP_OUT or ./runs)");
    sweep->add_option("--jobs", s_jobs, "parallel seeds per cell")->check(CLI::PositiveNumber);

    // compare
    auto* compare = app.add_subcommand("compare", "Compare completed runs (candidate first)");
    std::vector<std::string> c_dirs;
    std::string c_out;
    compare->add_option("dirs", c_dirs, "run directories")->expected(-2);
    compare->add_option("--out", c_out, "report directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (generate->parsed())
            return cmd_generate(g_samples, g_seed, g_height, g_width, g_noise, g_jitter, g_out);
        if (run->parsed()) return cmd_run(r_config, r_out, r_seeds, r_jobs, r_checkpoint);
        if (sweep->parsed()) return cmd_sweep(s_config, s_out, s_jobs);
        if (compare->parsed()) return cmd_compare(c_dirs, c_out);
    } catch (const fedsup::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
