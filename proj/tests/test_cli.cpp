#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "fedsup/experiment.hpp"

namespace fs = std::filesystem;

namespace {

const char* cli_path() { return FEDSUP_CLI_PATH; }

int run_cli(const std::string& args) {
    const std::string cmd = std::string(cli_path()) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

fs::path fresh_dir(const char* name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("generate: identical seeds give identical file digests; bad size exits 2") {
    const fs::path dir = fresh_dir("fedsup_cli_gen");
    const std::string a = (dir / "a.fsds").string();
    const std::string b = (dir / "b.fsds").string();
    CHECK(run_cli("generate --samples 200 --seed 7 --out " + a) == 0);
    CHECK(run_cli("generate --samples 200 --seed 7 --out " + b) == 0);
    CHECK(fedsup::file_digest(a) == fedsup::file_digest(b));

    // the generated file loads through the library path
    const fedsup::LabeledDataset ds = fedsup::load_dataset(a);
    CHECK(ds.size() == 200);

    CHECK(run_cli("generate --samples 10 --height 4 --out " + (dir / "c.fsds").string()) == 2);
    fs::remove_all(dir);
}

TEST_CASE("run: T=0 exits 0 with an empty-round summary; reruns are byte-identical") {
    const fs::path dir = fresh_dir("fedsup_cli_run");
    const fs::path config = dir / "exp.conf";
    {
        std::ofstream o(config);
        o << "run_name = clitest\nsamples = 80\nimage_h = 12\nimage_w = 12\n"
          << "K = 2\nN = 4\nC = 1.0\nE = 1\neta = 0.05\nM = 2\nepsilon = 0\n"
          << "T = 2\nbatch_size = 16\ntarget_accuracy = 0.999\n"
          << "partition_mu = 14\npartition_sigma = 2\nseeds = 1,2\n";
    }

    CHECK(run_cli("run --config " + config.string() + " --out " + (dir / "o1").string()) == 0);
    CHECK(run_cli("run --config " + config.string() + " --out " + (dir / "o2").string()) == 0);
    for (const char* rel :
         {"clitest/summary.json", "clitest/seed_1/rounds.csv", "clitest/seed_2/rounds.csv"}) {
        CHECK(fedsup::file_digest(dir / "o1" / rel) == fedsup::file_digest(dir / "o2" / rel));
    }

    // T = 0: still a success, zero rounds executed
    const fs::path zero_config = dir / "zero.conf";
    {
        std::ifstream in(config);
        std::ofstream o(zero_config);
        std::string line;
        while (std::getline(in, line))
            o << (line.rfind("T = ", 0) == 0 ? "T = 0" : line) << "\n";
    }
    CHECK(run_cli("run --config " + zero_config.string() + " --out " + (dir / "o3").string()) == 0);
    std::ifstream summary(dir / "o3" / "clitest" / "seed_1" / "summary.json");
    nlohmann::json j;
    summary >> j;
    CHECK(j.at("rounds_executed").get<int>() == 0);

    // config errors exit 2
    const fs::path bad = dir / "bad.conf";
    {
        std::ofstream o(bad);
        o << "unknown_key = 1\n";
    }
    CHECK(run_cli("run --config " + bad.string()) == 2);
    CHECK(run_cli("run --config " + (dir / "missing.conf").string()) == 2);
    CHECK(run_cli("frobnicate") == 2);
    fs::remove_all(dir);
}

TEST_CASE("sweep: single-value sweep matches a plain run; cells are counted") {
    const fs::path dir = fresh_dir("fedsup_cli_sweep");
    const fs::path sweep = dir / "sweep.conf";
    {
        std::ofstream o(sweep);
        o << "run_name = sweeptest\nsamples = 80\nimage_h = 12\nimage_w = 12\n"
          << "K = 2\nN = 4\nC = 1.0\nE = 1\neta = 0.05\nM = 2\nepsilon = 0\n"
          << "T = 1\nbatch_size = 16\ntarget_accuracy = 0.999\n"
          << "partition_mu = 14\npartition_sigma = 2\nseeds = 1,2\n"
          << "sweep_axis = epsilon\nsweep_values = 0\n";
    }
    CHECK(run_cli("sweep --config " + sweep.string() + " --out " + dir.string()) == 0);
    std::ifstream table(dir / "sweeptest" / "table.json");
    nlohmann::json j;
    table >> j;
    CHECK(j.at("cell_count").get<int>() == 2);  // 1 value x 2 seeds
    REQUIRE(j.at("rows").size() == 1);

    // the sweep cell's rounds.csv matches an equivalent plain run
    const fs::path config = dir / "plain.conf";
    {
        std::ifstream in(sweep);
        std::ofstream o(config);
        std::string line;
        while (std::getline(in, line))
            if (line.rfind("sweep_", 0) != 0) o << line << "\n";
    }
    CHECK(run_cli("run --config " + config.string() + " --out " + (dir / "plain").string()) == 0);
    CHECK(fedsup::file_digest(dir / "sweeptest" / "epsilon=0" / "seed_1" / "rounds.csv") ==
          fedsup::file_digest(dir / "plain" / "sweeptest" / "seed_1" / "rounds.csv"));
    fs::remove_all(dir);
}

TEST_CASE("compare: plot CSV rows equal executed rounds") {
    const fs::path dir = fresh_dir("fedsup_cli_cmp");
    const fs::path config = dir / "exp.conf";
    {
        std::ofstream o(config);
        o << "run_name = cmptest\nsamples = 80\nimage_h = 12\nimage_w = 12\n"
          << "K = 2\nN = 4\nC = 1.0\nE = 1\neta = 0.05\nM = 1\nepsilon = 0\n"
          << "T = 3\nbatch_size = 16\ntarget_accuracy = 0.999\n"
          << "partition_mu = 14\npartition_sigma = 2\nseeds = 5\n";
    }
    CHECK(run_cli("run --config " + config.string() + " --out " + (dir / "runs").string()) == 0);
    const std::string run_dir = (dir / "runs" / "cmptest").string();
    CHECK(run_cli("compare " + run_dir + " " + run_dir + " --out " + (dir / "cmp").string()) == 0);

    std::ifstream plot(dir / "cmp" / "plot_accuracy.csv");
    int lines = 0;
    std::string line;
    while (std::getline(plot, line))
        if (!line.empty()) ++lines;
    CHECK(lines == 1 + 3);  // header + one row per executed round

    // fewer than two dirs is a usage error
    CHECK(run_cli("compare " + run_dir + " --out " + (dir / "cmp2").string()) == 2);
    fs::remove_all(dir);
}
