#include "cohsim/cli.hpp"
#include "cohsim/text_io.hpp"

#include <doctest.h>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <sstream>
#include <unistd.h>

using namespace cohsim;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / ("cohsim_cli_" + std::to_string(::getpid())) / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run_cli(std::vector<std::string> args)
{
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::size_t line_count(const std::string& s)
{
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST_CASE("simulate writes one row per sample and repeats byte for byte")
{
    const auto dir = scratch_dir("simulate");
    const auto config = dir / "config.json";
    write_text_file(config, R"({"grid": {"n_samples": 100}, "model": "m2", "m2": {"emission_rate": 0.05}, "seed": 7})");
    const auto before = read_text_file(config);

    REQUIRE(run_cli({"simulate", "--config", config.string(), "--out", (dir / "a").string()}).code == 0);
    REQUIRE(run_cli({"simulate", "--config", config.string(), "--out", (dir / "b").string()}).code == 0);
    const auto a = read_text_file(dir / "a" / "signal_m2_n1.csv");
    CHECK(line_count(a) == 101);
    CHECK(a.rfind("t_fs,field\n", 0) == 0);
    CHECK(a == read_text_file(dir / "b" / "signal_m2_n1.csv"));
    CHECK(read_text_file(dir / "a" / "signal_m2_n1.json") == read_text_file(dir / "b" / "signal_m2_n1.json"));
    CHECK(read_text_file(config) == before);
}

TEST_CASE("decimation keeps every K-th row")
{
    const auto dir = scratch_dir("decimate");
    const auto r = run_cli({"simulate", "--samples", "100", "--decimate", "10", "--model", "m1", "--out", dir.string()});
    REQUIRE(r.code == 0);
    CHECK(line_count(read_text_file(dir / "signal_m1_n1.csv")) == 11);
}

TEST_CASE("metadata echoes the effective parameters; flags win over the config")
{
    const auto dir = scratch_dir("echo");
    const auto config = dir / "config.json";
    write_text_file(config, R"({"grid": {"n_samples": 200}, "seed": 5, "emitters": 3, "m1": {"jump_rate": 0.01}})");
    REQUIRE(run_cli({"simulate", "--config", config.string(), "--seed", "11", "--model", "m1", "--out",
                     dir.string()})
                .code == 0);
    const auto meta = nlohmann::json::parse(read_text_file(dir / "signal_m1_n3.json"));
    CHECK(meta["master_seed"] == 11);
    CHECK(meta["config"]["seed"] == 11);
    CHECK(meta["config"]["emitters"] == 3);
    CHECK(meta["config"]["grid"]["n_samples"] == 200);
    CHECK(meta["config"]["m1"]["jump_rate"] == 0.01);
    CHECK(meta["rows"] == 200);
}

TEST_CASE("malformed config lists every problem and exits nonzero")
{
    const auto dir = scratch_dir("bad");
    const auto config = dir / "config.json";
    write_text_file(config,
                    R"({"grid": {"n_samples": -5}, "m1": {"jump_rate": 2.0, "colour": 1}, "seed": "x", "bogus": 1})");
    const auto r = run_cli({"simulate", "--config", config.string(), "--out", (dir / "out").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("bogus") != std::string::npos);
    CHECK(r.err.find("m1.colour") != std::string::npos);
    CHECK(r.err.find("seed") != std::string::npos);
    CHECK(r.err.find("n_samples") != std::string::npos);
    CHECK(r.err.find("jump_rate") != std::string::npos);
    CHECK(!fs::exists(dir / "out"));

    write_text_file(config, "{ not json");
    CHECK(run_cli({"simulate", "--config", config.string()}).code == 2);
    CHECK(run_cli({"simulate", "--config", (dir / "missing.json").string()}).code == 2);
}

TEST_CASE("unknown subcommand or flag is a usage error")
{
    CHECK(run_cli({"transmogrify"}).code != 0);
    CHECK(run_cli({"simulate", "--no-such-flag"}).code != 0);
    CHECK(run_cli({}).code != 0);
}

TEST_CASE("gamma on a jump-free M1 reports ILL_DEFINED FWHM")
{
    const auto dir = scratch_dir("gamma");
    const auto r = run_cli({"gamma", "--model", "m1", "--jump-rate", "0", "--samples", "100000", "--max-lag-fs", "400",
                            "--out", dir.string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("l_fwhm_um=ILL_DEFINED fwhm_status=NO_CROSSING") != std::string::npos);
    CHECK(r.out.find("(|lag| <= 400 fs)") != std::string::npos);
    const auto csv = read_text_file(dir / "gamma_m1_n1.csv");
    CHECK(csv.rfind("lag_fs,gamma,envelope\n", 0) == 0);
    CHECK(line_count(csv) == 2 * 10'000 + 2);
}

TEST_CASE("psd prints a passing Parseval check")
{
    const auto dir = scratch_dir("psd");
    const auto r = run_cli({"psd", "--model", "m1", "--emitters", "20", "--samples", "50000", "--parseval", "--out",
                            dir.string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("parseval:") != std::string::npos);
    CHECK(r.out.find(" OK") != std::string::npos);
    CHECK(line_count(read_text_file(dir / "psd_m1_n20.csv")) == 25'002);
}

TEST_CASE("sweep writes three files; quick caps the grid")
{
    const auto dir = scratch_dir("sweep");
    const auto r = run_cli({"sweep", "--quick", "--samples", "20000", "--max-lag-fs", "100", "--counts", "1,2,20000",
                            "--replicates", "12", "--threads", "2", "--out", dir.string()});
    REQUIRE(r.code == 0);
    const auto rows = read_text_file(dir / "sweep_rows.csv");
    // 2 models x {1, 2} x 8 replicates after the quick caps.
    CHECK(line_count(rows) == 1 + 2 * 2 * 8);
    CHECK(line_count(read_text_file(dir / "sweep_aggregate.csv")) == 1 + 2 * 2);
    const auto meta = nlohmann::json::parse(read_text_file(dir / "sweep_metadata.json"));
    CHECK(meta["row_count"] == 32);
    CHECK(meta.dump().find(dir.string()) == std::string::npos);
}

TEST_CASE("config application collects problems without throwing")
{
    cli::RunConfig c;
    std::vector<std::string> problems;
    cli::apply_config_json(R"({"sweep": {"emitter_counts": [1, "x"], "replicates": 1.5}, "model": "m3"})", c,
                           problems);
    CHECK(problems.size() == 3);

    problems.clear();
    cli::apply_config_json(R"({"sweep": {"emitter_counts": [5, 50], "replicates": 3, "quick": true}})", c, problems);
    CHECK(problems.empty());
    const auto s = cli::to_sweep_config(c);
    CHECK(s.emitter_counts == std::vector<Index>{5, 50});
    CHECK(s.replicates == 3);
    CHECK(s.max_lag_steps == 20'000);
}
