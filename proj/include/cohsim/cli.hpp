#pragma once

#include "cohsim/experiment.hpp"
#include "cohsim/synthesis.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace cohsim::cli {

enum class ModelChoice { M1, M2, Both };

/// Effective configuration: defaults, then the --config file, then flags.
struct RunConfig {
    SimulationGrid grid;
    M1Params m1;
    M2Params m2;
    ModelChoice model = ModelChoice::Both;
    Index emitters = 1;
    std::uint64_t seed = 42;
    std::filesystem::path out_dir = "out";
    Index decimate = 1;
    double max_lag_fs = 800.0;
    std::vector<Index> emitter_counts{1, 10, 100, 1000, 10'000, 100'000};
    int replicates = 8;
    unsigned threads = 0;
    bool record_timing = false;
    bool quick = false;
    bool raw_fwhm = false;
    bool parseval = false;

    Index max_lag_steps() const;
    std::vector<EmissionModel> models() const;
    /// simulate and psd never correlate, so they skip the lag-window check.
    std::vector<std::string> violations(bool check_lag_window = true) const;
};

/// Desk-scale sweep: counts capped at 10^4, at most 8 replicates.
inline constexpr Index kQuickMaxEmitters = 10'000;
inline constexpr int kQuickMaxReplicates = 8;

/// Applies a JSON config document on top of `config`. Every problem
/// (syntax, unknown key, wrong type) is appended to `problems`.
void apply_config_json(const std::string& text, RunConfig& config, std::vector<std::string>& problems);

SweepConfig to_sweep_config(const RunConfig& config);

/// JSON echo of the effective parameters (output directory excluded).
std::string config_echo_json(const RunConfig& config);

/// Entry point shared by the executable and the tests. Exit code 0 iff all
/// requested outputs were written.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cohsim::cli
