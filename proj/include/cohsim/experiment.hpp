#pragma once

#include "cohsim/coherence.hpp"
#include "cohsim/synthesis.hpp"

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cohsim {

inline constexpr std::string_view kVersion = "0.1.0";

struct SweepConfig {
    std::optional<M1Params> m1 = M1Params{};
    std::optional<M2Params> m2 = M2Params{};
    SimulationGrid grid;
    std::vector<Index> emitter_counts{1, 10, 100, 1000, 10'000, 100'000};
    int replicates = 8;
    std::uint64_t master_seed = 42;
    Index max_lag_steps = 20'000;
    unsigned threads = 0;        // 0: hardware concurrency; never affects results
    bool record_timing = false;  // wall_ms is left empty unless set

    std::vector<std::string> violations() const;
    std::vector<EmissionModel> models() const;
};

struct ResultRow {
    ModelTag model = ModelTag::M1;
    Index n_emitters = 0;
    int replicate = 0;
    std::uint64_t seed = 0;
    double l_pew_um = std::numeric_limits<double>::quiet_NaN();
    double l_fwhm_um = std::numeric_limits<double>::quiet_NaN();
    FwhmStatus fwhm_status = FwhmStatus::NoCrossing;
    double gamma_peak_halfwidth_fs = std::numeric_limits<double>::quiet_NaN();
    double gamma_peak = std::numeric_limits<double>::quiet_NaN();
    double max_lag_fs = 0.0;
    double wall_ms = std::numeric_limits<double>::quiet_NaN();
    std::string error;  // non-empty when the point failed

    bool failed() const { return !error.empty(); }
};

struct AggregateRow {
    ModelTag model = ModelTag::M1;
    Index n_emitters = 0;
    int replicates = 0;  // successful rows in the cell
    double l_pew_mean_um = 0.0;
    double l_pew_sd_um = 0.0;
    double l_pew_cv = 0.0;
    int fwhm_ill_defined_count = 0;
};

struct SweepResult {
    std::vector<ResultRow> rows;
    std::vector<AggregateRow> aggregates;

    const AggregateRow* find(ModelTag model, Index n_emitters) const;
};

/// Seed of one (model, n, replicate) cell; independent of the sweep's shape.
std::uint64_t replicate_seed(std::uint64_t master_seed, ModelTag model, Index n_emitters, int replicate);

/// superposition -> spectral autocorrelation -> both coherence lengths.
ResultRow run_point(const EmissionModel& model, Index n_emitters, const SimulationGrid& grid, std::uint64_t seed,
                    Index max_lag_steps, bool record_timing = false);

/// Every (model, n, replicate) point, rows in canonical order. A failing
/// point is recorded in its row and does not stop the sweep.
SweepResult run_sweep(const SweepConfig& config);

/// Mean, sample sd (n - 1) and CV of l_pew per (model, n) cell, in order of
/// first appearance. Failed rows are skipped.
std::vector<AggregateRow> aggregate(std::span<const ResultRow> rows);

struct StationarityReport {
    Index segment_length = 0;
    std::vector<double> segment_variance;
    std::vector<Index> lags;           // steps
    double max_gamma_discrepancy = 0.0;  // over lags and segment pairs with power

    double variance_ratio() const;       // max / min
    double variance_dispersion() const;  // (max - min) / mean
};

/// Splits the record into n_segments equal contiguous pieces (remainder
/// dropped); each must span at least 10 reference periods.
StationarityReport stationarity_diagnostic(const FieldSignal& signal, int n_segments,
                                           double reference_period_fs = 2.0);

struct SweepPaths {
    std::filesystem::path rows_csv;
    std::filesystem::path aggregate_csv;
    std::filesystem::path metadata_json;

    static SweepPaths in_directory(const std::filesystem::path& dir);
};

std::string rows_csv_text(std::span<const ResultRow> rows);
std::string aggregate_csv_text(std::span<const AggregateRow> aggregates);
std::string metadata_json_text(const SweepConfig& config, const SweepResult& result);

/// Parses a row CSV written by rows_csv_text.
std::vector<ResultRow> parse_rows_csv(const std::string& text);

/// Writes all three files; throws std::runtime_error naming the path on I/O failure.
void write_results(const SweepResult& result, const SweepConfig& config, const SweepPaths& paths);

}  // namespace cohsim
