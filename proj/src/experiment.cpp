#include "cohsim/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <stdexcept>
#include <thread>

namespace cohsim {

std::vector<std::string> SweepConfig::violations() const
{
    std::vector<std::string> out = grid.violations();
    if (!m1 && !m2)
        out.emplace_back("sweep: at least one model must be enabled");
    if (m1)
        for (auto& v : m1->violations())
            out.push_back(std::move(v));
    if (m2)
        for (auto& v : m2->violations())
            out.push_back(std::move(v));
    for (std::size_t i = 0; i < emitter_counts.size(); ++i) {
        if (emitter_counts[i] < 1)
            out.emplace_back("sweep.emitter_counts must be positive");
        if (i > 0 && emitter_counts[i] <= emitter_counts[i - 1])
            out.emplace_back("sweep.emitter_counts must be strictly increasing");
    }
    if (replicates < 1)
        out.emplace_back("sweep.replicates must be >= 1");
    if (max_lag_steps < 1 || 2 * max_lag_steps >= grid.n_samples)
        out.emplace_back("sweep.max_lag must satisfy 1 <= max_lag_steps < n_samples / 2");
    return out;
}

std::vector<EmissionModel> SweepConfig::models() const
{
    std::vector<EmissionModel> out;
    if (m1)
        out.emplace_back(*m1);
    if (m2)
        out.emplace_back(*m2);
    return out;
}

const AggregateRow* SweepResult::find(ModelTag model, Index n_emitters) const
{
    for (const auto& a : aggregates)
        if (a.model == model && a.n_emitters == n_emitters)
            return &a;
    return nullptr;
}

std::uint64_t replicate_seed(std::uint64_t master_seed, ModelTag model, Index n_emitters, int replicate)
{
    const std::uint64_t tag = model == ModelTag::M1 ? 0x4D31ULL : 0x4D32ULL;
    std::uint64_t h = mix64(master_seed ^ 0xA0761D6478BD642FULL);
    h = mix64(h ^ tag);
    h = mix64(h ^ static_cast<std::uint64_t>(n_emitters));
    h = mix64(h ^ static_cast<std::uint64_t>(replicate));
    return h;
}

ResultRow run_point(const EmissionModel& model, Index n_emitters, const SimulationGrid& grid, std::uint64_t seed,
                    Index max_lag_steps, bool record_timing)
{
    ResultRow row;
    row.model = model_tag(model);
    row.n_emitters = n_emitters;
    row.seed = seed;
    row.max_lag_fs = static_cast<double>(max_lag_steps) * grid.dt_fs;

    const auto start = std::chrono::steady_clock::now();
    const auto signal = generate_superposition(model, n_emitters, grid, seed);
    const auto gamma = autocorrelation_spectral(signal, max_lag_steps);
    const auto lengths = coherence_lengths(gamma);
    const auto stop = std::chrono::steady_clock::now();

    row.l_pew_um = lengths.l_pew_um;
    row.fwhm_status = lengths.fwhm.status;
    row.l_fwhm_um = lengths.fwhm.length_um;
    row.gamma_peak_halfwidth_fs = lengths.fwhm.first_crossing_fs;
    row.gamma_peak = lengths.fwhm.peak;
    if (record_timing)
        row.wall_ms = std::chrono::duration<double, std::milli>(stop - start).count();
    return row;
}

SweepResult run_sweep(const SweepConfig& config)
{
    throw_if_violations(config.violations());

    struct Task {
        EmissionModel model;
        Index n;
        int replicate;
    };
    std::vector<Task> tasks;
    for (const auto& model : config.models())
        for (Index n : config.emitter_counts)
            for (int r = 0; r < config.replicates; ++r)
                tasks.push_back({model, n, r});

    SweepResult result;
    result.rows.resize(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < tasks.size(); i = next.fetch_add(1)) {
            const auto& t = tasks[i];
            const auto tag = model_tag(t.model);
            const auto seed = replicate_seed(config.master_seed, tag, t.n, t.replicate);
            try {
                result.rows[i] = run_point(t.model, t.n, config.grid, seed, config.max_lag_steps, config.record_timing);
            } catch (const std::exception& e) {
                ResultRow failed;
                failed.model = tag;
                failed.n_emitters = t.n;
                failed.seed = seed;
                failed.max_lag_fs = static_cast<double>(config.max_lag_steps) * config.grid.dt_fs;
                failed.error = e.what();
                result.rows[i] = std::move(failed);
            }
            result.rows[i].replicate = t.replicate;
        }
    };

    unsigned threads = config.threads != 0 ? config.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(1, tasks.size())));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (unsigned i = 0; i < threads; ++i)
            pool.emplace_back(worker);
    }

    result.aggregates = aggregate(result.rows);
    return result;
}

std::vector<AggregateRow> aggregate(std::span<const ResultRow> rows)
{
    std::vector<AggregateRow> cells;
    std::vector<std::vector<double>> values;
    for (const auto& row : rows) {
        auto it = std::find_if(cells.begin(), cells.end(), [&](const AggregateRow& a) {
            return a.model == row.model && a.n_emitters == row.n_emitters;
        });
        if (it == cells.end()) {
            cells.push_back({row.model, row.n_emitters});
            values.emplace_back();
            it = cells.end() - 1;
        }
        if (row.failed())
            continue;
        const auto cell = static_cast<std::size_t>(it - cells.begin());
        values[cell].push_back(row.l_pew_um);
        if (row.fwhm_status != FwhmStatus::Ok)
            ++it->fwhm_ill_defined_count;
    }

    for (std::size_t c = 0; c < cells.size(); ++c) {
        const auto& v = values[c];
        auto& a = cells[c];
        a.replicates = static_cast<int>(v.size());
        if (v.empty()) {
            a.l_pew_mean_um = a.l_pew_sd_um = a.l_pew_cv = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        double sum = 0.0;
        for (double x : v)
            sum += x;
        const double mean = sum / static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v)
            ss += (x - mean) * (x - mean);
        const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
        a.l_pew_mean_um = mean;
        a.l_pew_sd_um = sd;
        a.l_pew_cv = mean != 0.0 ? sd / mean : 0.0;
    }
    return cells;
}

double StationarityReport::variance_ratio() const
{
    const auto [lo, hi] = std::minmax_element(segment_variance.begin(), segment_variance.end());
    return *hi / *lo;
}

double StationarityReport::variance_dispersion() const
{
    const auto [lo, hi] = std::minmax_element(segment_variance.begin(), segment_variance.end());
    double sum = 0.0;
    for (double v : segment_variance)
        sum += v;
    return (*hi - *lo) / (sum / static_cast<double>(segment_variance.size()));
}

StationarityReport stationarity_diagnostic(const FieldSignal& signal, int n_segments, double reference_period_fs)
{
    if (n_segments < 2)
        throw std::invalid_argument("stationarity: need at least 2 segments");
    const Index length = signal.samples.size() / n_segments;
    if (static_cast<double>(length) * signal.grid.dt_fs < 10.0 * reference_period_fs)
        throw std::invalid_argument("stationarity: segment too short (needs >= 10 reference periods)");

    StationarityReport report;
    report.segment_length = length;
    for (Index lag : {1, 2, 5, 10, 25, 50})
        if (2 * lag < length)
            report.lags.push_back(lag);
    const Index max_lag = report.lags.back();

    std::vector<CoherenceFunction> gammas;
    for (int s = 0; s < n_segments; ++s) {
        const auto segment = signal.samples.segment(s * length, length);
        const double mean = segment.mean();
        report.segment_variance.push_back((segment.array() - mean).square().sum() / static_cast<double>(length));
        if (report.segment_variance.back() > 0.0)
            gammas.push_back(autocorrelation_direct(segment, signal.grid.dt_fs, max_lag));
    }
    for (std::size_t a = 0; a < gammas.size(); ++a)
        for (std::size_t b = a + 1; b < gammas.size(); ++b)
            for (Index lag : report.lags)
                report.max_gamma_discrepancy =
                    std::max(report.max_gamma_discrepancy, std::abs(gammas[a].at(lag) - gammas[b].at(lag)));
    return report;
}

SweepPaths SweepPaths::in_directory(const std::filesystem::path& dir)
{
    return {dir / "sweep_rows.csv", dir / "sweep_aggregate.csv", dir / "sweep_metadata.json"};
}

}  // namespace cohsim
