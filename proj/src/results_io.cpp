#include "cohsim/experiment.hpp"
#include "cohsim/text_io.hpp"

#include <json.hpp>

#include <charconv>
#include <stdexcept>

namespace cohsim {

namespace {

constexpr std::string_view kRowHeader =
    "model,n_emitters,replicate,seed,l_pew_um,l_fwhm_um,fwhm_status,gamma_peak_halfwidth_fs,max_lag_fs,wall_ms";
constexpr std::string_view kAggregateHeader =
    "model,n_emitters,replicates,l_pew_mean_um,l_pew_sd_um,l_pew_cv,fwhm_ill_defined_count";
constexpr std::string_view kIllDefined = "ILL_DEFINED";
constexpr std::string_view kErrorStatus = "ERROR";

template <typename Int>
Int parse_integer(std::string_view field)
{
    Int value{};
    const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || end != field.data() + field.size())
        throw std::invalid_argument("not an integer: '" + std::string(field) + "'");
    return value;
}

nlohmann::ordered_json grid_json(const SimulationGrid& g)
{
    return {{"dt_fs", g.dt_fs}, {"n_samples", g.n_samples}, {"t0_fs", g.t0_fs}};
}

}  // namespace

std::string rows_csv_text(std::span<const ResultRow> rows)
{
    std::string out(kRowHeader);
    out += '\n';
    for (const auto& r : rows) {
        out += to_string(r.model);
        out += ',' + std::to_string(r.n_emitters);
        out += ',' + std::to_string(r.replicate);
        out += ',' + std::to_string(r.seed);
        if (r.failed()) {
            out += ",,,";
            out += kErrorStatus;
            out += ",,";
        } else {
            out += ',' + format_number(r.l_pew_um);
            out += ',';
            out += r.fwhm_status == FwhmStatus::Ok ? format_number(r.l_fwhm_um) : std::string(kIllDefined);
            out += ',';
            out += to_string(r.fwhm_status);
            out += ',' + format_number(r.gamma_peak_halfwidth_fs);
        }
        out += ',' + format_number(r.max_lag_fs);
        out += ',' + format_number(r.wall_ms);
        out += '\n';
    }
    return out;
}

std::string aggregate_csv_text(std::span<const AggregateRow> aggregates)
{
    std::string out(kAggregateHeader);
    out += '\n';
    for (const auto& a : aggregates) {
        out += to_string(a.model);
        out += ',' + std::to_string(a.n_emitters);
        out += ',' + std::to_string(a.replicates);
        out += ',' + format_number(a.l_pew_mean_um);
        out += ',' + format_number(a.l_pew_sd_um);
        out += ',' + format_number(a.l_pew_cv);
        out += ',' + std::to_string(a.fwhm_ill_defined_count);
        out += '\n';
    }
    return out;
}

std::vector<ResultRow> parse_rows_csv(const std::string& text)
{
    std::vector<ResultRow> rows;
    std::size_t pos = 0;
    bool header = true;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string::npos)
            end = text.size();
        const std::string_view line(text.data() + pos, end - pos);
        pos = end + 1;
        if (header) {
            if (line != kRowHeader)
                throw std::invalid_argument("row CSV: unexpected header");
            header = false;
            continue;
        }
        if (line.empty())
            continue;
        const auto f = split_csv_line(line);
        if (f.size() != 10)
            throw std::invalid_argument("row CSV: expected 10 fields");
        ResultRow r;
        if (f[0] == "M1")
            r.model = ModelTag::M1;
        else if (f[0] == "M2")
            r.model = ModelTag::M2;
        else
            throw std::invalid_argument("row CSV: unknown model '" + std::string(f[0]) + "'");
        r.n_emitters = parse_integer<Index>(f[1]);
        r.replicate = parse_integer<int>(f[2]);
        r.seed = parse_integer<std::uint64_t>(f[3]);
        if (f[6] == kErrorStatus) {
            r.error = "failed";
        } else {
            r.l_pew_um = parse_number(f[4]);
            if (f[6] == "OK")
                r.fwhm_status = FwhmStatus::Ok;
            else if (f[6] == "NO_CROSSING")
                r.fwhm_status = FwhmStatus::NoCrossing;
            else if (f[6] == "MULTI_CROSSING")
                r.fwhm_status = FwhmStatus::MultiCrossing;
            else
                throw std::invalid_argument("row CSV: unknown fwhm_status '" + std::string(f[6]) + "'");
            if (r.fwhm_status == FwhmStatus::Ok)
                r.l_fwhm_um = parse_number(f[5]);
            r.gamma_peak_halfwidth_fs = parse_number(f[7]);
        }
        r.max_lag_fs = parse_number(f[8]);
        r.wall_ms = parse_number(f[9]);
        rows.push_back(std::move(r));
    }
    return rows;
}

std::string metadata_json_text(const SweepConfig& config, const SweepResult& result)
{
    nlohmann::ordered_json doc;
    doc["tool"] = "cohsim";
    doc["version"] = kVersion;
    doc["grid"] = grid_json(config.grid);

    nlohmann::ordered_json models = nlohmann::ordered_json::object();
    if (config.m1) {
        const auto& p = *config.m1;
        models["M1"] = {{"mean_period_fs", p.mean_period_fs},   {"sigma_period_fs", p.sigma_period_fs},
                        {"mean_amplitude", p.mean_amplitude},   {"sigma_amplitude", p.sigma_amplitude},
                        {"jump_rate", p.jump_rate}};
    }
    if (config.m2) {
        const auto& p = *config.m2;
        models["M2"] = {{"mean_period_fs", p.mean_period_fs},
                        {"sigma_period_fs", p.sigma_period_fs},
                        {"mean_amplitude", p.mean_amplitude},
                        {"sigma_amplitude", p.sigma_amplitude},
                        {"mean_pulse_length_periods", p.mean_pulse_length_periods},
                        {"sigma_pulse_length_periods", p.sigma_pulse_length_periods},
                        {"emission_rate", p.emission_rate}};
    }
    doc["models"] = models;
    doc["sweep"] = {{"emitter_counts", config.emitter_counts},
                    {"replicates", config.replicates},
                    {"master_seed", config.master_seed},
                    {"max_lag_steps", config.max_lag_steps},
                    {"max_lag_fs", static_cast<double>(config.max_lag_steps) * config.grid.dt_fs},
                    {"record_timing", config.record_timing}};
    doc["conventions"] = {
        {"pulse_damping", "C_i = L_i * mean_period_fs / 2 (envelope exp(-[(t - t_i)/C_i]^2))"},
        {"pulse_truncation", "envelope evaluated where >= 1e-8 of peak; clipped at record edges"},
        {"phase_law", "uniform on [0, 2pi)"},
        {"event_process", "Bernoulli(rate) per time step, sampled via geometric gaps"},
        {"positive_normal", "Normal(mean, sigma) resampled until > 0"},
        {"rng", "xoshiro256** per emitter; key = mix64(seed ^ mix64(index + 0x632BE59BD9B4E019))"},
        {"replicate_seed", "SplitMix64 hash chain of (master_seed, model, n_emitters, replicate)"},
        {"gamma_estimator", "mean removed; lag-k products / (N - k); normalized by <E E> over N"},
        {"l_pew", "c * trapezoid(|gamma|^2) over [-max_lag, max_lag], c = 0.299792458 um/fs"},
        {"l_fwhm", "c * FWHM of the analytic-signal envelope of gamma; >= 3 crossings per side = MULTI_CROSSING"},
        {"speed_of_light_um_per_fs", kSpeedOfLightUmPerFs}};

    nlohmann::ordered_json failures = nlohmann::ordered_json::array();
    for (const auto& r : result.rows)
        if (r.failed())
            failures.push_back({{"model", to_string(r.model)},
                                {"n_emitters", r.n_emitters},
                                {"replicate", r.replicate},
                                {"error", r.error}});
    doc["failures"] = failures;
    doc["row_count"] = result.rows.size();
    return doc.dump(2) + "\n";
}

void write_results(const SweepResult& result, const SweepConfig& config, const SweepPaths& paths)
{
    write_text_file(paths.rows_csv, rows_csv_text(result.rows));
    write_text_file(paths.aggregate_csv, aggregate_csv_text(result.aggregates));
    write_text_file(paths.metadata_json, metadata_json_text(config, result));
}

}  // namespace cohsim
