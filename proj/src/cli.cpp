#include "cohsim/cli.hpp"

#include "cohsim/coherence.hpp"
#include "cohsim/experiment.hpp"
#include "cohsim/text_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <sstream>

namespace cohsim::cli {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string_view choice_name(ModelChoice m)
{
    switch (m) {
    case ModelChoice::M1:
        return "m1";
    case ModelChoice::M2:
        return "m2";
    case ModelChoice::Both:
        return "both";
    }
    return "both";
}

std::optional<ModelChoice> parse_choice(std::string_view s)
{
    if (s == "m1")
        return ModelChoice::M1;
    if (s == "m2")
        return ModelChoice::M2;
    if (s == "both")
        return ModelChoice::Both;
    return std::nullopt;
}

// Reads `key` from `obj` into `target` when present, recording type errors.
template <typename T>
void read_field(const nlohmann::json& obj, const std::string& path, const char* key, T& target,
                std::vector<std::string>& problems)
{
    const auto it = obj.find(key);
    if (it == obj.end())
        return;
    try {
        if constexpr (std::is_floating_point_v<T>) {
            if (!it->is_number())
                throw std::invalid_argument("expected a number");
        } else if constexpr (std::is_same_v<T, bool>) {
            if (!it->is_boolean())
                throw std::invalid_argument("expected true/false");
        } else if constexpr (std::is_integral_v<T>) {
            if (!it->is_number_integer())
                throw std::invalid_argument("expected an integer");
        }
        target = it->get<T>();
    } catch (const std::exception& e) {
        problems.push_back(path + key + ": " + e.what());
    }
}

void check_keys(const nlohmann::json& obj, const std::string& path, std::initializer_list<std::string_view> allowed,
                std::vector<std::string>& problems)
{
    for (const auto& item : obj.items())
        if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
            problems.push_back("unknown config key '" + path + item.key() + "'");
}

bool expect_object(const nlohmann::json& doc, const char* key, std::vector<std::string>& problems)
{
    const auto it = doc.find(key);
    if (it == doc.end())
        return false;
    if (!it->is_object()) {
        problems.push_back(std::string(key) + ": expected an object");
        return false;
    }
    return true;
}

ordered_json m1_json(const M1Params& p)
{
    return {{"mean_period_fs", p.mean_period_fs},
            {"sigma_period_fs", p.sigma_period_fs},
            {"mean_amplitude", p.mean_amplitude},
            {"sigma_amplitude", p.sigma_amplitude},
            {"jump_rate", p.jump_rate}};
}

ordered_json m2_json(const M2Params& p)
{
    return {{"mean_period_fs", p.mean_period_fs},
            {"sigma_period_fs", p.sigma_period_fs},
            {"mean_amplitude", p.mean_amplitude},
            {"sigma_amplitude", p.sigma_amplitude},
            {"mean_pulse_length_periods", p.mean_pulse_length_periods},
            {"sigma_pulse_length_periods", p.sigma_pulse_length_periods},
            {"emission_rate", p.emission_rate}};
}

std::string file_stem(std::string_view kind, ModelTag tag, Index n)
{
    std::string stem(kind);
    stem += tag == ModelTag::M1 ? "_m1_n" : "_m2_n";
    stem += std::to_string(n);
    return stem;
}

std::string signal_metadata(const RunConfig& config, const FieldSignal& signal, std::string_view kind,
                            std::size_t rows, const ordered_json& extra = ordered_json::object())
{
    ordered_json doc;
    doc["tool"] = "cohsim";
    doc["version"] = kVersion;
    doc["output"] = kind;
    doc["model"] = to_string(signal.meta.model);
    doc["n_emitters"] = signal.meta.n_emitters;
    doc["master_seed"] = signal.meta.master_seed;
    doc["rows"] = rows;
    doc["config"] = ordered_json::parse(config_echo_json(config));
    doc["conventions"] = {{"pulse_damping", "C_i = L_i * mean_period_fs / 2"},
                          {"rng", "xoshiro256** per emitter; key = mix64(seed ^ mix64(index + 0x632BE59BD9B4E019))"}};
    for (const auto& item : extra.items())
        doc[item.key()] = item.value();
    return doc.dump(2) + "\n";
}

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    bool quick = false;
    std::optional<Index> decimate;
    std::optional<std::string> model;
    std::optional<Index> emitters;
    std::optional<double> max_lag_fs;
    std::optional<Index> samples;
    std::optional<double> dt_fs;
    std::optional<double> jump_rate;
    std::optional<double> emission_rate;
    std::optional<int> replicates;
    std::vector<Index> counts;
    std::optional<unsigned> threads;
    bool timing = false;
    bool raw_fwhm = false;
    bool parseval = false;
    std::string config_path;
};

void add_common(CLI::App* sub, Overrides& o)
{
    sub->add_option("--config", o.config_path, "JSON config file (flags override it)");
    sub->add_option("--seed", o.seed, "Master seed (unsigned 64-bit)");
    sub->add_option("--out", o.out, "Output directory");
    sub->add_flag("--quick", o.quick, "Desk-scale sweep grid (n <= 10^4)");
    sub->add_option("--decimate", o.decimate, "Write every K-th row");
    sub->add_option("--model", o.model, "m1, m2 or both");
    sub->add_option("--emitters", o.emitters, "Number of emitters n");
    sub->add_option("--max-lag-fs", o.max_lag_fs, "Largest correlation lag in fs");
    sub->add_option("--samples", o.samples, "Samples in the record");
    sub->add_option("--dt-fs", o.dt_fs, "Time step in fs");
    sub->add_option("--jump-rate", o.jump_rate, "M1 phase jumps per step");
    sub->add_option("--emission-rate", o.emission_rate, "M2 pulses per step");
    sub->add_option("--replicates", o.replicates, "Replicates per sweep cell");
    sub->add_option("--counts", o.counts, "Sweep emitter counts")->delimiter(',');
    sub->add_option("--threads", o.threads, "Worker threads for the sweep (0 = all cores)");
    sub->add_flag("--timing", o.timing, "Record wall_ms per sweep row (output no longer reproducible)");
    sub->add_flag("--raw-fwhm", o.raw_fwhm, "FWHM of raw gamma instead of its envelope");
    sub->add_flag("--parseval", o.parseval, "Print the Parseval variance check");
}

void apply_overrides(const Overrides& o, RunConfig& c, std::vector<std::string>& problems)
{
    if (o.seed)
        c.seed = *o.seed;
    if (o.out)
        c.out_dir = *o.out;
    if (o.quick)
        c.quick = true;
    if (o.decimate)
        c.decimate = *o.decimate;
    if (o.model) {
        if (auto m = parse_choice(*o.model))
            c.model = *m;
        else
            problems.push_back("--model must be one of m1, m2, both");
    }
    if (o.emitters)
        c.emitters = *o.emitters;
    if (o.max_lag_fs)
        c.max_lag_fs = *o.max_lag_fs;
    if (o.samples)
        c.grid.n_samples = *o.samples;
    if (o.dt_fs)
        c.grid.dt_fs = *o.dt_fs;
    if (o.jump_rate)
        c.m1.jump_rate = *o.jump_rate;
    if (o.emission_rate)
        c.m2.emission_rate = *o.emission_rate;
    if (o.replicates)
        c.replicates = *o.replicates;
    if (!o.counts.empty())
        c.emitter_counts = o.counts;
    if (o.threads)
        c.threads = *o.threads;
    if (o.timing)
        c.record_timing = true;
    if (o.raw_fwhm)
        c.raw_fwhm = true;
    if (o.parseval)
        c.parseval = true;
}

std::vector<FieldSignal> build_signals(const RunConfig& config)
{
    std::vector<FieldSignal> signals;
    for (const auto& model : config.models())
        signals.push_back(generate_superposition(model, config.emitters, config.grid, config.seed));
    return signals;
}

int cmd_simulate(const RunConfig& config, std::ostream& out)
{
    for (const auto& signal : build_signals(config)) {
        std::string csv = "t_fs,field\n";
        std::size_t rows = 0;
        for (Index k = 0; k < signal.samples.size(); k += config.decimate) {
            csv += format_number(signal.grid.time_fs(k));
            csv += ',';
            csv += format_number(signal.samples[k]);
            csv += '\n';
            ++rows;
        }
        const auto stem = file_stem("signal", signal.meta.model, signal.meta.n_emitters);
        write_text_file(config.out_dir / (stem + ".csv"), csv);
        write_text_file(config.out_dir / (stem + ".json"), signal_metadata(config, signal, "signal", rows));
        out << to_string(signal.meta.model) << " n=" << signal.meta.n_emitters << ": " << rows << " rows -> "
            << (config.out_dir / (stem + ".csv")).string() << "\n";
    }
    return 0;
}

int cmd_gamma(const RunConfig& config, std::ostream& out)
{
    const auto source = config.raw_fwhm ? FwhmSource::RawGamma : FwhmSource::Envelope;
    for (const auto& signal : build_signals(config)) {
        const auto gamma = autocorrelation_spectral(signal, config.max_lag_steps());
        const auto envelope = envelope_magnitude(gamma);
        const auto lengths = coherence_lengths(gamma, source);

        std::string csv = "lag_fs,gamma,envelope\n";
        std::size_t rows = 0;
        const Index L = gamma.max_lag_steps;
        for (Index i = 0; i < gamma.gamma.size(); i += config.decimate) {
            csv += format_number(static_cast<double>(i - L) * gamma.dt_fs);
            csv += ',' + format_number(gamma.gamma[i]);
            csv += ',' + format_number(envelope[i]);
            csv += '\n';
            ++rows;
        }
        const auto stem = file_stem("gamma", signal.meta.model, signal.meta.n_emitters);
        const std::string fwhm_text =
            lengths.fwhm.ok() ? format_number(lengths.fwhm.length_um) : std::string("ILL_DEFINED");
        ordered_json extra = {{"l_pew_um", lengths.l_pew_um},
                              {"max_lag_fs", lengths.max_lag_fs},
                              {"l_fwhm_um", fwhm_text},
                              {"fwhm_status", to_string(lengths.fwhm.status)},
                              {"fwhm_source", config.raw_fwhm ? "raw_gamma" : "envelope"}};
        write_text_file(config.out_dir / (stem + ".csv"), csv);
        write_text_file(config.out_dir / (stem + ".json"), signal_metadata(config, signal, "gamma", rows, extra));

        out << to_string(signal.meta.model) << " n=" << signal.meta.n_emitters
            << ": l_pew_um=" << format_number(lengths.l_pew_um) << " (|lag| <= "
            << format_number(lengths.max_lag_fs) << " fs) l_fwhm_um=" << fwhm_text
            << " fwhm_status=" << to_string(lengths.fwhm.status) << "\n";
    }
    return 0;
}

int cmd_psd(const RunConfig& config, std::ostream& out)
{
    for (const auto& signal : build_signals(config)) {
        const auto spectrum = power_spectral_density(signal);
        std::string csv = "freq_cyc_per_fs,power\n";
        std::size_t rows = 0;
        for (Index k = 0; k < spectrum.power.size(); k += config.decimate) {
            csv += format_number(spectrum.frequency[k]);
            csv += ',' + format_number(spectrum.power[k]);
            csv += '\n';
            ++rows;
        }
        const VectorXd centered = signal.samples.array() - signal.samples.mean();
        const double variance = centered.squaredNorm() / static_cast<double>(centered.size());
        const double total = spectrum_total_power(spectrum);
        const double rel = std::abs(total - variance) / variance;

        Index peak = 0;
        spectrum.power.maxCoeff(&peak);
        const auto stem = file_stem("psd", signal.meta.model, signal.meta.n_emitters);
        ordered_json extra = {{"convention", spectrum.convention},
                              {"df_cyc_per_fs", spectrum.df},
                              {"peak_freq_cyc_per_fs", spectrum.frequency[peak]}};
        write_text_file(config.out_dir / (stem + ".csv"), csv);
        write_text_file(config.out_dir / (stem + ".json"), signal_metadata(config, signal, "psd", rows, extra));

        out << to_string(signal.meta.model) << " n=" << signal.meta.n_emitters
            << ": peak at " << format_number(spectrum.frequency[peak]) << " cyc/fs\n";
        if (config.parseval)
            out << "parseval: variance=" << format_number(variance) << " spectrum_total=" << format_number(total)
                << " rel_error=" << format_number(rel) << (rel < 1e-9 ? " OK" : " FAIL") << "\n";
    }
    return 0;
}

int cmd_sweep(const RunConfig& config, std::ostream& out)
{
    const auto sweep = to_sweep_config(config);
    const auto result = run_sweep(sweep);
    const auto paths = SweepPaths::in_directory(config.out_dir);
    write_results(result, sweep, paths);

    out << "model n_emitters replicates l_pew_mean_um l_pew_sd_um fwhm_ill_defined\n";
    for (const auto& a : result.aggregates)
        out << to_string(a.model) << ' ' << a.n_emitters << ' ' << a.replicates << ' '
            << format_number(a.l_pew_mean_um) << ' ' << format_number(a.l_pew_sd_um) << ' '
            << a.fwhm_ill_defined_count << "\n";
    std::size_t failures = 0;
    for (const auto& r : result.rows)
        failures += r.failed() ? 1 : 0;
    if (failures > 0)
        out << failures << " point(s) failed; see " << paths.metadata_json.string() << "\n";
    out << "wrote " << paths.rows_csv.string() << ", " << paths.aggregate_csv.string() << ", "
        << paths.metadata_json.string() << "\n";
    return 0;
}

}  // namespace

Index RunConfig::max_lag_steps() const
{
    return static_cast<Index>(std::llround(max_lag_fs / grid.dt_fs));
}

std::vector<EmissionModel> RunConfig::models() const
{
    std::vector<EmissionModel> out;
    if (model != ModelChoice::M2)
        out.emplace_back(m1);
    if (model != ModelChoice::M1)
        out.emplace_back(m2);
    return out;
}

std::vector<std::string> RunConfig::violations(bool check_lag_window) const
{
    auto out = grid.violations();
    if (model != ModelChoice::M2)
        for (auto& v : m1.violations())
            out.push_back(std::move(v));
    if (model != ModelChoice::M1)
        for (auto& v : m2.violations())
            out.push_back(std::move(v));
    if (emitters < 1)
        out.emplace_back("emitters must be >= 1");
    if (decimate < 1)
        out.emplace_back("decimate must be >= 1");
    if (!(max_lag_fs > 0.0) || !std::isfinite(max_lag_fs))
        out.emplace_back("max_lag_fs must be finite and > 0");
    else if (check_lag_window && grid.dt_fs > 0.0 && (max_lag_steps() < 1 || 2 * max_lag_steps() >= grid.n_samples))
        out.emplace_back("max_lag_fs must span at least one step and less than half the record");
    if (replicates < 1)
        out.emplace_back("sweep.replicates must be >= 1");
    if (emitter_counts.empty())
        out.emplace_back("sweep.emitter_counts must not be empty");
    for (std::size_t i = 0; i < emitter_counts.size(); ++i) {
        if (emitter_counts[i] < 1)
            out.emplace_back("sweep.emitter_counts must be positive");
        if (i > 0 && emitter_counts[i] <= emitter_counts[i - 1])
            out.emplace_back("sweep.emitter_counts must be strictly increasing");
    }
    return out;
}

void apply_config_json(const std::string& text, RunConfig& c, std::vector<std::string>& problems)
{
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        problems.push_back(std::string("config is not valid JSON: ") + e.what());
        return;
    }
    if (!doc.is_object()) {
        problems.emplace_back("config must be a JSON object");
        return;
    }
    check_keys(doc, "",
               {"grid", "m1", "m2", "model", "emitters", "seed", "decimate", "max_lag_fs", "sweep", "out"}, problems);

    if (expect_object(doc, "grid", problems)) {
        const auto& g = doc["grid"];
        check_keys(g, "grid.", {"dt_fs", "n_samples", "t0_fs"}, problems);
        read_field(g, "grid.", "dt_fs", c.grid.dt_fs, problems);
        read_field(g, "grid.", "n_samples", c.grid.n_samples, problems);
        read_field(g, "grid.", "t0_fs", c.grid.t0_fs, problems);
    }
    if (expect_object(doc, "m1", problems)) {
        const auto& m = doc["m1"];
        check_keys(m, "m1.", {"mean_period_fs", "sigma_period_fs", "mean_amplitude", "sigma_amplitude", "jump_rate"},
                   problems);
        read_field(m, "m1.", "mean_period_fs", c.m1.mean_period_fs, problems);
        read_field(m, "m1.", "sigma_period_fs", c.m1.sigma_period_fs, problems);
        read_field(m, "m1.", "mean_amplitude", c.m1.mean_amplitude, problems);
        read_field(m, "m1.", "sigma_amplitude", c.m1.sigma_amplitude, problems);
        read_field(m, "m1.", "jump_rate", c.m1.jump_rate, problems);
    }
    if (expect_object(doc, "m2", problems)) {
        const auto& m = doc["m2"];
        check_keys(m, "m2.",
                   {"mean_period_fs", "sigma_period_fs", "mean_amplitude", "sigma_amplitude",
                    "mean_pulse_length_periods", "sigma_pulse_length_periods", "emission_rate"},
                   problems);
        read_field(m, "m2.", "mean_period_fs", c.m2.mean_period_fs, problems);
        read_field(m, "m2.", "sigma_period_fs", c.m2.sigma_period_fs, problems);
        read_field(m, "m2.", "mean_amplitude", c.m2.mean_amplitude, problems);
        read_field(m, "m2.", "sigma_amplitude", c.m2.sigma_amplitude, problems);
        read_field(m, "m2.", "mean_pulse_length_periods", c.m2.mean_pulse_length_periods, problems);
        read_field(m, "m2.", "sigma_pulse_length_periods", c.m2.sigma_pulse_length_periods, problems);
        read_field(m, "m2.", "emission_rate", c.m2.emission_rate, problems);
    }
    if (const auto it = doc.find("model"); it != doc.end()) {
        const auto choice = it->is_string() ? parse_choice(it->get<std::string>()) : std::nullopt;
        if (choice)
            c.model = *choice;
        else
            problems.emplace_back("model: expected \"m1\", \"m2\" or \"both\"");
    }
    read_field(doc, "", "emitters", c.emitters, problems);
    read_field(doc, "", "seed", c.seed, problems);
    read_field(doc, "", "decimate", c.decimate, problems);
    read_field(doc, "", "max_lag_fs", c.max_lag_fs, problems);
    if (const auto it = doc.find("out"); it != doc.end()) {
        if (it->is_string())
            c.out_dir = it->get<std::string>();
        else
            problems.emplace_back("out: expected a string");
    }
    if (expect_object(doc, "sweep", problems)) {
        const auto& s = doc["sweep"];
        check_keys(s, "sweep.", {"emitter_counts", "replicates", "threads", "record_timing", "quick"}, problems);
        if (const auto it = s.find("emitter_counts"); it != s.end()) {
            if (it->is_array() && std::all_of(it->begin(), it->end(), [](const auto& v) { return v.is_number_integer(); }))
                c.emitter_counts = it->get<std::vector<Index>>();
            else
                problems.emplace_back("sweep.emitter_counts: expected an array of integers");
        }
        read_field(s, "sweep.", "replicates", c.replicates, problems);
        read_field(s, "sweep.", "threads", c.threads, problems);
        read_field(s, "sweep.", "record_timing", c.record_timing, problems);
        read_field(s, "sweep.", "quick", c.quick, problems);
    }
}

SweepConfig to_sweep_config(const RunConfig& c)
{
    SweepConfig s;
    s.m1 = c.model != ModelChoice::M2 ? std::optional(c.m1) : std::nullopt;
    s.m2 = c.model != ModelChoice::M1 ? std::optional(c.m2) : std::nullopt;
    s.grid = c.grid;
    s.emitter_counts = c.emitter_counts;
    s.replicates = c.replicates;
    if (c.quick) {
        std::erase_if(s.emitter_counts, [](Index n) { return n > kQuickMaxEmitters; });
        s.replicates = std::min(s.replicates, kQuickMaxReplicates);
    }
    s.master_seed = c.seed;
    s.max_lag_steps = c.max_lag_steps();
    s.threads = c.threads;
    s.record_timing = c.record_timing;
    return s;
}

std::string config_echo_json(const RunConfig& c)
{
    ordered_json doc;
    doc["grid"] = {{"dt_fs", c.grid.dt_fs}, {"n_samples", c.grid.n_samples}, {"t0_fs", c.grid.t0_fs}};
    doc["m1"] = m1_json(c.m1);
    doc["m2"] = m2_json(c.m2);
    doc["model"] = choice_name(c.model);
    doc["emitters"] = c.emitters;
    doc["seed"] = c.seed;
    doc["decimate"] = c.decimate;
    doc["max_lag_fs"] = c.max_lag_fs;
    doc["sweep"] = {{"emitter_counts", c.emitter_counts},
                    {"replicates", c.replicates},
                    {"record_timing", c.record_timing},
                    {"quick", c.quick}};
    return doc.dump(2);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Stochastic optical field simulator and temporal coherence analyzer", "cohsim"};
    app.require_subcommand(1);
    Overrides overrides;
    auto* simulate = app.add_subcommand("simulate", "Write the superposed field as t_fs,field CSV");
    auto* gamma = app.add_subcommand("gamma", "Write gamma and its envelope; print both coherence lengths");
    auto* psd = app.add_subcommand("psd", "Write the one-sided periodogram");
    auto* sweep = app.add_subcommand("sweep", "Coherence length versus emitter count");
    for (auto* sub : {simulate, gamma, psd, sweep})
        add_common(sub, overrides);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    RunConfig config;
    std::vector<std::string> problems;
    if (!overrides.config_path.empty()) {
        try {
            apply_config_json(read_text_file(overrides.config_path), config, problems);
        } catch (const std::exception& e) {
            problems.push_back(e.what());
        }
    }
    apply_overrides(overrides, config, problems);
    for (auto& v : config.violations(!*simulate && !*psd))
        problems.push_back(std::move(v));
    if (!problems.empty()) {
        err << "cohsim: invalid configuration:\n";
        for (const auto& p : problems)
            err << "  - " << p << "\n";
        return 2;
    }

    try {
        if (*simulate)
            return cmd_simulate(config, out);
        if (*gamma)
            return cmd_gamma(config, out);
        if (*psd)
            return cmd_psd(config, out);
        return cmd_sweep(config, out);
    } catch (const std::exception& e) {
        err << "cohsim: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace cohsim::cli
