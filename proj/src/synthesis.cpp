#include "cohsim/synthesis.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace cohsim {

void throw_if_violations(const std::vector<std::string>& violations)
{
    if (violations.empty())
        return;
    std::string message;
    for (const auto& v : violations) {
        if (!message.empty())
            message += "; ";
        message += v;
    }
    throw std::invalid_argument(message);
}

namespace {

// Samples rendered per exact phase/envelope anchor.
constexpr Index kBlock = 256;
// Table entries between exact trig evaluations.
constexpr Index kTableAnchor = 16;

struct CarrierTable {
    std::array<double, kBlock> cos_j;
    std::array<double, kBlock> sin_j;
};

// cos/sin(j * w dt) for j < kBlock, exact every kTableAnchor entries and
// rotated forward in between.
void fill_carrier_table(double w_dt, CarrierTable& table)
{
    const double rc = std::cos(w_dt);
    const double rs = std::sin(w_dt);
    for (Index j = 0; j < kBlock; ++j) {
        if (j % kTableAnchor == 0) {
            const double angle = static_cast<double>(j) * w_dt;
            table.cos_j[j] = std::cos(angle);
            table.sin_j[j] = std::sin(angle);
        } else {
            const double c = table.cos_j[j - 1];
            const double s = table.sin_j[j - 1];
            table.cos_j[j] = c * rc - s * rs;
            table.sin_j[j] = s * rc + c * rs;
        }
    }
}

void check_rate(double rate, const char* what, std::vector<std::string>& out)
{
    if (!(rate >= 0.0 && rate < 1.0))
        out.emplace_back(std::string(what) + " must lie in [0, 1)");
}

void check_positive(double v, const char* what, std::vector<std::string>& out)
{
    if (!(v > 0.0) || !std::isfinite(v))
        out.emplace_back(std::string(what) + " must be finite and > 0");
}

void check_nonnegative(double v, const char* what, std::vector<std::string>& out)
{
    if (!(v >= 0.0) || !std::isfinite(v))
        out.emplace_back(std::string(what) + " must be finite and >= 0");
}

}  // namespace

std::vector<std::string> M1Params::violations() const
{
    std::vector<std::string> out;
    check_positive(mean_period_fs, "m1.mean_period_fs", out);
    check_nonnegative(sigma_period_fs, "m1.sigma_period_fs", out);
    check_positive(mean_amplitude, "m1.mean_amplitude", out);
    check_nonnegative(sigma_amplitude, "m1.sigma_amplitude", out);
    check_rate(jump_rate, "m1.jump_rate", out);
    return out;
}

std::vector<std::string> M2Params::violations() const
{
    std::vector<std::string> out;
    check_positive(mean_period_fs, "m2.mean_period_fs", out);
    check_nonnegative(sigma_period_fs, "m2.sigma_period_fs", out);
    check_positive(mean_amplitude, "m2.mean_amplitude", out);
    check_nonnegative(sigma_amplitude, "m2.sigma_amplitude", out);
    check_positive(mean_pulse_length_periods, "m2.mean_pulse_length_periods", out);
    check_nonnegative(sigma_pulse_length_periods, "m2.sigma_pulse_length_periods", out);
    check_rate(emission_rate, "m2.emission_rate", out);
    return out;
}

std::string_view to_string(ModelTag tag)
{
    return tag == ModelTag::M1 ? "M1" : "M2";
}

ModelTag model_tag(const EmissionModel& model)
{
    return std::holds_alternative<M1Params>(model) ? ModelTag::M1 : ModelTag::M2;
}

std::vector<Index> sample_event_steps(double rate_per_step, Index n_samples, RandomStream& rng)
{
    if (!(rate_per_step >= 0.0 && rate_per_step < 1.0))
        throw std::invalid_argument("sample_event_steps: rate must lie in [0, 1)");
    std::vector<Index> steps;
    if (rate_per_step == 0.0 || n_samples <= 0)
        return steps;

    // Gap between successes of per-step Bernoulli(p) trials is Geometric(p):
    // P(gap >= g) = (1 - p)^g.
    const double log_q = std::log1p(-rate_per_step);
    const double limit = static_cast<double>(n_samples);
    double k = -1.0;
    for (;;) {
        const double gap = std::floor(std::log(rng.uniform_open_zero()) / log_q);
        const double next = k + gap + 1.0;
        if (next >= limit)
            break;
        k = next;
        steps.push_back(static_cast<Index>(k));
    }
    return steps;
}

double sample_positive_normal(double mean, double sigma, RandomStream& rng)
{
    if (!(mean > 0.0) || !(sigma >= 0.0))
        throw std::invalid_argument("sample_positive_normal: requires mean > 0 and sigma >= 0");
    if (sigma == 0.0)
        return mean;
    for (int attempt = 0; attempt < kMaxPositiveNormalRejections; ++attempt) {
        const double x = mean + sigma * rng.normal();
        if (x > 0.0)
            return x;
    }
    throw std::runtime_error("sample_positive_normal: rejection bound exceeded");
}

PhaseJumpEmitter realize_m1(const M1Params& params, const SimulationGrid& grid, RandomStream& rng)
{
    PhaseJumpEmitter emitter;
    emitter.amplitude = sample_positive_normal(params.mean_amplitude, params.sigma_amplitude, rng);
    emitter.period_fs = sample_positive_normal(params.mean_period_fs, params.sigma_period_fs, rng);
    emitter.segments.push_back({0, kTwoPi * rng.uniform()});

    const auto jumps = sample_event_steps(params.jump_rate, grid.n_samples, rng);
    emitter.segments.reserve(jumps.size() + 1);
    for (Index step : jumps)
        emitter.segments.push_back({step, kTwoPi * rng.uniform()});
    return emitter;
}

std::vector<GaussianPulse> realize_m2(const M2Params& params, const SimulationGrid& grid, RandomStream& rng)
{
    const auto centers = sample_event_steps(params.emission_rate, grid.n_samples, rng);
    std::vector<GaussianPulse> pulses;
    pulses.reserve(centers.size());
    for (Index c : centers) {
        GaussianPulse p;
        p.center_step = c;
        p.amplitude = sample_positive_normal(params.mean_amplitude, params.sigma_amplitude, rng);
        p.period_fs = sample_positive_normal(params.mean_period_fs, params.sigma_period_fs, rng);
        const double length = sample_positive_normal(params.mean_pulse_length_periods,
                                                     params.sigma_pulse_length_periods, rng);
        p.damping_fs = params.damping_fs(length);
        p.phase = kTwoPi * rng.uniform();
        pulses.push_back(p);
    }
    return pulses;
}

namespace {

// Values are anchored at absolute block starts (multiples of kBlock, or a
// segment start), so any sub-range renders bit-identically to a full pass.

// Renders emitter samples for steps [begin, end) into out[0 .. end - begin).
void render_emitter(const PhaseJumpEmitter& emitter, const SimulationGrid& grid, Index begin, Index end,
                    double* out)
{
    const double w = emitter.angular_frequency();
    const double a = emitter.amplitude;
    CarrierTable table;
    fill_carrier_table(w * grid.dt_fs, table);

    const auto& segs = emitter.segments;
    // First segment that can reach `begin`.
    auto it = std::upper_bound(segs.begin(), segs.end(), begin,
                               [](Index value, const PhaseSegment& seg) { return value < seg.begin; });
    std::size_t s = it == segs.begin() ? 0 : static_cast<std::size_t>(it - segs.begin()) - 1;
    for (; s < segs.size() && segs[s].begin < end; ++s) {
        const Index seg_begin = segs[s].begin;
        const Index seg_end = s + 1 < segs.size() ? segs[s + 1].begin : grid.n_samples;
        const Index lo = std::max(seg_begin, begin);
        const Index hi = std::min(seg_end, end);
        const double phase = segs[s].phase;
        for (Index k = lo; k < hi;) {
            const Index anchor = std::max(seg_begin, k - k % kBlock);
            const Index stop = std::min(hi, (k / kBlock + 1) * kBlock);
            const double theta = w * grid.time_fs(anchor) + phase;
            const double sb = a * std::sin(theta);
            const double cb = a * std::cos(theta);
            const double* cj = table.cos_j.data() - anchor;
            const double* sj = table.sin_j.data() - anchor;
            double* dst = out - begin;
            for (Index i = k; i < stop; ++i)
                dst[i] += sb * cj[i] + cb * sj[i];
            k = stop;
        }
    }
}

struct PulseWindow {
    Index lo = 0;
    Index hi = 0;
};

PulseWindow pulse_window(const GaussianPulse& pulse, const SimulationGrid& grid)
{
    const Index half = pulse_half_window_steps(pulse.damping_fs, grid.dt_fs);
    return {std::max<Index>(0, pulse.center_step - half), std::min<Index>(grid.n_samples, pulse.center_step + half + 1)};
}

// Samples per exact anchor of the pulse recurrence, and interleaved lanes.
constexpr Index kPulseBlock = 512;
constexpr int kLanes = 8;
using Lanes = Eigen::Array<double, kLanes, 1>;

// Renders the part of the pulse inside [begin, end) into out[0 .. end - begin).
//
// A pulse is Im z_k with z_k = A exp(-u_k^2) exp(i(w t_k + phi)), u_k the
// scaled offset from the centre. Lane l holds z_{l + mL} (L = kLanes) and
// advances by z_{k+L} = z_k S_k, S_{k+L} = S_k Q with Q = exp(-2 L^2 delta^2)
// real. Every block restarts from exactly evaluated lane values.
void render_pulse(const GaussianPulse& pulse, const SimulationGrid& grid, Index begin, Index end, double* out)
{
    const auto window = pulse_window(pulse, grid);
    const Index lo = std::max(window.lo, begin);
    const Index hi = std::min(window.hi, end);
    if (lo >= hi)
        return;

    constexpr double L = kLanes;
    const double w = kTwoPi / pulse.period_fs;
    const double w_dt = w * grid.dt_fs;
    const double delta = grid.dt_fs / pulse.damping_fs;
    const double d2 = delta * delta;
    const double q = std::exp(-2.0 * L * L * d2);
    const double e2 = std::exp(-2.0 * d2);
    const double stride_c = std::cos(L * w_dt);
    const double stride_s = std::sin(L * w_dt);
    Lanes lane_c, lane_s, lane_r;
    for (int l = 0; l < kLanes; ++l) {
        lane_c[l] = std::cos(l * w_dt);
        lane_s[l] = std::sin(l * w_dt);
        lane_r[l] = std::exp(-2.0 * L * d2 * l);
    }
    alignas(32) std::array<double, kPulseBlock> values;

    for (Index k = lo; k < hi;) {
        const Index anchor = k - k % kPulseBlock;
        const Index stop = std::min(hi, anchor + kPulseBlock);
        const double u0 = static_cast<double>(anchor - pulse.center_step) * delta;
        const double theta = w * grid.time_fs(anchor) + pulse.phase;
        const double ct = std::cos(theta);
        const double st = std::sin(theta);
        const double s0 = std::exp(-(2.0 * L * delta * u0 + L * L * d2));

        Lanes g;
        double gl = pulse.amplitude * std::exp(-u0 * u0);
        double rho = std::exp(-(2.0 * u0 * delta + d2));
        for (int l = 0; l < kLanes; ++l) {
            g[l] = gl;
            gl *= rho;
            rho *= e2;
        }
        Lanes zr = g * (ct * lane_c - st * lane_s);
        Lanes zi = g * (st * lane_c + ct * lane_s);
        Lanes sr = (s0 * lane_r) * stride_c;
        Lanes si = (s0 * lane_r) * stride_s;

        for (Index j = 0; j < kPulseBlock; j += kLanes) {
            Eigen::Map<Lanes>(values.data() + j) = zi;
            const Lanes nr = zr * sr - zi * si;
            zi = zr * si + zi * sr;
            zr = nr;
            sr *= q;
            si *= q;
        }
        double* dst = out - begin;
        for (Index i = k; i < stop; ++i)
            dst[i] += values[static_cast<std::size_t>(i - anchor)];
        k = stop;
    }
}

// Record tile (steps) and emitter chunk for the superposition loop.
constexpr Index kTile = 16'384;
constexpr Index kChunk = 1'024;

struct PulseTrain {
    std::vector<GaussianPulse> pulses;
    Index reach = 0;       // largest half window in steps
    std::size_t cursor = 0;  // first pulse that may still touch the current tile
};

}  // namespace

void add_emitter(const PhaseJumpEmitter& emitter, const SimulationGrid& grid, std::span<double> out)
{
    render_emitter(emitter, grid, 0, std::min<Index>(grid.n_samples, static_cast<Index>(out.size())), out.data());
}

Index pulse_half_window_steps(double damping_fs, double dt_fs)
{
    const double reach = damping_fs * std::sqrt(-std::log(kPulseEnvelopeCutoff));
    return static_cast<Index>(std::ceil(reach / dt_fs));
}

std::pair<Index, Index> add_pulse(const GaussianPulse& pulse, const SimulationGrid& grid, std::span<double> out)
{
    const Index n = std::min<Index>(grid.n_samples, static_cast<Index>(out.size()));
    render_pulse(pulse, grid, 0, n, out.data());
    const auto window = pulse_window(pulse, grid);
    return {std::min(window.lo, n), std::min(window.hi, n)};
}

FieldSignal generate_m1(const M1Params& params, const SimulationGrid& grid, RandomStream& rng)
{
    params.validate();
    grid.validate();
    FieldSignal signal{grid, VectorXd::Zero(grid.n_samples), {ModelTag::M1, 0, 1}};
    const auto emitter = realize_m1(params, grid, rng);
    add_emitter(emitter, grid, {signal.samples.data(), static_cast<std::size_t>(grid.n_samples)});
    return signal;
}

FieldSignal generate_m2(const M2Params& params, const SimulationGrid& grid, RandomStream& rng)
{
    params.validate();
    grid.validate();
    FieldSignal signal{grid, VectorXd::Zero(grid.n_samples), {ModelTag::M2, 0, 1}};
    std::span<double> out{signal.samples.data(), static_cast<std::size_t>(grid.n_samples)};
    for (const auto& pulse : realize_m2(params, grid, rng))
        add_pulse(pulse, grid, out);
    return signal;
}

FieldSignal generate_superposition_range(const EmissionModel& model, Index first_emitter, Index n_emitters,
                                         const SimulationGrid& grid, std::uint64_t master_seed)
{
    if (n_emitters < 1)
        throw std::invalid_argument("generate_superposition: n_emitters must be >= 1");
    if (first_emitter < 0)
        throw std::invalid_argument("generate_superposition: first emitter index must be >= 0");
    grid.validate();
    std::visit([](const auto& p) { p.validate(); }, model);

    FieldSignal signal{grid, VectorXd::Zero(grid.n_samples), {model_tag(model), master_seed, n_emitters}};
    const Index n = grid.n_samples;
    double* acc = signal.samples.data();
    auto stream = [&](Index i) { return derive_emitter_rng(master_seed, static_cast<std::uint64_t>(first_emitter + i)); };

    // Emitters are realized a chunk at a time, then the record is swept in
    // cache-sized tiles; inside a tile every emitter is added in ascending
    // index order, so each sample sees the same sequence of additions as a
    // one-emitter-at-a-time pass over the whole record.
    if (const auto* m1 = std::get_if<M1Params>(&model)) {
        std::vector<PhaseJumpEmitter> chunk;
        for (Index c0 = 0; c0 < n_emitters; c0 += kChunk) {
            chunk.clear();
            for (Index i = c0; i < std::min(n_emitters, c0 + kChunk); ++i) {
                auto rng = stream(i);
                chunk.push_back(realize_m1(*m1, grid, rng));
            }
            for (Index t0 = 0; t0 < n; t0 += kTile) {
                const Index t1 = std::min(n, t0 + kTile);
                for (const auto& emitter : chunk)
                    render_emitter(emitter, grid, t0, t1, acc + t0);
            }
        }
        return signal;
    }

    // A pulse train may overlap itself, so each emitter's tile is summed in
    // a primitive buffer first and then added to the accumulator.
    const auto& m2 = std::get<M2Params>(model);
    std::vector<PulseTrain> chunk;
    std::vector<double> primitive(static_cast<std::size_t>(kTile), 0.0);
    for (Index c0 = 0; c0 < n_emitters; c0 += kChunk) {
        chunk.clear();
        for (Index i = c0; i < std::min(n_emitters, c0 + kChunk); ++i) {
            auto rng = stream(i);
            PulseTrain train;
            train.pulses = realize_m2(m2, grid, rng);
            for (const auto& p : train.pulses)
                train.reach = std::max(train.reach, pulse_half_window_steps(p.damping_fs, grid.dt_fs));
            chunk.push_back(std::move(train));
        }
        for (Index t0 = 0; t0 < n; t0 += kTile) {
            const Index t1 = std::min(n, t0 + kTile);
            for (auto& train : chunk) {
                const auto& pulses = train.pulses;
                while (train.cursor < pulses.size() && pulses[train.cursor].center_step + train.reach < t0)
                    ++train.cursor;
                Index touched_lo = t1;
                Index touched_hi = t0;
                for (std::size_t p = train.cursor; p < pulses.size() && pulses[p].center_step - train.reach < t1; ++p) {
                    const auto window = pulse_window(pulses[p], grid);
                    const Index lo = std::max(window.lo, t0);
                    const Index hi = std::min(window.hi, t1);
                    if (lo >= hi)
                        continue;
                    render_pulse(pulses[p], grid, t0, t1, primitive.data());
                    touched_lo = std::min(touched_lo, lo);
                    touched_hi = std::max(touched_hi, hi);
                }
                for (Index k = touched_lo; k < touched_hi; ++k) {
                    acc[k] += primitive[static_cast<std::size_t>(k - t0)];
                    primitive[static_cast<std::size_t>(k - t0)] = 0.0;
                }
            }
        }
    }
    return signal;
}

}  // namespace cohsim
