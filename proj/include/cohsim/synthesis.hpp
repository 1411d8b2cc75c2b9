#pragma once

#include "cohsim/random.hpp"
#include "cohsim/types.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace cohsim {

/// Phase-jump emitter: a sine of fixed amplitude and period whose phase is
/// redrawn uniformly on [0, 2pi) at Poisson-distributed steps.
struct M1Params {
    double mean_period_fs = 2.0;
    double sigma_period_fs = 0.2;
    double mean_amplitude = 1.0;
    double sigma_amplitude = 0.1;
    double jump_rate = 1e-4;  // expected jumps per time step

    std::vector<std::string> violations() const;
    void validate() const { throw_if_violations(violations()); }
};

/// Pulse-train emitter: Gaussian-enveloped sine pulses centred at
/// Poisson-distributed steps, every pulse with its own amplitude, period,
/// length and phase.
struct M2Params {
    double mean_period_fs = 2.0;
    double sigma_period_fs = 0.2;
    double mean_amplitude = 1.0;
    double sigma_amplitude = 0.1;
    double mean_pulse_length_periods = 50.0;
    double sigma_pulse_length_periods = 5.0;
    double emission_rate = 1e-4;  // expected pulse centres per time step

    std::vector<std::string> violations() const;
    void validate() const { throw_if_violations(violations()); }

    /// Envelope parameter C for a pulse of `length_periods` mean periods:
    /// C = L * mean_period / 2, so exp(-[(t - t_i)/C]^2) falls to 1/e at
    /// half the pulse length from the centre.
    double damping_fs(double length_periods) const
    {
        return 0.5 * length_periods * mean_period_fs;
    }
};

using EmissionModel = std::variant<M1Params, M2Params>;

enum class ModelTag { M1, M2 };

std::string_view to_string(ModelTag tag);
ModelTag model_tag(const EmissionModel& model);

struct SignalMeta {
    ModelTag model = ModelTag::M1;
    std::uint64_t master_seed = 0;
    Index n_emitters = 1;
};

/// One real field component on a grid. Immutable once built.
struct FieldSignal {
    SimulationGrid grid;
    VectorXd samples;
    SignalMeta meta;
};

/// Envelope is evaluated only where it exceeds this fraction of its peak.
inline constexpr double kPulseEnvelopeCutoff = 1e-8;

/// Bernoulli(rate) trial on every step, realized by geometric gap sampling.
/// Returns strictly ascending indices in [0, n_samples).
std::vector<Index> sample_event_steps(double rate_per_step, Index n_samples, RandomStream& rng);

/// Normal(mean, sigma) conditioned on a positive result by resampling.
/// sigma == 0 returns mean exactly; throws after 10^6 rejections.
double sample_positive_normal(double mean, double sigma, RandomStream& rng);

inline constexpr int kMaxPositiveNormalRejections = 1'000'000;

struct PhaseSegment {
    Index begin = 0;  // first step carrying `phase`
    double phase = 0.0;
};

/// A realized M1 emitter. Segment i covers [segments[i].begin, segments[i+1].begin).
struct PhaseJumpEmitter {
    double amplitude = 1.0;
    double period_fs = 2.0;
    std::vector<PhaseSegment> segments;

    double angular_frequency() const { return kTwoPi / period_fs; }
};

struct GaussianPulse {
    Index center_step = 0;
    double amplitude = 1.0;
    double period_fs = 2.0;
    double damping_fs = 50.0;
    double phase = 0.0;
};

/// Draw order: amplitude, period, initial phase, jump steps, one phase per jump.
PhaseJumpEmitter realize_m1(const M1Params& params, const SimulationGrid& grid, RandomStream& rng);

/// Draw order: centre steps, then per pulse amplitude, period, length, phase.
std::vector<GaussianPulse> realize_m2(const M2Params& params, const SimulationGrid& grid, RandomStream& rng);

/// out[k] += A sin(w t_k + phi(t_k)).
void add_emitter(const PhaseJumpEmitter& emitter, const SimulationGrid& grid, std::span<double> out);

/// Adds one pulse inside its truncation window (clipped to the record).
/// Returns the half-open step window that was touched.
std::pair<Index, Index> add_pulse(const GaussianPulse& pulse, const SimulationGrid& grid, std::span<double> out);

/// Half-width in steps of the window where the envelope exceeds the cutoff.
Index pulse_half_window_steps(double damping_fs, double dt_fs);

FieldSignal generate_m1(const M1Params& params, const SimulationGrid& grid, RandomStream& rng);
FieldSignal generate_m2(const M2Params& params, const SimulationGrid& grid, RandomStream& rng);

/// Sum of emitters [first_emitter, first_emitter + n_emitters), emitter i
/// driven by derive_emitter_rng(master_seed, i), accumulated in ascending
/// index order with one primitive signal alive at a time.
FieldSignal generate_superposition_range(const EmissionModel& model, Index first_emitter, Index n_emitters,
                                         const SimulationGrid& grid, std::uint64_t master_seed);

inline FieldSignal generate_superposition(const EmissionModel& model, Index n_emitters,
                                          const SimulationGrid& grid, std::uint64_t master_seed)
{
    return generate_superposition_range(model, 0, n_emitters, grid, master_seed);
}

}  // namespace cohsim
