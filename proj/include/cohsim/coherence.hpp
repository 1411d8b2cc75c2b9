#pragma once

#include "cohsim/synthesis.hpp"
#include "cohsim/types.hpp"

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cohsim {

/// Normalized first-order temporal coherence on the symmetric lag grid
/// k = -L..L, stored at gamma[k + L].
struct CoherenceFunction {
    Index max_lag_steps = 0;
    double dt_fs = 0.0;
    VectorXd gamma;
    double norm = 0.0;  // <E E> over the full record, after mean removal
    Index n_samples_source = 0;

    double at(Index lag) const { return gamma[lag + max_lag_steps]; }
    double max_lag_fs() const { return static_cast<double>(max_lag_steps) * dt_fs; }
    VectorXd lags_fs() const
    {
        return VectorXd::LinSpaced(2 * max_lag_steps + 1, -max_lag_fs(), max_lag_fs());
    }
};

enum class FwhmStatus { Ok, NoCrossing, MultiCrossing };

std::string_view to_string(FwhmStatus status);

enum class FwhmSource { Envelope, RawGamma };

struct FwhmResult {
    FwhmStatus status = FwhmStatus::NoCrossing;
    double width_fs = std::numeric_limits<double>::quiet_NaN();
    double length_um = std::numeric_limits<double>::quiet_NaN();
    double peak = 0.0;                  // profile value at zero lag
    int crossings_negative = 0;         // half-max crossings for lags < 0
    int crossings_positive = 0;         // half-max crossings for lags > 0
    double first_crossing_fs = std::numeric_limits<double>::quiet_NaN();  // innermost, positive side

    bool ok() const { return status == FwhmStatus::Ok; }
};

struct CoherenceLengthResult {
    double l_pew_um = 0.0;
    double max_lag_fs = 0.0;
    FwhmResult fwhm;
};

/// One-sided periodogram of the mean-removed record,
/// power[k] = c_k |X_k|^2 dt / N with c_k = 2 except at DC and Nyquist.
struct SpectrumEstimate {
    VectorXd frequency;  // cycles per fs
    VectorXd power;
    double df = 0.0;
    double dt_fs = 0.0;
    Index n_samples = 0;  // record length N
    Index n_fft = 0;      // transform length, >= N
    static constexpr std::string_view convention = "one-sided periodogram, |X|^2 dt/N, mean removed";
};

/// Trapezoidal rule on a uniform grid of spacing h.
template <typename Derived>
double trapezoid(const Eigen::MatrixBase<Derived>& y, double h)
{
    const Index n = y.size();
    if (n < 2)
        return 0.0;
    return h * (y.sum() - 0.5 * (y(0) + y(n - 1)));
}

/// Sample mean removed; lag-k products averaged over the N - k overlapping
/// pairs and normalized by the N-sample average of E^2. Costs O(N L).
template <typename Derived>
CoherenceFunction autocorrelation_direct(const Eigen::MatrixBase<Derived>& samples, double dt_fs,
                                         Index max_lag_steps)
{
    const Index n = samples.size();
    if (max_lag_steps < 0 || 2 * max_lag_steps >= n)
        throw std::invalid_argument("autocorrelation: max_lag_steps must satisfy 0 <= L < N/2");
    const VectorXd x = samples.template cast<double>().array() - samples.template cast<double>().mean();
    const double norm = x.squaredNorm() / static_cast<double>(n);
    if (!(norm > 0.0))
        throw DegenerateSignal("degenerate signal: zero power");

    CoherenceFunction out;
    out.max_lag_steps = max_lag_steps;
    out.dt_fs = dt_fs;
    out.norm = norm;
    out.n_samples_source = n;
    out.gamma.resize(2 * max_lag_steps + 1);
    out.gamma[max_lag_steps] = 1.0;
    for (Index k = 1; k <= max_lag_steps; ++k) {
        const Index overlap = n - k;
        const double numerator = x.head(overlap).dot(x.tail(overlap)) / static_cast<double>(overlap);
        const double g = numerator / norm;
        out.gamma[max_lag_steps + k] = g;
        out.gamma[max_lag_steps - k] = g;
    }
    return out;
}

inline CoherenceFunction autocorrelation_direct(const FieldSignal& signal, Index max_lag_steps)
{
    return autocorrelation_direct(signal.samples, signal.grid.dt_fs, max_lag_steps);
}

/// Same estimator as autocorrelation_direct via a zero-padded (length
/// >= 2N) real FFT: |X|^2, inverse transform, per-lag overlap division.
CoherenceFunction autocorrelation_spectral(const Eigen::Ref<const VectorXd>& samples, double dt_fs,
                                           Index max_lag_steps);

inline CoherenceFunction autocorrelation_spectral(const FieldSignal& signal, Index max_lag_steps)
{
    return autocorrelation_spectral(signal.samples, signal.grid.dt_fs, max_lag_steps);
}

/// Magnitude of the analytic signal of a real sequence, treating it as one
/// period of a circular sequence.
VectorXd analytic_envelope(const Eigen::Ref<const VectorXd>& values);

/// Carrier-free envelope of gamma along the lag axis.
inline VectorXd envelope_magnitude(const CoherenceFunction& gamma)
{
    return analytic_envelope(gamma.gamma);
}

/// c * integral of |gamma|^2 over [-L dt, L dt], trapezoidal rule, in um.
inline double coherence_length_pew(const CoherenceFunction& gamma)
{
    return kSpeedOfLightUmPerFs * trapezoid(gamma.gamma.cwiseAbs2(), gamma.dt_fs);
}

/// Full width at half maximum of a symmetric-lag profile (length 2L+1).
///
/// The maximum is the profile value at zero lag. Crossings of the half
/// level are counted on each side; NoCrossing if a side has none,
/// MultiCrossing if a side has three or more (a secondary lobe rising
/// back above half maximum and falling again). Otherwise the outermost
/// crossing on each side, linearly interpolated, bounds the width.
///
/// Crossings within `edge_guard_steps` of either window edge are ignored.
FwhmResult fwhm_of_profile(const Eigen::Ref<const VectorXd>& profile, double dt_fs, Index edge_guard_steps = 0);

/// The analytic envelope of a lag window holding a non-integer number of
/// carrier cycles dips near +-L, where the circular wrap reverses the
/// phase. The dip falls below half maximum only within a few steps of the
/// edge; the envelope FWHM skips this many steps on each side.
Index envelope_edge_guard_steps(Index max_lag_steps);

/// FWHM of the envelope (default) or of raw gamma, which sees the carrier.
FwhmResult coherence_length_fwhm(const CoherenceFunction& gamma, FwhmSource source = FwhmSource::Envelope);

CoherenceLengthResult coherence_lengths(const CoherenceFunction& gamma, FwhmSource source = FwhmSource::Envelope);

/// Periodogram of the mean-removed record, zero-padded to n_fft samples
/// (0 selects n_fft = N). Throws DegenerateSignal for a zero-power record.
SpectrumEstimate power_spectral_density(const FieldSignal& signal, Index n_fft = 0);
SpectrumEstimate power_spectral_density(const Eigen::Ref<const VectorXd>& samples, double dt_fs, Index n_fft = 0);

/// Inverse transform of the two-sided periodogram: the biased
/// autocovariance (1/N) sum_j x_j x_{j+k} for k = 0..max_lag_steps. Linear
/// when n_fft >= 2N, circular when n_fft == N.
VectorXd autocovariance_from_spectrum(const SpectrumEstimate& spectrum, Index max_lag_steps);

/// Sum of power * df; equals the record variance (Parseval).
inline double spectrum_total_power(const SpectrumEstimate& spectrum)
{
    return spectrum.power.sum() * spectrum.df;
}

}  // namespace cohsim
