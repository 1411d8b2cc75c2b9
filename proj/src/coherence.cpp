#include "cohsim/coherence.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <complex>
#include <vector>

namespace cohsim {

namespace {

using Complex = std::complex<double>;

Index next_pow2(Index n)
{
    Index m = 1;
    while (m < n)
        m <<= 1;
    return m;
}

struct Crossing {
    int count = 0;
    double innermost_steps = 0.0;
    double outermost_steps = 0.0;
};

// Walks outward from zero lag; `value(i)` is the profile at |lag| = i.
template <typename ValueAt>
Crossing scan_side(ValueAt value, Index max_lag, double half)
{
    Crossing c;
    bool above = value(0) >= half;
    for (Index i = 1; i <= max_lag; ++i) {
        const bool now_above = value(i) >= half;
        if (now_above != above) {
            const double y0 = value(i - 1);
            const double y1 = value(i);
            const double at = static_cast<double>(i - 1) + (half - y0) / (y1 - y0);
            if (c.count == 0)
                c.innermost_steps = at;
            c.outermost_steps = at;
            ++c.count;
            above = now_above;
        }
    }
    return c;
}

}  // namespace

std::string_view to_string(FwhmStatus status)
{
    switch (status) {
    case FwhmStatus::Ok:
        return "OK";
    case FwhmStatus::NoCrossing:
        return "NO_CROSSING";
    case FwhmStatus::MultiCrossing:
        return "MULTI_CROSSING";
    }
    return "UNKNOWN";
}

CoherenceFunction autocorrelation_spectral(const Eigen::Ref<const VectorXd>& samples, double dt_fs,
                                           Index max_lag_steps)
{
    const Index n = samples.size();
    if (max_lag_steps < 0 || 2 * max_lag_steps >= n)
        throw std::invalid_argument("autocorrelation: max_lag_steps must satisfy 0 <= L < N/2");

    const double mean = samples.mean();
    const Index m = next_pow2(2 * n);
    std::vector<double> padded(static_cast<std::size_t>(m), 0.0);
    double power = 0.0;
    for (Index j = 0; j < n; ++j) {
        const double x = samples[j] - mean;
        padded[static_cast<std::size_t>(j)] = x;
        power += x * x;
    }
    const double norm = power / static_cast<double>(n);
    if (!(norm > 0.0))
        throw DegenerateSignal("degenerate signal: zero power");

    Eigen::FFT<double> fft;
    fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
    std::vector<Complex> spectrum(static_cast<std::size_t>(m / 2 + 1));
    fft.fwd(spectrum.data(), padded.data(), m);
    for (auto& z : spectrum)
        z = Complex(std::norm(z), 0.0);
    fft.inv(padded.data(), spectrum.data(), m);

    CoherenceFunction out;
    out.max_lag_steps = max_lag_steps;
    out.dt_fs = dt_fs;
    out.norm = norm;
    out.n_samples_source = n;
    out.gamma.resize(2 * max_lag_steps + 1);
    out.gamma[max_lag_steps] = 1.0;
    for (Index k = 1; k <= max_lag_steps; ++k) {
        const double numerator = padded[static_cast<std::size_t>(k)] / static_cast<double>(n - k);
        const double g = numerator / norm;
        out.gamma[max_lag_steps + k] = g;
        out.gamma[max_lag_steps - k] = g;
    }
    return out;
}

VectorXd analytic_envelope(const Eigen::Ref<const VectorXd>& values)
{
    const Index n = values.size();
    if (n == 0)
        return {};
    std::vector<Complex> buffer(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i)
        buffer[static_cast<std::size_t>(i)] = Complex(values[i], 0.0);

    Eigen::FFT<double> fft;
    std::vector<Complex> spectrum(static_cast<std::size_t>(n));
    fft.fwd(spectrum.data(), buffer.data(), n);
    // Keep DC (and Nyquist for even n), double positive, drop negative.
    const Index positive_end = (n + 1) / 2;
    for (Index k = 1; k < positive_end; ++k)
        spectrum[static_cast<std::size_t>(k)] *= 2.0;
    for (Index k = n / 2 + 1; k < n; ++k)
        spectrum[static_cast<std::size_t>(k)] = 0.0;
    fft.inv(buffer.data(), spectrum.data(), n);

    VectorXd env(n);
    for (Index i = 0; i < n; ++i)
        env[i] = std::abs(buffer[static_cast<std::size_t>(i)]);
    return env;
}

FwhmResult fwhm_of_profile(const Eigen::Ref<const VectorXd>& profile, double dt_fs, Index edge_guard_steps)
{
    const Index size = profile.size();
    if (size < 3 || size % 2 == 0)
        throw std::invalid_argument("fwhm: profile must have odd length 2L+1 >= 3");
    if (!(dt_fs > 0.0))
        throw std::invalid_argument("fwhm: dt_fs must be > 0");
    const Index max_lag = (size - 1) / 2;
    if (edge_guard_steps < 0 || edge_guard_steps >= max_lag)
        throw std::invalid_argument("fwhm: edge guard must satisfy 0 <= guard < L");
    const Index reach = max_lag - edge_guard_steps;

    FwhmResult r;
    r.peak = profile[max_lag];
    if (!(r.peak > 0.0))
        throw std::invalid_argument("fwhm: profile must be positive at zero lag");
    const double half = 0.5 * r.peak;

    const auto pos = scan_side([&](Index i) { return profile[max_lag + i]; }, reach, half);
    const auto neg = scan_side([&](Index i) { return profile[max_lag - i]; }, reach, half);
    r.crossings_positive = pos.count;
    r.crossings_negative = neg.count;
    if (pos.count > 0)
        r.first_crossing_fs = pos.innermost_steps * dt_fs;

    if (pos.count == 0 || neg.count == 0) {
        r.status = FwhmStatus::NoCrossing;
    } else if (pos.count >= 3 || neg.count >= 3) {
        r.status = FwhmStatus::MultiCrossing;
    } else {
        r.status = FwhmStatus::Ok;
        r.width_fs = (pos.outermost_steps + neg.outermost_steps) * dt_fs;
        r.length_um = kSpeedOfLightUmPerFs * r.width_fs;
    }
    return r;
}

Index envelope_edge_guard_steps(Index max_lag_steps)
{
    const Index guard = std::max<Index>(16, (max_lag_steps + 99) / 100);
    return std::min(guard, max_lag_steps / 2);
}

FwhmResult coherence_length_fwhm(const CoherenceFunction& gamma, FwhmSource source)
{
    if (source == FwhmSource::RawGamma)
        return fwhm_of_profile(gamma.gamma, gamma.dt_fs);
    return fwhm_of_profile(envelope_magnitude(gamma), gamma.dt_fs, envelope_edge_guard_steps(gamma.max_lag_steps));
}

CoherenceLengthResult coherence_lengths(const CoherenceFunction& gamma, FwhmSource source)
{
    CoherenceLengthResult r;
    r.l_pew_um = coherence_length_pew(gamma);
    r.max_lag_fs = gamma.max_lag_fs();
    r.fwhm = coherence_length_fwhm(gamma, source);
    return r;
}

SpectrumEstimate power_spectral_density(const FieldSignal& signal, Index n_fft)
{
    return power_spectral_density(signal.samples, signal.grid.dt_fs, n_fft);
}

SpectrumEstimate power_spectral_density(const Eigen::Ref<const VectorXd>& samples, double dt_fs, Index n_fft)
{
    const Index n = samples.size();
    if (n < 2)
        throw std::invalid_argument("power_spectral_density: need at least 2 samples");
    if (n_fft == 0)
        n_fft = n;
    if (n_fft < n)
        throw std::invalid_argument("power_spectral_density: n_fft must be >= N");

    const double mean = samples.mean();
    std::vector<double> padded(static_cast<std::size_t>(n_fft), 0.0);
    double energy = 0.0;
    for (Index j = 0; j < n; ++j) {
        const double x = samples[j] - mean;
        padded[static_cast<std::size_t>(j)] = x;
        energy += x * x;
    }
    if (!(energy > 0.0))
        throw DegenerateSignal("degenerate signal: zero power");

    Eigen::FFT<double> fft;
    fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
    const Index bins = n_fft / 2 + 1;
    std::vector<Complex> spectrum(static_cast<std::size_t>(bins));
    fft.fwd(spectrum.data(), padded.data(), n_fft);

    SpectrumEstimate out;
    out.dt_fs = dt_fs;
    out.n_samples = n;
    out.n_fft = n_fft;
    out.df = 1.0 / (static_cast<double>(n_fft) * dt_fs);
    out.frequency = VectorXd::LinSpaced(bins, 0.0, static_cast<double>(bins - 1) * out.df);
    out.power.resize(bins);
    const double scale = dt_fs / static_cast<double>(n);
    for (Index k = 0; k < bins; ++k) {
        const bool single = k == 0 || (n_fft % 2 == 0 && k == n_fft / 2);
        out.power[k] = (single ? 1.0 : 2.0) * std::norm(spectrum[static_cast<std::size_t>(k)]) * scale;
    }
    return out;
}

VectorXd autocovariance_from_spectrum(const SpectrumEstimate& spectrum, Index max_lag_steps)
{
    const Index n_fft = spectrum.n_fft;
    const Index bins = n_fft / 2 + 1;
    if (spectrum.power.size() != bins)
        throw std::invalid_argument("autocovariance_from_spectrum: inconsistent spectrum");
    if (max_lag_steps < 0 || max_lag_steps >= n_fft)
        throw std::invalid_argument("autocovariance_from_spectrum: lag out of range");

    // Undo the one-sided folding and the dt scaling: two-sided |X|^2 / N.
    std::vector<Complex> half(static_cast<std::size_t>(bins));
    for (Index k = 0; k < bins; ++k) {
        const bool single = k == 0 || (n_fft % 2 == 0 && k == n_fft / 2);
        half[static_cast<std::size_t>(k)] = Complex(spectrum.power[k] / (single ? 1.0 : 2.0) / spectrum.dt_fs, 0.0);
    }
    Eigen::FFT<double> fft;
    fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
    std::vector<double> lagged(static_cast<std::size_t>(n_fft));
    fft.inv(lagged.data(), half.data(), n_fft);

    VectorXd out(max_lag_steps + 1);
    for (Index k = 0; k <= max_lag_steps; ++k)
        out[k] = lagged[static_cast<std::size_t>(k)];
    return out;
}

}  // namespace cohsim
