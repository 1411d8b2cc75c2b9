#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cohsim {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using VectorXd = Vector<double>;
using Index = Eigen::Index;

/// Speed of light in micrometres per femtosecond (exact).
inline constexpr double kSpeedOfLightUmPerFs = 0.299792458;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Raised when a signal carries no power after mean removal.
class DegenerateSignal : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Uniform time axis. Sample k sits at t0_fs + k * dt_fs.
struct SimulationGrid {
    double dt_fs = 0.04;
    Index n_samples = 1'000'000;
    double t0_fs = 0.0;

    double time_fs(Index k) const { return t0_fs + static_cast<double>(k) * dt_fs; }
    double duration_fs() const { return dt_fs * static_cast<double>(n_samples); }

    std::vector<std::string> violations() const
    {
        std::vector<std::string> out;
        if (!(dt_fs > 0.0) || !std::isfinite(dt_fs))
            out.emplace_back("grid.dt_fs must be finite and > 0");
        if (n_samples < 2)
            out.emplace_back("grid.n_samples must be >= 2");
        if (!std::isfinite(t0_fs))
            out.emplace_back("grid.t0_fs must be finite");
        return out;
    }

    void validate() const;
};

/// Throws std::invalid_argument listing every message, if any.
void throw_if_violations(const std::vector<std::string>& violations);

inline void SimulationGrid::validate() const { throw_if_violations(violations()); }

}  // namespace cohsim
