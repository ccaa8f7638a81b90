#pragma once

/**
 * @file signalling.hpp
 * @brief Paired switched/unswitched runs of an entangled 1D pair: a sudden
 *        change of particle B's Hamiltonian, the induced shift of particle
 *        A's marginal  dp_A(x_A, t) = p_A^switched - p_A^unswitched, and its
 *        small-t power law.
 */

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "hvsim/ensemble.hpp"
#include "hvsim/wavefunction.hpp"

namespace hvsim::signal {

using wave::GridWavefunction;
using wave::Point;

/// Equal-width bins over [lo, hi] on the x_A axis.
struct MarginalBinning {
    double lo = -1.0;
    double hi = 1.0;
    std::size_t bins = 1;

    [[nodiscard]] double width() const noexcept { return (hi - lo) / static_cast<double>(bins); }
    [[nodiscard]] double edge(std::size_t k) const noexcept { return lo + static_cast<double>(k) * width(); }
    [[nodiscard]] double centre(std::size_t k) const noexcept { return lo + (static_cast<double>(k) + 0.5) * width(); }
    /// Bin of x, or `bins` if x lies outside [lo, hi).
    [[nodiscard]] std::size_t index(double x) const noexcept;
    void validate() const;
};

/// Bin probabilities of |psi|^2 integrated over x_B, from a natural cubic
/// spline of the nodal marginal (wall values are zero).
[[nodiscard]] std::vector<double> marginal_A(const GridWavefunction& psi, const MarginalBinning& binning);

/// Bin fractions of an ensemble's x_A coordinates.
[[nodiscard]] std::vector<double> marginal_A(const ensemble::Ensemble& e, const MarginalBinning& binning);

/// Particle B's Hamiltonian after the switch. Particle A is never touched.
struct SwitchSpec {
    double mass_b = 1.0;
    /// B-axis potential at the grid nodes after the switch.
    std::vector<double> potential_b;
};

struct SignalExperiment {
    /// Initial 2D state carrying the unswitched Hamiltonian H_A + H_B.
    GridWavefunction psi0;
    /// Initial ensemble density P(x_A, x_B, 0), normalized on psi0's domain.
    std::function<double(const Point&)> density0{};
    /// Upper bound on density0 for rejection sampling; 0 estimates it.
    double density_bound = 0.0;
    SwitchSpec after{};
    /// Observation times, strictly increasing and positive.
    std::vector<double> times{};
    MarginalBinning binning{};
    /// Crank-Nicolson step and snapshot spacing of both arms.
    double dt = 1e-3;
    std::size_t steps_per_snapshot = 10;

    /// The switch leaves H_B unchanged.
    [[nodiscard]] bool switch_is_identity() const;
    void validate() const;
};

struct SignalReport {
    std::vector<double> times{};
    MarginalBinning binning{};
    std::size_t samples = 0;
    /// dp_A per unit x_A, [time][bin].
    std::vector<std::vector<double>> delta_p;
    /// Paired standard error of each entry of delta_p.
    std::vector<std::vector<double>> std_error;
    /// 4 max(max_k std_error, 1 / (n bin_width)) per time.
    std::vector<double> noise_floor;
    std::vector<double> max_abs;
    /// Sum over bins of dp_A times the bin width.
    std::vector<double> integral;
    /// Monte Carlo error of the integral plus the fraction of either arm
    /// outside the binned range.
    std::vector<double> integral_bound;
    std::size_t stalled_unswitched = 0;
    std::size_t stalled_switched = 0;

    [[nodiscard]] double signal_to_noise(std::size_t k) const { return max_abs.at(k) / noise_floor.at(k); }
    [[nodiscard]] double max_signal_to_noise() const;
    /// Every entry of delta_p is exactly zero.
    [[nodiscard]] bool identically_zero() const;
    /// |integral| <= bound at every time.
    [[nodiscard]] bool zero_sum_holds() const;
    /// Rows "t,x_A,delta_p,noise_floor" with a header line.
    void write_csv(std::ostream& os) const;
};

struct SignalOptions {
    std::size_t samples = 100000;
    std::uint64_t seed = 1;
    /// Trajectory error tolerance per unit time.
    double tol = 1e-6;
    unsigned workers = 1;
    /// Also return the final x_A of each unswitched trajectory at every time.
    bool keep_unswitched = false;
};

struct SignalRun {
    SignalReport report;
    /// [time][particle] when requested.
    std::vector<std::vector<double>> unswitched_xa;
};

/**
 * Samples one ensemble from density0 and carries every point along both the
 * unswitched and the switched guidance field. Throws NumericalError when more
 * than ensemble::kMaxStalledFraction of either arm stalls.
 */
[[nodiscard]] SignalRun run_signal_experiment(const SignalExperiment& cfg, const SignalOptions& options);

struct ScalingFit {
    double exponent = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    double log_prefactor = 0.0;
};

/// Least-squares slope of log y against log t with a 95% Student-t interval.
/// Needs at least 3 positive points.
[[nodiscard]] ScalingFit fit_power_law(const std::vector<double>& t, const std::vector<double>& y);

/**
 * Fits max|dp_A| against t. Throws std::invalid_argument with fewer than 4
 * times, a span under one decade, or any time whose signal does not exceed
 * its noise floor.
 */
[[nodiscard]] ScalingFit fit_time_scaling(const SignalReport& report);

/// Harmonic-oscillator eigenfunction phi_n for m = omega = 1.
[[nodiscard]] double hermite_function(int n, double x);

/**
 * Reference pair: psi0 = (phi0(a) phi1(b) + phi1(a) phi0(b)) / sqrt 2 in
 * V = (a^2 + b^2) / 2 with unit masses. The switch sets particle B's mass to
 * `mass_b_after` and adds `tilt` * b to its potential. The ensemble density
 * is |psi0|^2 (1 + epsilon tanh(b / sigma)), which integrates to one since
 * |psi0|^2 is even under (a, b) -> (-a, -b).
 */
struct ReferenceOptions {
    double half_width = 7.0;
    std::size_t nodes = 256;
    double epsilon = 0.5;
    double sigma = 0.25;
    double mass_b_after = 0.5;
    double tilt = 0.0;
    /// Six log-spaced times over one decade, well inside the oscillator period 2 pi.
    std::vector<double> times{0.04, 0.04 * 1.5848931924611136, 0.04 * 2.5118864315095806,
                              0.04 * 3.9810717055349722, 0.04 * 6.309573444801933, 0.4};
    double bin_width = 2.0;
    double bin_half_width = 4.0;
    double dt = 2e-3;
    std::size_t steps_per_snapshot = 5;
};

[[nodiscard]] SignalExperiment reference_experiment(const ReferenceOptions& options);

}  // namespace hvsim::signal
