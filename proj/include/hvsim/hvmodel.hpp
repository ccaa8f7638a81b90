#pragma once

/**
 * @file hvmodel.hpp
 * @brief Deterministic nonlocal hidden-variables model for a pair of two-state
 *        systems in the singlet state.
 *
 * The hidden variable is lambda = (u, w) in [0,1)^2. Outcomes are
 *
 *   sigma_A = +1 if u < 1/2 else -1
 *   sigma_B = -sigma_A if w < theta else +sigma_A,  theta = (1 + m_A.m_B)/2
 *
 * so wing B carries the nonlocal dependence on the distant setting m_A. With
 * lambda uniform on the unit square the model reproduces the singlet
 * correlation -m_A.m_B and 1:1 marginals at both wings. Any other density
 * rho(u, w) is a non-equilibrium ensemble.
 */

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hvsim/random.hpp"
#include "hvsim/vec3.hpp"

namespace hvsim::hv {

/// Measurement axis on the Bloch sphere; normalized on construction.
class BlochSetting {
  public:
    explicit BlochSetting(const Vec3& m);

    [[nodiscard]] const Vec3& vec() const noexcept { return m_; }
    [[nodiscard]] double dot(const BlochSetting& o) const noexcept { return m_.dot(o.m_); }

  private:
    Vec3 m_;
};

/// Mean polarisation vector of a single two-state system, |P| <= 1.
class Polarization {
  public:
    explicit Polarization(const Vec3& p);

    [[nodiscard]] const Vec3& vec() const noexcept { return p_; }

  private:
    Vec3 p_;
};

struct HVSample {
    double u = 0.0;
    double w = 0.0;
};

enum class Wing { A, B };

[[nodiscard]] std::string to_string(Wing wing);

struct BornProbabilities {
    double plus;
    double minus;
};

/// p(+/-) = (1 +/- m.P)/2 for a single system with polarisation P.
[[nodiscard]] BornProbabilities born_probabilities(const BlochSetting& m, const Polarization& p);

struct Outcomes {
    int a;
    int b;
};

/// theta = (1 + m_A.m_B)/2, clamped to [0,1].
[[nodiscard]] double anti_alignment_threshold(const BlochSetting& m_a, const BlochSetting& m_b);

/// Deterministic outcome map. Throws std::invalid_argument for lambda outside [0,1)^2.
[[nodiscard]] Outcomes singlet_outcomes(const BlochSetting& m_a, const BlochSetting& m_b,
                                        const HVSample& lambda);

/**
 * Ensemble density rho(u, w) on the unit square.
 *
 * Separable densities f(u) g(w) are piecewise constant on equal-width bins and
 * admit closed-form box measures; they are sampled by exact inverse CDF.
 * General densities are normalized by quadrature at construction and sampled
 * by rejection against the supplied bound.
 */
class HVDistribution {
  public:
    using DensityFn = std::function<double(double, double)>;

    /// The equilibrium distribution rho_QT (uniform).
    static HVDistribution uniform();

    /// f(u) g(w) with bin masses `u_masses`, `w_masses` (renormalized to 1).
    static HVDistribution separable(std::vector<double> u_masses, std::vector<double> w_masses);

    /// Arbitrary non-negative density bounded by `bound` (before normalization).
    static HVDistribution general(DensityFn density, double bound);

    [[nodiscard]] bool is_separable() const noexcept { return !general_; }
    [[nodiscard]] bool is_uniform() const noexcept;
    [[nodiscard]] double density(double u, double w) const;
    [[nodiscard]] double normalization() const noexcept { return norm_; }

    /// rho-measure of [u_lo,u_hi) x [w_lo,w_hi). Closed form for separable
    /// densities, tensor Gauss-Legendre quadrature otherwise.
    [[nodiscard]] double box_mass(double u_lo, double u_hi, double w_lo, double w_hi) const;

    /// Midpoint-rule integral of density() over the unit square.
    [[nodiscard]] double quadrature_integral(std::size_t per_axis = 512) const;

    [[nodiscard]] HVSample draw(Rng& rng) const;

    [[nodiscard]] const std::vector<double>& u_masses() const noexcept { return u_; }
    [[nodiscard]] const std::vector<double>& w_masses() const noexcept { return w_; }

  private:
    HVDistribution() = default;

    static double axis_mass(const std::vector<double>& masses, double lo, double hi);
    static double axis_draw(const std::vector<double>& cdf, const std::vector<double>& masses,
                            double r);

    std::vector<double> u_, w_;
    std::vector<double> u_cdf_, w_cdf_;
    DensityFn general_;
    double bound_ = 1.0;
    double norm_ = 1.0;
};

struct MonteCarloEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
    std::size_t samples = 0;
};

/// <sigma_A sigma_B> under rho.
[[nodiscard]] MonteCarloEstimate correlation(const BlochSetting& m_a, const BlochSetting& m_b,
                                             const HVDistribution& rho, std::size_t n,
                                             std::uint64_t seed, unsigned workers = 1);

/// Frequency of sigma = +1 at `wing`.
[[nodiscard]] MonteCarloEstimate marginal_frequency(Wing wing, const BlochSetting& m_a,
                                                    const BlochSetting& m_b,
                                                    const HVDistribution& rho, std::size_t n,
                                                    std::uint64_t seed, unsigned workers = 1);

enum class MeasureMethod { Analytic, MonteCarlo };

struct LambdaBox {
    double u_lo, u_hi, w_lo, w_hi;
};

/**
 * Transition sets at `wing` under a change of the remote setting
 * m_old -> m_new with the wing's own setting fixed at m_fixed.
 *
 *   T(-,+) = { lambda : sigma = -1 under m_old, sigma = +1 under m_new }
 *   T(+,-) = { lambda : sigma = +1 under m_old, sigma = -1 under m_new }
 *
 * `minus_plus_boxes` / `plus_minus_boxes` describe the sets themselves and
 * depend only on the outcome map; the measures depend on rho.
 */
struct TransitionSetReport {
    Wing wing = Wing::B;
    Vec3 remote_old;
    Vec3 remote_new;
    double mu_minus_plus = 0.0;
    double mu_plus_minus = 0.0;
    double std_error_minus_plus = 0.0;
    double std_error_plus_minus = 0.0;
    MeasureMethod method = MeasureMethod::Analytic;
    std::size_t samples = 0;
    /// Set when `wing` has no dependence on the remote setting (wing A here).
    bool local_wing = false;
    std::vector<LambdaBox> minus_plus_boxes;
    std::vector<LambdaBox> plus_minus_boxes;
};

[[nodiscard]] TransitionSetReport transition_sets(Wing wing, const BlochSetting& m_fixed,
                                                  const BlochSetting& m_old,
                                                  const BlochSetting& m_new,
                                                  const HVDistribution& rho,
                                                  MeasureMethod method, std::size_t n = 0,
                                                  std::uint64_t seed = 0, unsigned workers = 1);

/**
 * Change in the +1 frequency at `wing` when the remote setting goes
 * m_old -> m_new, estimated on the same lambda draws under both settings.
 * Equals mu[T(-,+)] - mu[T(+,-)] of the Monte Carlo transition_sets call with
 * the same (n, seed).
 */
[[nodiscard]] MonteCarloEstimate signal_statistic(Wing wing, const BlochSetting& m_fixed,
                                                  const BlochSetting& m_old,
                                                  const BlochSetting& m_new,
                                                  const HVDistribution& rho, std::size_t n,
                                                  std::uint64_t seed, unsigned workers = 1);

struct ChshSettings {
    BlochSetting a, a_prime, b, b_prime;
};

/// Coplanar settings a=0, a'=90, b=45, b'=135 degrees, which saturate 2*sqrt(2).
[[nodiscard]] ChshSettings optimal_chsh_settings();

/// S = |E(a,b) - E(a,b') + E(a',b) + E(a',b')|; each E uses its own sub-seed.
[[nodiscard]] MonteCarloEstimate chsh_value(const ChshSettings& settings,
                                            const HVDistribution& rho, std::size_t n,
                                            std::uint64_t seed, unsigned workers = 1);

}  // namespace hvsim::hv
