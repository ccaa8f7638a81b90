#pragma once

/**
 * @file ensemble.hpp
 * @brief Sampled ensembles P(X, t), their transport along guidance
 *        trajectories, coarse-grained histograms and the coarse-grained
 *        H-function  H = sum_cells P ln(P / Q).
 */

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hvsim/guidance.hpp"
#include "hvsim/wavefunction.hpp"

namespace hvsim::ensemble {

using wave::Domain;
using wave::Point;
using wave::WaveField;

struct Ensemble {
    Domain domain;
    std::vector<Point> points;
    std::string source;
    std::uint64_t seed = 0;
    /// Indices of points whose trajectories stalled at a node during the last
    /// evolution; they keep their last reached position.
    std::vector<std::size_t> stalled;

    [[nodiscard]] std::size_t size() const noexcept { return points.size(); }
};

/// Uniform tiling of the domain into cells[0] x cells[1] boxes.
class CoarseGraining {
  public:
    CoarseGraining(const Domain& domain, std::array<std::size_t, 2> cells);
    /// Cells of edge `edge` per axis; the edge must divide every side exactly.
    static CoarseGraining from_edge(const Domain& domain, double edge);

    [[nodiscard]] std::size_t cell_count() const noexcept;
    [[nodiscard]] std::size_t cell_index(const Point& x) const noexcept;
    [[nodiscard]] Point cell_lo(std::size_t cell) const noexcept;
    [[nodiscard]] Point cell_hi(std::size_t cell) const noexcept;
    [[nodiscard]] std::array<double, 2> edge() const noexcept;
    [[nodiscard]] const std::array<std::size_t, 2>& cells() const noexcept { return cells_; }
    [[nodiscard]] const Domain& domain() const noexcept { return domain_; }
    /// "(i,j)" label used in diagnostics.
    [[nodiscard]] std::string label(std::size_t cell) const;

  private:
    Domain domain_;
    std::array<std::size_t, 2> cells_;
};

struct DensityHistogram {
    std::vector<std::uint64_t> counts;
    std::vector<double> mass;
    double total = 0.0;
};

using DensityFn = std::function<double(const Point&)>;

/**
 * Rejection sampling of a bounded density on `domain`. When `bound` is 0
 * it is estimated as 1.5x the maximum over a 257^d lattice. Throws
 * NumericalError if the acceptance rate drops below 1e-4 or a sampled value
 * exceeds the bound.
 */
[[nodiscard]] Ensemble sample_density(const Domain& domain, const DensityFn& density, std::size_t n,
                                      std::uint64_t seed, double bound = 0.0, unsigned workers = 1,
                                      std::string source = "density");

/// Fraction of stalled points above which evolution is reported as failed.
inline constexpr double kMaxStalledFraction = 1e-3;

/// Ensembles at each of `times` (sorted, in the direction of travel from t0).
[[nodiscard]] std::vector<Ensemble> evolve_ensemble_series(const Ensemble& e, const WaveField& psi, double t0,
                                                           const std::vector<double>& times, double tol,
                                                           unsigned workers = 1);

/// Advances every point along its trajectory from t0 to t1.
[[nodiscard]] Ensemble evolve_ensemble(const Ensemble& e, const WaveField& psi, double t0, double t1, double tol,
                                       unsigned workers = 1);

[[nodiscard]] DensityHistogram histogram(const Ensemble& e, const CoarseGraining& cg);

/// Exact cell probabilities of a mode expansion at time t.
[[nodiscard]] std::vector<double> cell_masses(const wave::ModeWavefunction& psi, double t, const CoarseGraining& cg);

/// Cell probabilities of any field by tensor Gauss-Legendre quadrature.
[[nodiscard]] std::vector<double> cell_masses(const WaveField& psi, double t, const CoarseGraining& cg,
                                              int order = 8);

/// H = sum P ln(P/Q) over cells with P > 0. Throws NumericalError naming the
/// first cell that holds ensemble mass but no |psi|^2 mass.
[[nodiscard]] double h_function(const std::vector<double>& ensemble_mass, const std::vector<double>& field_mass,
                                const CoarseGraining& cg);

[[nodiscard]] double h_function(const Ensemble& e, const wave::ModeWavefunction& psi, double t,
                                const CoarseGraining& cg);

[[nodiscard]] double l1_distance(const std::vector<double>& p, const std::vector<double>& q);

/**
 * Multinomial noise envelope for the L1 distance between an n-sample
 * histogram and its parent cell probabilities q: E[L1] + k sd[L1], using the
 * normal approximation |N(0, q(1-q)/n)| per cell.
 */
[[nodiscard]] double l1_noise_envelope(const std::vector<double>& q, std::size_t n, double k_sigma = 4.0);

}  // namespace hvsim::ensemble
