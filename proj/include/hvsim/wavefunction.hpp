#pragma once

/**
 * @file wavefunction.hpp
 * @brief Pilot-wave representations on one- and two-dimensional configuration
 *        spaces (hbar = 1).
 *
 * Two representations are provided:
 *  - ModeWavefunction: exact eigenmode expansion in a hard-walled box,
 *    evolved by multiplying each coefficient with exp(-i E_n t).
 *  - GridWavefunction: nodal samples evolved by a Crank-Nicolson integrator
 *    (one unitary tridiagonal solve per axis per step), used whenever the
 *    Hamiltonian changes suddenly.
 *
 * Anything that can report psi and grad(psi) at a configuration point and
 * time implements WaveField; the guidance and ensemble modules consume that
 * interface only.
 */

#include <array>
#include <complex>
#include <cstddef>
#include <iosfwd>
#include <limits>
#include <memory>
#include <vector>

namespace hvsim::wave {

using cplx = std::complex<double>;
using Point = std::array<double, 2>;

enum class Boundary { Wall, Periodic };

/// Rectangular configuration-space domain of dimension 1 or 2.
struct Domain {
    std::size_t dim = 1;
    Point lo{0.0, 0.0};
    Point hi{1.0, 1.0};
    std::array<Boundary, 2> boundary{Boundary::Wall, Boundary::Wall};

    [[nodiscard]] double volume() const noexcept;
    [[nodiscard]] bool contains(const Point& x) const noexcept;
    /// Maps periodic coordinates back into [lo, hi); wall axes unchanged.
    [[nodiscard]] Point wrap(const Point& x) const noexcept;
};

struct FieldSample {
    cplx psi;
    std::array<cplx, 2> grad;
};

/// Read-only access to psi(X, t) and its gradient.
class WaveField {
  public:
    virtual ~WaveField() = default;

    [[nodiscard]] virtual const Domain& domain() const noexcept = 0;
    [[nodiscard]] virtual std::array<double, 2> masses() const noexcept = 0;
    [[nodiscard]] virtual FieldSample sample(const Point& x, double t) const = 0;

    /// Time window over which sample() is valid.
    [[nodiscard]] virtual double t_begin() const noexcept { return -std::numeric_limits<double>::infinity(); }
    [[nodiscard]] virtual double t_end() const noexcept { return std::numeric_limits<double>::infinity(); }

    [[nodiscard]] double density(const Point& x, double t) const { return std::norm(sample(x, t).psi); }
    /// 1 / volume, the reference scale for node thresholds.
    [[nodiscard]] double mean_density() const noexcept { return 1.0 / domain().volume(); }
};

// ---------------------------------------------------------------------------
// Exact box eigenmodes

struct Mode {
    std::array<int, 2> index{1, 1};
    double energy = 0.0;
    cplx coeff;
};

/**
 * psi(X, t) = sum_n c_n exp(-i E_n t) prod_i sqrt(2/L_i) sin(n_i pi x_i / L_i)
 * on the box [0, L_0] x [0, L_1] with E_n = sum_i (n_i pi / L_i)^2 / (2 m_i).
 */
class ModeWavefunction final : public WaveField {
  public:
    struct Term {
        std::array<int, 2> index;
        cplx coeff;
    };

    /// Coefficients must satisfy sum |c_n|^2 = 1 within 1e-12.
    ModeWavefunction(std::size_t dim, Point sides, std::array<double, 2> masses, std::vector<Term> terms);

    /// Same, but rescales the coefficients to unit norm first.
    static ModeWavefunction normalized(std::size_t dim, Point sides, std::array<double, 2> masses,
                                       std::vector<Term> terms);

    [[nodiscard]] const Domain& domain() const noexcept override { return domain_; }
    [[nodiscard]] std::array<double, 2> masses() const noexcept override { return masses_; }
    [[nodiscard]] FieldSample sample(const Point& x, double t) const override;

    /// d psi / dt at (x, t).
    [[nodiscard]] cplx time_derivative(const Point& x, double t) const;

    [[nodiscard]] const std::vector<Mode>& modes() const noexcept { return modes_; }
    [[nodiscard]] double norm() const noexcept;
    [[nodiscard]] double box_energy(const std::array<int, 2>& index) const noexcept;

    /// Exact probability in [lo, hi) at time t.
    [[nodiscard]] double box_probability(const Point& lo, const Point& hi, double t) const;

  private:
    Domain domain_;
    std::array<double, 2> masses_;
    std::vector<Mode> modes_;
    int max_index_ = 1;
};

/// c_n -> c_n exp(-i E_n t).
[[nodiscard]] ModeWavefunction evolve_modes(const ModeWavefunction& psi, double t);

/// exp(i (k.x - w t)) with w = sum k_i^2/(2 m_i) on a periodic box. Not
/// normalizable in the usual sense; scaled so that |psi|^2 = 1/volume.
class PlaneWave final : public WaveField {
  public:
    PlaneWave(Domain periodic_box, Point wavevector, std::array<double, 2> masses);

    [[nodiscard]] const Domain& domain() const noexcept override { return domain_; }
    [[nodiscard]] std::array<double, 2> masses() const noexcept override { return masses_; }
    [[nodiscard]] FieldSample sample(const Point& x, double t) const override;

  private:
    Domain domain_;
    Point k_;
    std::array<double, 2> masses_;
    double omega_;
    double amplitude_;
};

// ---------------------------------------------------------------------------
// Grid representation

/// Uniform node layout along one axis. Wall axes place nodes strictly inside
/// (lo, hi) with psi = 0 on the walls; periodic axes start at lo.
struct Axis {
    double lo = 0.0;
    double hi = 1.0;
    std::size_t nodes = 16;
    Boundary boundary = Boundary::Wall;

    [[nodiscard]] double spacing() const noexcept;
    [[nodiscard]] double node(std::size_t j) const noexcept;
    /// Position in units of the spacing, node j at j.
    [[nodiscard]] double fractional_index(double x) const noexcept;
};

/// V(X) = sum_i V_i(x_i) + V_c(X). The axis terms are folded into the
/// tridiagonal solves; a non-empty coupling field is applied as a phase.
struct Potential {
    std::array<std::vector<double>, 2> axis;
    std::vector<double> coupling;
};

class GridWavefunction final : public WaveField {
  public:
    /// Amplitudes are row-major (axis 0 slowest). Throws if fewer than 16
    /// nodes per axis, sizes disagree, or the norm is off by more than 1e-8.
    GridWavefunction(std::vector<Axis> axes, std::array<double, 2> masses, std::vector<cplx> amplitudes,
                     Potential potential = {});

    /// Samples `fn` on the nodes and normalizes.
    template <class Fn>
    static GridWavefunction from_function(std::vector<Axis> axes, std::array<double, 2> masses, Fn&& fn,
                                          Potential potential = {});

    [[nodiscard]] const Domain& domain() const noexcept override { return domain_; }
    [[nodiscard]] std::array<double, 2> masses() const noexcept override { return masses_; }
    /// Catmull-Rom interpolation of psi and of its centred-difference gradient;
    /// `t` is ignored (a single snapshot).
    [[nodiscard]] FieldSample sample(const Point& x, double t) const override;

    [[nodiscard]] std::size_t dimension() const noexcept { return axes_.size(); }
    [[nodiscard]] const std::vector<Axis>& axes() const noexcept { return axes_; }
    [[nodiscard]] const std::vector<cplx>& amplitudes() const noexcept { return amp_; }
    [[nodiscard]] const Potential& potential() const noexcept { return pot_; }
    [[nodiscard]] std::size_t size() const noexcept { return amp_.size(); }
    [[nodiscard]] double cell_volume() const noexcept;
    [[nodiscard]] double norm() const noexcept;
    [[nodiscard]] Point node_position(std::size_t flat) const noexcept;
    [[nodiscard]] double potential_at(std::size_t flat) const noexcept;

    /// <psi|H|psi> with the discrete Laplacian.
    [[nodiscard]] double energy() const;

    /// Copy with new amplitudes (norm checked) and the same layout.
    [[nodiscard]] GridWavefunction with_amplitudes(std::vector<cplx> amplitudes) const;
    /// Copy with a different Hamiltonian (sudden switch).
    [[nodiscard]] GridWavefunction with_hamiltonian(std::array<double, 2> masses, Potential potential) const;

    void write_text(std::ostream& os) const;
    static GridWavefunction read_text(std::istream& is);

  private:
    std::vector<Axis> axes_;
    std::array<double, 2> masses_;
    std::vector<cplx> amp_;
    Potential pot_;
    Domain domain_;
};

/**
 * Crank-Nicolson propagator for one Hamiltonian and time step. Each step is
 * exp(-i Vc dt/2) * prod_axes CN_axis(dt) * exp(-i Vc dt/2) where CN_axis is
 * the Cayley form (1 + i dt H_a/2)^-1 (1 - i dt H_a/2). Every factor is
 * unitary, so the norm is preserved for any dt > 0.
 */
class CrankNicolson {
  public:
    CrankNicolson(const GridWavefunction& layout, double dt);

    void step(std::vector<cplx>& amplitudes) const;
    [[nodiscard]] double dt() const noexcept { return dt_; }

  private:
    struct AxisSolver {
        std::size_t n = 0;
        std::size_t stride = 1;
        std::size_t lines = 1;
        std::size_t line_stride = 0;
        bool periodic = false;
        cplx off_a;  // off-diagonal of (1 + i dt H/2)
        cplx off_b;  // off-diagonal of (1 - i dt H/2)
        std::vector<cplx> diag_b;
        std::vector<cplx> c_prime;  // Thomas forward-sweep coefficients
        std::vector<cplx> denom;
        std::vector<cplx> z;        // Sherman-Morrison auxiliary solution
        cplx gamma;
        cplx corner_factor;
        void apply(std::vector<cplx>& amp, std::vector<cplx>& rhs, std::vector<cplx>& tmp) const;
        void thomas(std::vector<cplx>& x) const;
    };

    double dt_;
    std::vector<AxisSolver> solvers_;
    std::vector<cplx> coupling_phase_;
};

/// Evolves by `steps` steps of size dt. Throws NumericalError on non-finite
/// amplitudes or norm drift beyond 1e-6.
[[nodiscard]] GridWavefunction evolve_grid(const GridWavefunction& psi, double dt, std::size_t steps);

/**
 * Snapshots of a grid evolution at uniform spacing. sample() interpolates
 * the complex field cubically in time (four nearest snapshots) and by
 * Catmull-Rom in space.
 */
class GridHistory final : public WaveField {
  public:
    GridHistory(const GridWavefunction& initial, double t0, double dt, std::size_t steps_per_snapshot,
                std::size_t snapshot_count);

    [[nodiscard]] const Domain& domain() const noexcept override { return snapshots_.front().domain(); }
    [[nodiscard]] std::array<double, 2> masses() const noexcept override { return snapshots_.front().masses(); }
    [[nodiscard]] FieldSample sample(const Point& x, double t) const override;
    [[nodiscard]] double t_begin() const noexcept override { return t0_; }
    [[nodiscard]] double t_end() const noexcept override;

    [[nodiscard]] const GridWavefunction& snapshot(std::size_t k) const { return snapshots_.at(k); }
    [[nodiscard]] std::size_t snapshot_count() const noexcept { return snapshots_.size(); }
    [[nodiscard]] double snapshot_interval() const noexcept { return interval_; }

  private:
    double t0_;
    double interval_;
    std::vector<GridWavefunction> snapshots_;
};

/// Probability current J_i = Im(psi* d_i psi) / m_i. Throws NodeError when
/// |psi|^2 is below the node threshold.
[[nodiscard]] std::array<double, 2> current(const WaveField& psi, const Point& x, double t = 0.0);

/// Node threshold: 1e-12 times the mean density of the domain.
[[nodiscard]] double node_threshold(const WaveField& psi) noexcept;

/// Samples a mode expansion on grid nodes at time t (not renormalized).
[[nodiscard]] std::vector<cplx> sample_on_grid(const ModeWavefunction& psi, const std::vector<Axis>& axes,
                                               double t);

/// max |d|psi|^2/dt + div J| over nodes at distance >= 2 cells from the walls,
/// with J and div J from centred differences of the nodal samples and the
/// exact time derivative of the modes.
[[nodiscard]] double max_continuity_residual(const ModeWavefunction& psi, std::size_t nodes_per_axis,
                                             double t);

// ---------------------------------------------------------------------------

template <class Fn>
GridWavefunction GridWavefunction::from_function(std::vector<Axis> axes, std::array<double, 2> masses, Fn&& fn,
                                                 Potential potential) {
    std::size_t total = 1;
    for (const auto& a : axes) total *= a.nodes;
    std::vector<cplx> amp(total);
    const std::size_t n1 = axes.size() > 1 ? axes[1].nodes : 1;
    double norm = 0.0;
    for (std::size_t f = 0; f < total; ++f) {
        Point x{axes[0].node(f / n1), axes.size() > 1 ? axes[1].node(f % n1) : 0.0};
        amp[f] = cplx(fn(x));
        norm += std::norm(amp[f]);
    }
    double vol = 1.0;
    for (const auto& a : axes) vol *= a.spacing();
    const double scale = norm > 0.0 ? 1.0 / std::sqrt(norm * vol) : 1.0;
    for (auto& a : amp) a *= scale;
    return GridWavefunction(std::move(axes), masses, std::move(amp), std::move(potential));
}

}  // namespace hvsim::wave
