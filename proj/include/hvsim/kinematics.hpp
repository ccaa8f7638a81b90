#pragma once

/**
 * @file kinematics.hpp
 * @brief Clock readings, proper times and proper lengths in flat spacetime
 *        and in a foliated spacetime d tau^2 = N^2 dt^2 - g_ij dx^i dx^j
 *        (zero shift), distinguishing shared slice labels (simultaneity)
 *        from equal accumulated clock readings (synchrony).
 */

#include <array>
#include <cstddef>
#include <functional>
#include <vector>

namespace hvsim::kin {

using Vec = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;

/// Preferred-frame time t and spatial position x.
struct Event {
    double t = 0.0;
    Vec x{0.0, 0.0, 0.0};
};

/// Piecewise-linear path through events with strictly increasing t and every
/// segment no faster than c.
class Worldline {
  public:
    explicit Worldline(std::vector<Event> events, double c = 1.0);

    /// A clock at rest at `x` from t_begin to t_end.
    static Worldline at_rest(const Vec& x, double t_begin, double t_end);

    [[nodiscard]] const std::vector<Event>& events() const noexcept { return events_; }
    [[nodiscard]] double t_begin() const noexcept { return events_.front().t; }
    [[nodiscard]] double t_end() const noexcept { return events_.back().t; }
    [[nodiscard]] Vec position_at(double t) const;
    /// Sub-path between t1 and t2; throws if [t1, t2] is not covered.
    [[nodiscard]] Worldline clipped(double t1, double t2) const;

  private:
    std::vector<Event> events_;
    double c_;
};

/// t' = (t - v x / c^2) / sqrt(1 - v^2/c^2): reading at preferred time t of
/// the clock at x moving with speed v and set by light-signal exchange.
[[nodiscard]] double lorentz_clock_reading(double t, double x, double v, double c = 1.0);

/// x' = (x - v t) / sqrt(1 - v^2/c^2).
[[nodiscard]] double lorentz_position(double t, double x, double v, double c = 1.0);

struct BoostedEvent {
    double t;
    double x;
};

/// Standard boost along x: (t', x').
[[nodiscard]] BoostedEvent boost(double t, double x, double v, double c = 1.0);

/// First-order local time t - v x / c^2.
[[nodiscard]] double poincare_first_order(double t, double x, double v, double c = 1.0);

/**
 * Bound on |poincare_first_order - lorentz_clock_reading|:
 *   (v/c)^2 * K * (|t| + |x|/c),  K = gamma^2 / (gamma + 1),
 * which follows from gamma - 1 = beta^2 gamma^2 / (gamma + 1) and
 * |t - v x/c^2| <= |t| + |x|/c. K -> 1/2 as v -> 0.
 */
[[nodiscard]] double poincare_gap_bound(double t, double x, double v, double c = 1.0);

/// Sum over segments of sqrt(dt^2 - |dx|^2 / c^2).
[[nodiscard]] double proper_time_flat(const Worldline& w, double c = 1.0);

/// Regular lattice over (t, x, y, z) with multilinear interpolation; a
/// dimension with one sample is constant along that axis.
class LatticeField {
  public:
    LatticeField(std::array<double, 4> lo, std::array<double, 4> hi, std::array<std::size_t, 4> counts,
                 std::vector<double> values);

    [[nodiscard]] double operator()(const Vec& x, double t) const;

  private:
    std::array<double, 4> lo_, hi_;
    std::array<std::size_t, 4> n_;
    std::vector<double> v_;
};

/**
 * Lapse N(x, t) > 0 and spatial metric g_ij(x, t) (symmetric positive
 * definite) on slices labelled by t in [t_min, t_max].
 */
class Foliation {
  public:
    using LapseFn = std::function<double(const Vec&, double)>;
    using MetricFn = std::function<Mat3(const Vec&, double)>;

    Foliation(LapseFn lapse, MetricFn metric, double t_min = -1e300, double t_max = 1e300);

    /// N = 1, g = identity.
    static Foliation minkowski();
    /// Lapse and the six independent metric components sampled on lattices
    /// (order xx, xy, xz, yy, yz, zz).
    static Foliation gridded(LatticeField lapse, std::array<LatticeField, 6> metric);

    /// Throws std::domain_error if N <= 0 or t is outside the slice range.
    [[nodiscard]] double lapse(const Vec& x, double t) const;
    /// Throws std::domain_error unless g is symmetric positive definite.
    [[nodiscard]] Mat3 metric(const Vec& x, double t) const;
    [[nodiscard]] double t_min() const noexcept { return t_min_; }
    [[nodiscard]] double t_max() const noexcept { return t_max_; }

  private:
    LapseFn lapse_;
    MetricFn metric_;
    double t_min_, t_max_;
};

/// g_ij a^i b^j.
[[nodiscard]] double metric_product(const Mat3& g, const Vec& a, const Vec& b) noexcept;

/// det g via leading minors; throws std::domain_error unless positive definite.
[[nodiscard]] double checked_determinant(const Mat3& g);

/**
 * Sum over segments of sqrt(N^2 dt^2 - g_ij dx^i dx^j) with N and g sampled
 * at segment midpoints; each worldline segment is split into `subdivisions`
 * equal pieces. Throws std::domain_error for a spacelike piece.
 */
[[nodiscard]] double proper_time_foliated(const Worldline& w, const Foliation& f, std::size_t subdivisions = 1);

/// Length sum sqrt(g_ij dx^i dx^j) along a polyline on slice t, midpoint
/// sampled, each segment split into `subdivisions` pieces.
[[nodiscard]] double proper_length(const std::vector<Vec>& curve, const Foliation& f, double t,
                                   std::size_t subdivisions = 1);

/// N = (det g)^(-1/2).
[[nodiscard]] double unimodular_lapse(const Mat3& g);

/// Default synchrony tolerance in slice-time units.
inline constexpr double kSynchronyTolerance = 1e-9;

struct ClockPairReport {
    Worldline clock1;
    Worldline clock2;
    double start1, end1, start2, end2;
    double tau1 = 0.0;
    double tau2 = 0.0;
    bool simultaneous = false;
    bool synchronous = false;

    [[nodiscard]] double tau_difference() const noexcept { return tau1 - tau2; }
};

/// Compares two clocks that each run between their own slice labels.
[[nodiscard]] ClockPairReport compare_clocks(const Worldline& clock1, double start1, double end1,
                                             const Worldline& clock2, double start2, double end2,
                                             const Foliation& f, double tol = kSynchronyTolerance,
                                             std::size_t subdivisions = 1);

/// Both clocks between slices t1 and t2. Throws std::invalid_argument if either
/// worldline does not span [t1, t2].
[[nodiscard]] ClockPairReport synchrony_report(const Worldline& clock1, const Worldline& clock2, const Foliation& f,
                                               double t1, double t2, double tol = kSynchronyTolerance,
                                               std::size_t subdivisions = 1);

}  // namespace hvsim::kin
