#pragma once

/**
 * @file guidance.hpp
 * @brief First-order guidance law dX/dt = J / |psi|^2 and trajectory
 *        integration.
 */

#include <array>
#include <cstddef>
#include <vector>

#include "hvsim/wavefunction.hpp"

namespace hvsim::guidance {

using wave::Point;
using wave::WaveField;

/// dX/dt = Im(grad psi / psi) / m componentwise. Throws NodeError (carrying
/// |psi|^2) below the node threshold.
[[nodiscard]] std::array<double, 2> velocity(const WaveField& psi, const Point& x, double t);

enum class TrajectoryStatus { Completed, NodeStall };

struct TrajectoryStats {
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t node_rejections = 0;
    double min_density = 0.0;
};

/// Time-ordered samples of X(t); times are strictly monotone in the
/// integration direction and every point lies in the domain.
struct Trajectory {
    std::vector<double> times;
    std::vector<Point> points;
    TrajectoryStats stats;
    TrajectoryStatus status = TrajectoryStatus::Completed;

    [[nodiscard]] const Point& final_point() const { return points.back(); }
    [[nodiscard]] double final_time() const { return times.back(); }
};

struct IntegratorOptions {
    /// Local error bound per unit time.
    double tol = 1e-8;
    /// 0 picks a starting step automatically.
    double initial_step = 0.0;
    /// Steps below this size mean the trajectory is stuck at a node.
    double min_step = 1e-12;
    std::size_t max_steps = 50'000'000;
    /// Record every accepted step; otherwise only the start and `output_times`.
    bool record_all_steps = true;
    /// Times at which the solution is recorded exactly (steps are clipped to
    /// land on them). Must lie between t0 and t1.
    std::vector<double> output_times;
};

/**
 * Integrates the guidance equation from (x0, t0) to t1 with the embedded
 * Dormand-Prince 5(4) pair. A step whose stages touch a node or leave the
 * domain is rejected and shrunk; if the step falls below min_step the
 * trajectory is returned with status NodeStall. Throws NodeError if x0 itself
 * is at a node. t1 < t0 integrates backwards.
 */
[[nodiscard]] Trajectory integrate_trajectory(const WaveField& psi, const Point& x0, double t0, double t1,
                                              const IntegratorOptions& options = {});

}  // namespace hvsim::guidance
