#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "hvsim/error.hpp"
#include "hvsim/guidance.hpp"

using namespace hvsim;
using namespace hvsim::wave;
using namespace hvsim::guidance;

namespace {

ModeWavefunction two_mode_box() {
    return ModeWavefunction::normalized(2, {M_PI, M_PI}, {1.0, 1.0},
                                        {{{1, 1}, cplx(1.0, 0.0)}, {{2, 1}, cplx(0.0, 1.0)}});
}

// psi = (x - 1/2) exp(-i k ln|x - 1/2|): velocity -k/(x - 1/2) drives points
// into the node at x = 1/2 in finite time.
class Sink final : public WaveField {
  public:
    [[nodiscard]] const Domain& domain() const noexcept override { return d_; }
    [[nodiscard]] std::array<double, 2> masses() const noexcept override { return {1.0, 1.0}; }
    [[nodiscard]] FieldSample sample(const Point& x, double) const override {
        const double s = x[0] - 0.5;
        const cplx phase = std::polar(1.0, -k_ * std::log(std::abs(s)));
        return {s * phase, {phase * cplx(1.0, -k_), cplx{}}};
    }

  private:
    Domain d_{1, {0.0, 0.0}, {1.0, 1.0}};
    double k_ = 0.05;
};

}  // namespace

TEST_CASE("velocity field") {
    const Axis ax{-6.0, 6.0, 64, Boundary::Wall};
    const auto gauss = GridWavefunction::from_function({ax, ax}, {1.0, 1.0},
                                                       [](const Point& x) { return std::exp(-(x[0] * x[0] + x[1] * x[1]) / 2); });
    for (const Point& x : {Point{0.0, 0.0}, Point{1.2, -2.5}}) {
        const auto v = velocity(gauss, x, 0.0);
        CHECK(v[0] == 0.0);
        CHECK(v[1] == 0.0);
    }
    const Domain box{2, {0.0, 0.0}, {2 * M_PI, 2 * M_PI}, {Boundary::Periodic, Boundary::Periodic}};
    const PlaneWave pw(box, {3.0, -2.0}, {1.5, 0.5});
    for (const Point& x : {Point{0.1, 0.2}, Point{5.0, 3.3}}) {
        const auto v = velocity(pw, x, 0.7);
        CHECK(v[0] == doctest::Approx(2.0));
        CHECK(v[1] == doctest::Approx(-4.0));
    }
    const ModeWavefunction ground(2, {M_PI, M_PI}, {1.0, 1.0}, {{{1, 1}, cplx(0.0, 1.0)}});
    const auto v = velocity(ground, {0.4, 2.0}, 3.0);
    CHECK(std::abs(v[0]) < 1e-14);
    CHECK(std::abs(v[1]) < 1e-14);

    const ModeWavefunction excited(1, {M_PI, 1.0}, {1.0, 1.0}, {{{2, 1}, cplx(1.0, 0.0)}});
    try {
        (void)velocity(excited, {M_PI / 2, 0.0}, 0.0);
        FAIL("expected a node error");
    } catch (const NodeError& e) {
        CHECK(e.density() < 1e-20);
    }
}

TEST_CASE("stationary and uniform-velocity trajectories") {
    const ModeWavefunction ground(2, {M_PI, M_PI}, {1.0, 1.0}, {{{1, 1}, cplx(1.0, 0.0)}});
    const auto still = integrate_trajectory(ground, {0.5, 2.5}, 0.0, 10.0);
    CHECK(still.status == TrajectoryStatus::Completed);
    CHECK(still.final_point()[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(still.final_point()[1] == doctest::Approx(2.5).epsilon(1e-12));

    const Domain box{2, {0.0, 0.0}, {20.0, 20.0}, {Boundary::Periodic, Boundary::Periodic}};
    const PlaneWave pw(box, {2 * M_PI * 3 / 20.0, 2 * M_PI / 20.0}, {2.0, 1.0});
    const double tol = 1e-9;
    const auto tr = integrate_trajectory(pw, {1.0, 2.0}, 0.5, 3.5, {tol});
    const double vx = 2 * M_PI * 3 / 20.0 / 2.0, vy = 2 * M_PI / 20.0;
    CHECK(std::abs(tr.final_point()[0] - (1.0 + 3.0 * vx)) < 3.0 * tol);
    CHECK(std::abs(tr.final_point()[1] - (2.0 + 3.0 * vy)) < 3.0 * tol);
}

TEST_CASE("trajectory samples are ordered and inside the domain") {
    const auto psi = two_mode_box();
    const auto tr = integrate_trajectory(psi, {1.0, 1.2}, 0.0, 5.0, {1e-8});
    CHECK(tr.times.size() == tr.points.size());
    CHECK(tr.stats.accepted + 1 == tr.times.size());
    for (std::size_t k = 1; k < tr.times.size(); ++k) CHECK(tr.times[k] > tr.times[k - 1]);
    for (const auto& p : tr.points) CHECK(psi.domain().contains(p));
    CHECK(tr.stats.min_density > 0.0);

    IntegratorOptions opt{1e-8};
    opt.record_all_steps = false;
    opt.output_times = {1.0, 2.5, 4.0};
    const auto sparse = integrate_trajectory(psi, {1.0, 1.2}, 0.0, 5.0, opt);
    CHECK(sparse.times == std::vector<double>{0.0, 1.0, 2.5, 4.0, 5.0});
}

TEST_CASE("time reversal returns to the start") {
    const auto psi = two_mode_box();
    const double tol = 1e-9;
    for (const Point& x0 : {Point{0.7, 0.9}, Point{2.0, 2.4}, Point{1.4, 0.3}}) {
        const auto fwd = integrate_trajectory(psi, x0, 0.0, 4.0, {tol});
        const auto back = integrate_trajectory(psi, fwd.final_point(), 4.0, 0.0, {tol});
        CHECK(back.times.back() == 0.0);
        for (std::size_t k = 1; k < back.times.size(); ++k) CHECK(back.times[k] < back.times[k - 1]);
        CHECK(std::hypot(back.final_point()[0] - x0[0], back.final_point()[1] - x0[1]) < 10.0 * tol * 4.0);
    }
}

TEST_CASE("self-convergence with step size is at least second order") {
    const auto psi = two_mode_box();
    const Point x0{0.9, 1.1};
    const double t1 = 3.0;
    const auto ref = integrate_trajectory(psi, x0, 0.0, t1, {1e-13});
    std::vector<double> h, err;
    for (double tol : {1e-4, 1e-5, 1e-6, 1e-7}) {
        const auto tr = integrate_trajectory(psi, x0, 0.0, t1, {tol});
        h.push_back(t1 / static_cast<double>(tr.stats.accepted));
        err.push_back(std::hypot(tr.final_point()[0] - ref.final_point()[0], tr.final_point()[1] - ref.final_point()[1]));
    }
    // Least-squares slope of log err against log mean step.
    double mx = 0, my = 0;
    for (std::size_t k = 0; k < h.size(); ++k) {
        mx += std::log(h[k]) / h.size();
        my += std::log(err[k]) / h.size();
    }
    double sxx = 0, sxy = 0;
    for (std::size_t k = 0; k < h.size(); ++k) {
        sxx += (std::log(h[k]) - mx) * (std::log(h[k]) - mx);
        sxy += (std::log(h[k]) - mx) * (std::log(err[k]) - my);
    }
    CHECK(sxy / sxx >= 2.0);
    CHECK(err.back() < err.front());
}

TEST_CASE("trajectories do not cross") {
    // 1D: a single-valued velocity field preserves the ordering of points.
    const auto psi = ModeWavefunction::normalized(1, {M_PI, 1.0}, {1.0, 1.0},
                                                  {{{1, 1}, cplx(1.0, 0.0)}, {{2, 1}, cplx(0.6, 0.3)}, {{3, 1}, cplx(0.0, 0.4)}});
    IntegratorOptions opt{1e-10};
    opt.record_all_steps = false;
    for (int k = 1; k <= 20; ++k) opt.output_times.push_back(0.25 * k);
    std::vector<Trajectory> trs;
    for (int i = 1; i < 60; ++i) trs.push_back(integrate_trajectory(psi, {M_PI * i / 60.0, 0.0}, 0.0, 5.0, opt));
    for (std::size_t k = 0; k < trs.front().times.size(); ++k)
        for (std::size_t i = 1; i < trs.size(); ++i) CHECK(trs[i].points[k][0] > trs[i - 1].points[k][0]);

    // 2D: pairwise minimum separation stays positive.
    const auto psi2 = two_mode_box();
    std::vector<Trajectory> t2;
    for (int i = 1; i < 8; ++i)
        for (int j = 1; j < 8; ++j) t2.push_back(integrate_trajectory(psi2, {M_PI * i / 8, M_PI * j / 8}, 0.0, 5.0, opt));
    double min_sep = 1e300;
    for (std::size_t k = 0; k < t2.front().times.size(); ++k)
        for (std::size_t a = 0; a < t2.size(); ++a)
            for (std::size_t b = a + 1; b < t2.size(); ++b)
                min_sep = std::min(min_sep, std::hypot(t2[a].points[k][0] - t2[b].points[k][0],
                                                       t2[a].points[k][1] - t2[b].points[k][1]));
    CHECK(min_sep > 1e-6);
}

TEST_CASE("node handling") {
    const ModeWavefunction excited(1, {M_PI, 1.0}, {1.0, 1.0}, {{{2, 1}, cplx(1.0, 0.0)}});
    CHECK_THROWS_AS(integrate_trajectory(excited, {M_PI / 2, 0.0}, 0.0, 1.0), NodeError);

    const Sink sink;
    // (x - 1/2)^2 = 0.01 - 2 k t reaches zero at t = 0.1.
    const auto tr = integrate_trajectory(sink, {0.6, 0.0}, 0.0, 0.5, {1e-8});
    CHECK(tr.status == TrajectoryStatus::NodeStall);
    CHECK(tr.final_time() < 0.1 + 1e-6);
    CHECK(tr.final_time() > 0.09);
    CHECK(tr.stats.rejected > 0);
    for (std::size_t k = 1; k < tr.times.size(); ++k) CHECK(tr.times[k] > tr.times[k - 1]);
}
