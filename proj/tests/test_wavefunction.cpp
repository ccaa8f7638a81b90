#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "hvsim/error.hpp"
#include "hvsim/wavefunction.hpp"

using namespace hvsim;
using namespace hvsim::wave;

namespace {

// Lowest eigenvector of the 3-point finite-difference Hamiltonian
// -(1/2m) d^2/dx^2 + V with Dirichlet walls, computed independently by Eigen.
std::vector<cplx> discrete_ground_state(const Axis& ax, double mass, const std::vector<double>& v) {
    const auto n = static_cast<Eigen::Index>(ax.nodes);
    const double h = ax.spacing();
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        H(j, j) = 1.0 / (mass * h * h) + v[static_cast<std::size_t>(j)];
        if (j + 1 < n) H(j, j + 1) = H(j + 1, j) = -1.0 / (2.0 * mass * h * h);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    const Eigen::VectorXd g = es.eigenvectors().col(0);
    std::vector<cplx> out(ax.nodes);
    for (std::size_t j = 0; j < ax.nodes; ++j) out[j] = g(static_cast<Eigen::Index>(j)) / std::sqrt(h);
    return out;
}

ModeWavefunction two_mode_box() {
    return ModeWavefunction::normalized(2, {M_PI, M_PI}, {1.0, 1.0},
                                        {{{1, 1}, cplx(1.0, 0.0)}, {{2, 1}, cplx(0.0, 1.0)}});
}

std::vector<Axis> box_axes(std::size_t n) {
    return {{0.0, M_PI, n, Boundary::Wall}, {0.0, M_PI, n, Boundary::Wall}};
}

}  // namespace

TEST_CASE("grid construction checks") {
    const Axis small{0.0, 1.0, 8, Boundary::Wall};
    CHECK_THROWS(GridWavefunction({small}, {1.0, 1.0}, std::vector<cplx>(8, cplx(1.0))));
    const Axis ax{0.0, 1.0, 32, Boundary::Wall};
    CHECK_THROWS(GridWavefunction({ax}, {1.0, 1.0}, std::vector<cplx>(32, cplx(1.0))));  // not normalized
    std::vector<cplx> bad(32, cplx(1.0 / std::sqrt(32 * ax.spacing())));
    bad[3] = cplx(NAN, 0.0);
    CHECK_THROWS(GridWavefunction({ax}, {1.0, 1.0}, bad));
    const auto g = GridWavefunction::from_function({ax}, {1.0, 1.0}, [](const Point& x) { return x[0] * (1 - x[0]); });
    CHECK(g.norm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("steps = 0 is the identity") {
    const auto g = GridWavefunction::from_function(box_axes(24), {1.0, 1.0},
                                                   [](const Point& x) { return cplx(std::sin(x[0]), std::sin(2 * x[1])); });
    const auto e = evolve_grid(g, 1e-3, 0);
    CHECK(e.amplitudes() == g.amplitudes());
}

TEST_CASE("harmonic ground state is stationary") {
    const Axis ax{-8.0, 8.0, 200, Boundary::Wall};
    std::vector<double> v(ax.nodes);
    for (std::size_t j = 0; j < ax.nodes; ++j) v[j] = 0.5 * ax.node(j) * ax.node(j);
    Potential pot;
    pot.axis[0] = v;
    const GridWavefunction g({ax}, {1.0, 1.0}, discrete_ground_state(ax, 1.0, v), pot);
    const auto e = evolve_grid(g, 1e-2, 100);
    double worst = 0.0;
    for (std::size_t j = 0; j < ax.nodes; ++j)
        worst = std::max(worst, std::abs(std::abs(e.amplitudes()[j]) - std::abs(g.amplitudes()[j])));
    CHECK(worst < 1e-6);
    CHECK(e.norm() == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("free plane wave rotates by the dispersion phase") {
    const double len = 2.0 * M_PI;
    const std::size_t n = 128;
    const Axis ax{0.0, len, n, Boundary::Periodic};
    const double k = 3.0, m = 1.0, dt = 1e-3;
    const std::size_t steps = 500;
    const auto g = GridWavefunction::from_function({ax}, {m, 1.0}, [&](const Point& x) { return std::polar(1.0, k * x[0]); });
    const auto e = evolve_grid(g, dt, steps);
    const double t = dt * steps;
    // Crank-Nicolson applied to the discrete eigenvalue of the 3-point Laplacian.
    const double h = ax.spacing();
    const double e_disc = (1.0 - std::cos(k * h)) / (m * h * h);
    const double phase_cn = -2.0 * std::atan(0.5 * dt * e_disc) * steps;
    const double phase_exact = -k * k * t / (2.0 * m);
    for (std::size_t j = 0; j < n; j += 17) {
        const cplx ratio = e.amplitudes()[j] / g.amplitudes()[j];
        CHECK(std::abs(ratio) == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(std::abs(std::arg(ratio * std::polar(1.0, -phase_cn))) < 1e-9);
        // Leading dispersion error of the 3-point Laplacian: k^4 h^2 / (24 m) per unit time.
        CHECK(std::abs(std::arg(ratio * std::polar(1.0, -phase_exact))) < 1.1 * k * k * k * k * h * h * t / (24.0 * m));
    }
}

TEST_CASE("grid evolution is unitary, linear and conserves energy") {
    const auto axes = box_axes(48);
    Potential pot;
    for (int i = 0; i < 2; ++i) {
        pot.axis[i].resize(48);
        for (std::size_t j = 0; j < 48; ++j) pot.axis[i][j] = 0.3 * std::cos(axes[i].node(j));
    }
    pot.coupling.resize(48 * 48);
    for (std::size_t f = 0; f < pot.coupling.size(); ++f) pot.coupling[f] = 0.1 * std::sin(double(f % 48) * 0.1);
    const auto a = GridWavefunction::from_function(axes, {1.0, 0.7}, [](const Point& x) {
        return cplx(std::sin(x[0]) * std::sin(x[1]), 0.3 * std::sin(2 * x[0]) * std::sin(x[1]));
    }, pot);
    const auto b = GridWavefunction::from_function(axes, {1.0, 0.7}, [](const Point& x) {
        return cplx(0.0, std::sin(3 * x[0]) * std::sin(2 * x[1]));
    }, pot);
    const auto ea = evolve_grid(a, 2e-3, 1000);
    CHECK(std::abs(ea.norm() - 1.0) < 1e-8);
    CHECK(std::abs(ea.energy() - a.energy()) / std::abs(a.energy()) < 1e-6);

    const cplx alpha(0.6, 0.0), beta(0.0, 0.8);
    std::vector<cplx> mix(a.size());
    for (std::size_t f = 0; f < mix.size(); ++f) mix[f] = alpha * a.amplitudes()[f] + beta * b.amplitudes()[f];
    double n2 = 0.0;
    for (const auto& c : mix) n2 += std::norm(c);
    const double scale = 1.0 / std::sqrt(n2 * a.cell_volume());
    for (auto& c : mix) c *= scale;
    const auto em = evolve_grid(a.with_amplitudes(mix), 2e-3, 50);
    const auto ea50 = evolve_grid(a, 2e-3, 50);
    const auto eb50 = evolve_grid(b, 2e-3, 50);
    double worst = 0.0;
    for (std::size_t f = 0; f < mix.size(); ++f)
        worst = std::max(worst, std::abs(em.amplitudes()[f] - scale * (alpha * ea50.amplitudes()[f] + beta * eb50.amplitudes()[f])));
    CHECK(worst < 1e-12);
}

TEST_CASE("mode evolution") {
    const auto psi = two_mode_box();
    CHECK(psi.norm() == doctest::Approx(1.0).epsilon(1e-12));
    const auto same = evolve_modes(psi, 0.0);
    for (std::size_t k = 0; k < psi.modes().size(); ++k) CHECK(same.modes()[k].coeff == psi.modes()[k].coeff);
    CHECK(psi.modes()[0].energy == doctest::Approx(1.0));
    CHECK(psi.modes()[1].energy == doctest::Approx(2.5));

    const ModeWavefunction single(2, {M_PI, M_PI}, {1.0, 1.0}, {{{2, 3}, cplx(0.0, 1.0)}});
    for (double t : {0.0, 0.37, 5.0})
        CHECK(std::abs(single.sample({0.4, 1.3}, t).psi) == doctest::Approx(std::abs(single.sample({0.4, 1.3}, 0.0).psi)).epsilon(1e-14));

    const double period = 2.0 * M_PI / (2.5 - 1.0);
    const auto later = evolve_modes(psi, 3.7 * period);
    CHECK(later.norm() == doctest::Approx(1.0).epsilon(1e-12));
    for (const Point& x : {Point{0.3, 0.4}, Point{1.7, 2.9}, Point{2.2, 1.1}}) {
        CHECK(std::abs(psi.density(x, period) - psi.density(x, 0.0)) < 1e-10);
        CHECK(std::abs(psi.density(x, 0.25 * period) - psi.density(x, 0.0)) > 1e-3);
    }
    CHECK_THROWS(ModeWavefunction(2, {M_PI, M_PI}, {1.0, 1.0}, {{{1, 1}, cplx(0.5, 0.0)}}));
}

TEST_CASE("box probability matches brute-force quadrature") {
    const auto psi = two_mode_box();
    const Point lo{0.3, 0.2}, hi{1.1, 2.0};
    const int m = 600;
    double s = 0.0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            s += psi.density({lo[0] + (i + 0.5) * (hi[0] - lo[0]) / m, lo[1] + (j + 0.5) * (hi[1] - lo[1]) / m}, 0.8);
    s *= (hi[0] - lo[0]) * (hi[1] - lo[1]) / (double(m) * m);
    CHECK(psi.box_probability(lo, hi, 0.8) == doctest::Approx(s).epsilon(1e-5));
    CHECK(psi.box_probability({0, 0}, {M_PI, M_PI}, 1.3) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("probability current") {
    const Axis ax{-6.0, 6.0, 64, Boundary::Wall};
    const auto gauss = GridWavefunction::from_function({ax, ax}, {1.0, 1.0},
                                                       [](const Point& x) { return std::exp(-(x[0] * x[0] + x[1] * x[1]) / 2); });
    const auto j = current(gauss, {0.3, -0.7});
    CHECK(j[0] == 0.0);
    CHECK(j[1] == 0.0);

    const Domain box{2, {0.0, 0.0}, {2 * M_PI, 2 * M_PI}, {Boundary::Periodic, Boundary::Periodic}};
    const PlaneWave pw(box, {2.0, -1.0}, {0.5, 2.0});
    const auto jp = current(pw, {1.0, 4.0}, 0.3);
    const double rho = pw.density({1.0, 4.0}, 0.3);
    CHECK(jp[0] == doctest::Approx(2.0 / 0.5 * rho));
    CHECK(jp[1] == doctest::Approx(-1.0 / 2.0 * rho));

    const ModeWavefunction node(1, {M_PI, 1.0}, {1.0, 1.0}, {{{2, 1}, cplx(1.0, 0.0)}});
    CHECK_THROWS_AS(current(node, {M_PI / 2, 0.0}), NodeError);
}

TEST_CASE("continuity residual converges at second order") {
    const auto psi = two_mode_box();
    const double r64 = max_continuity_residual(psi, 64, 0.4);
    const double r128 = max_continuity_residual(psi, 128, 0.4);
    const double r256 = max_continuity_residual(psi, 256, 0.4);
    CHECK(r128 < 1e-3);
    CHECK(r64 / r128 > 3.0);
    CHECK(r64 / r128 < 5.0);
    CHECK(r128 / r256 > 3.0);
    CHECK(r128 / r256 < 5.0);
}

TEST_CASE("grid and mode evolution agree at second order in the spacing") {
    const auto psi = two_mode_box();
    auto err = [&](std::size_t n) {
        const auto axes = box_axes(n);
        const GridWavefunction g(axes, {1.0, 1.0}, sample_on_grid(psi, axes, 0.0));
        // dt small enough that the time error sits well below the spatial one.
        const auto e = evolve_grid(g, 2.5e-4, 2000);
        const auto exact = sample_on_grid(psi, axes, 0.5);
        double worst = 0.0;
        for (std::size_t f = 0; f < exact.size(); ++f)
            worst = std::max(worst, std::abs(std::norm(e.amplitudes()[f]) - std::norm(exact[f])));
        return worst;
    };
    const double e32 = err(31), e64 = err(63);
    CHECK(e64 < 5e-3);
    CHECK(e32 / e64 > 3.0);
    CHECK(e32 / e64 < 5.0);
}

TEST_CASE("grid history interpolates in time") {
    const auto psi = two_mode_box();
    const auto axes = box_axes(63);
    const GridWavefunction g(axes, {1.0, 1.0}, sample_on_grid(psi, axes, 0.0));
    const GridHistory hist(g, 0.0, 1e-3, 10, 40);
    CHECK(hist.t_end() == doctest::Approx(0.39));
    const Point x{1.0, 2.0};
    CHECK(std::abs(hist.sample(x, 0.155).psi - psi.sample(x, 0.155).psi) < 5e-3);
    CHECK_THROWS_AS(hist.sample(x, 0.5), std::out_of_range);
}

TEST_CASE("text serialization round trip") {
    const Axis a0{-1.0, 2.0, 20, Boundary::Wall}, a1{0.0, 1.0, 18, Boundary::Periodic};
    Potential pot;
    pot.axis[0].assign(20, 0.25);
    pot.axis[1].assign(18, -0.5);
    const auto g = GridWavefunction::from_function({a0, a1}, {1.5, 0.5}, [](const Point& x) {
        return cplx(std::exp(-x[0] * x[0]), std::cos(2 * M_PI * x[1]) * 0.1);
    }, pot);
    std::stringstream ss;
    g.write_text(ss);
    const auto r = GridWavefunction::read_text(ss);
    CHECK(r.amplitudes() == g.amplitudes());
    CHECK(r.masses() == g.masses());
    CHECK(r.axes()[1].boundary == Boundary::Periodic);
    CHECK(r.potential().axis[0] == pot.axis[0]);
    std::stringstream bad("hvsim-wavefunction 9\n");
    CHECK_THROWS(GridWavefunction::read_text(bad));
}
