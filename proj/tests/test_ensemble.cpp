#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>

#include "hvsim/ensemble.hpp"
#include "hvsim/error.hpp"

using namespace hvsim;
using namespace hvsim::wave;
using namespace hvsim::ensemble;

namespace {

const Domain kBox{2, {0.0, 0.0}, {M_PI, M_PI}};

ModeWavefunction two_mode_box() {
    return ModeWavefunction::normalized(2, {M_PI, M_PI}, {1.0, 1.0},
                                        {{{1, 1}, cplx(1.0, 0.0)}, {{2, 1}, cplx(0.0, 1.0)}});
}

// Pearson chi-square of observed counts against expected cell probabilities,
// compared with the 99% quantile (cells with expected count below 5 pooled).
bool chi_square_passes(const std::vector<std::uint64_t>& counts, const std::vector<double>& probs, std::size_t n) {
    double stat = 0.0, pooled_obs = 0.0, pooled_exp = 0.0;
    std::size_t cells = 0;
    for (std::size_t k = 0; k < counts.size(); ++k) {
        const double expct = probs[k] * static_cast<double>(n);
        if (expct < 5.0) {
            pooled_obs += static_cast<double>(counts[k]);
            pooled_exp += expct;
            continue;
        }
        stat += (counts[k] - expct) * (counts[k] - expct) / expct;
        ++cells;
    }
    if (pooled_exp > 0.0) {
        stat += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / std::max(pooled_exp, 1e-300);
        ++cells;
    }
    const boost::math::chi_squared dist(static_cast<double>(cells - 1));
    return stat < boost::math::quantile(dist, 0.99);
}

}  // namespace

TEST_CASE("coarse-graining tiles the domain") {
    const CoarseGraining cg = CoarseGraining::from_edge(kBox, M_PI / 16.0);
    CHECK(cg.cell_count() == 256);
    CHECK(cg.edge()[0] == doctest::Approx(M_PI / 16));
    CHECK(cg.cell_index({0.0, 0.0}) == 0);
    CHECK(cg.cell_index({M_PI, M_PI}) == 255);
    CHECK(cg.label(17) == "(1,1)");
    CHECK_THROWS(CoarseGraining::from_edge(kBox, 1.0));
    double area = 0.0;
    for (std::size_t c = 0; c < cg.cell_count(); ++c)
        area += (cg.cell_hi(c)[0] - cg.cell_lo(c)[0]) * (cg.cell_hi(c)[1] - cg.cell_lo(c)[1]);
    CHECK(area == doctest::Approx(M_PI * M_PI).epsilon(1e-12));
}

TEST_CASE("uniform sampling gives uniform cell counts") {
    const auto e = sample_density(kBox, [](const Point&) { return 1.0 / (M_PI * M_PI); }, 40000, 3);
    const CoarseGraining cg(kBox, {8, 8});
    const auto h = histogram(e, cg);
    CHECK(h.total == doctest::Approx(1.0).epsilon(1e-12));
    const double expct = 40000.0 / 64.0;
    for (auto c : h.counts) CHECK(std::abs(double(c) - expct) < 4.0 * std::sqrt(expct * (1.0 - 1.0 / 64)));
    for (const auto& p : e.points) CHECK(kBox.contains(p));
}

TEST_CASE("rejection sampling passes chi-square against |psi|^2 and tilted targets") {
    const auto psi = two_mode_box();
    const CoarseGraining cg(kBox, {10, 10});
    const auto q = cell_masses(psi, 0.0, cg);
    const std::size_t n = 50000;
    const auto eq = sample_density(kBox, [&](const Point& x) { return psi.density(x, 0.0); }, n, 11);
    CHECK(chi_square_passes(histogram(eq, cg).counts, q, n));

    // |psi|^2 (1 + 0.5 s(x)) with s = +1 on the left half, -1 on the right:
    // cell probabilities follow from the untilted ones.
    auto sign = [](const Point& x) { return x[0] < M_PI / 2 ? 1.0 : -1.0; };
    const auto tilted = sample_density(kBox, [&](const Point& x) { return psi.density(x, 0.0) * (1.0 + 0.5 * sign(x)); }, n, 12);
    std::vector<double> qt(q.size());
    double z = 0.0;
    for (std::size_t k = 0; k < q.size(); ++k) {
        const Point mid{(cg.cell_lo(k)[0] + cg.cell_hi(k)[0]) / 2, 0.0};
        qt[k] = q[k] * (1.0 + 0.5 * sign(mid));
        z += qt[k];
    }
    for (auto& v : qt) v /= z;
    CHECK(chi_square_passes(histogram(tilted, cg).counts, qt, n));
    CHECK_FALSE(chi_square_passes(histogram(tilted, cg).counts, q, n));
}

TEST_CASE("sampling failures") {
    // A spike of width 1e-4 with a lattice-missing envelope: acceptance far below 1e-4.
    auto spike = [](const Point& x) { return std::abs(x[0] - 1.0) < 1e-5 && std::abs(x[1] - 1.0) < 1e-5 ? 1.0 : 0.0; };
    CHECK_THROWS_AS(sample_density(kBox, spike, 100, 1, 1.0), NumericalError);
    CHECK_THROWS_AS(sample_density(kBox, [](const Point&) { return 2.0; }, 100, 1, 1.0), NumericalError);
}

TEST_CASE("sampling and evolution are reproducible across worker counts") {
    const auto psi = two_mode_box();
    auto dens = [&](const Point& x) { return psi.density(x, 0.0); };
    const auto a = sample_density(kBox, dens, 9000, 5, 0.0, 1);
    const auto b = sample_density(kBox, dens, 9000, 5, 0.0, 4);
    CHECK(a.points == b.points);
    const auto ea = evolve_ensemble(a, psi, 0.0, 1.0, 1e-7, 1);
    const auto eb = evolve_ensemble(a, psi, 0.0, 1.0, 1e-7, 3);
    CHECK(ea.points == eb.points);
}

TEST_CASE("stationary state leaves the ensemble in place") {
    const ModeWavefunction ground(2, {M_PI, M_PI}, {1.0, 1.0}, {{{1, 1}, cplx(1.0, 0.0)}});
    const auto e = sample_density(kBox, [&](const Point& x) { return ground.density(x, 0.0); }, 2000, 8);
    const auto later = evolve_ensemble(e, ground, 0.0, 2.0, 1e-8);
    const CoarseGraining cg(kBox, {8, 8});
    CHECK(histogram(later, cg).counts == histogram(e, cg).counts);
}

TEST_CASE("equilibrium ensembles track |psi_t|^2, non-equilibrium ones do not") {
    const auto psi = two_mode_box();
    const std::size_t n = 20000;
    const CoarseGraining cg(kBox, {8, 8});
    const auto eq = sample_density(kBox, [&](const Point& x) { return psi.density(x, 0.0); }, n, 21);
    const std::vector<double> times{0.5, 1.5, 2.5, 4.0};
    const auto series = evolve_ensemble_series(eq, psi, 0.0, times, 1e-7);
    for (std::size_t k = 0; k < times.size(); ++k) {
        const auto q = cell_masses(psi, times[k], cg);
        CHECK(l1_distance(histogram(series[k], cg).mass, q) < l1_noise_envelope(q, n));
    }
    const ModeWavefunction ground(2, {M_PI, M_PI}, {1.0, 1.0}, {{{1, 1}, cplx(1.0, 0.0)}});
    const auto neq = sample_density(kBox, [&](const Point& x) { return ground.density(x, 0.0); }, n, 22);
    const auto moved = evolve_ensemble(neq, psi, 0.0, 0.3, 1e-7);
    const auto q = cell_masses(psi, 0.3, cg);
    CHECK(l1_distance(histogram(moved, cg).mass, q) > l1_noise_envelope(q, n));
}

TEST_CASE("too many stalled trajectories is an error") {
    // Velocity -k/(x - 1/2) drives every point into the node at x = 1/2.
    class Sink final : public WaveField {
      public:
        [[nodiscard]] const Domain& domain() const noexcept override { return d_; }
        [[nodiscard]] std::array<double, 2> masses() const noexcept override { return {1.0, 1.0}; }
        [[nodiscard]] FieldSample sample(const Point& x, double) const override {
            const double s = x[0] - 0.5;
            const cplx phase = std::polar(1.0, -0.05 * std::log(std::abs(s)));
            return {s * phase, {phase * cplx(1.0, -0.05), cplx{}}};
        }

      private:
        Domain d_{1, {0.0, 0.0}, {1.0, 1.0}};
    } sink;
    Ensemble e;
    e.domain = sink.domain();
    e.points = {{0.55, 0.0}, {0.6, 0.0}, {0.45, 0.0}};
    CHECK_THROWS_AS(evolve_ensemble(e, sink, 0.0, 1.0, 1e-8), NumericalError);
}

TEST_CASE("coarse-grained H-function") {
    const Domain line{1, {0.0, 0.0}, {1.0, 1.0}};
    const CoarseGraining two(line, {2, 1});
    CHECK(h_function({0.3, 0.7}, {0.3, 0.7}, two) == 0.0);
    CHECK(h_function({1.0, 0.0}, {0.5, 0.5}, two) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    try {
        (void)h_function({0.5, 0.5}, {1.0, 0.0}, two);
        FAIL("expected an empty-support error");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("(1)") != std::string::npos);
    }

    const auto psi = two_mode_box();
    const ModeWavefunction ground(2, {M_PI, M_PI}, {1.0, 1.0}, {{{1, 1}, cplx(1.0, 0.0)}});
    const auto e = sample_density(kBox, [&](const Point& x) { return ground.density(x, 0.0); }, 20000, 31);
    double prev = 0.0;
    for (std::size_t cells : {2, 4, 8, 16}) {
        const CoarseGraining cg(kBox, {cells, cells});
        const double h = h_function(e, psi, 0.0, cg);
        CHECK(h >= 0.0);
        CHECK(h >= prev);
        prev = h;
    }
}

TEST_CASE("L1 envelope scales as n^-1/2") {
    const std::vector<double> q(64, 1.0 / 64);
    CHECK(l1_noise_envelope(q, 40000) == doctest::Approx(l1_noise_envelope(q, 10000) / 2).epsilon(1e-12));
    CHECK(l1_distance({0.2, 0.8}, {0.5, 0.5}) == doctest::Approx(0.6));
}
