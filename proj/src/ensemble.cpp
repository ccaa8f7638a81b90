#include "hvsim/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <boost/math/quadrature/gauss.hpp>

#include "hvsim/error.hpp"
#include "hvsim/random.hpp"

namespace hvsim::ensemble {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr std::size_t kSampleChunk = 4096;
}

// ---------------------------------------------------------------------------
// CoarseGraining

CoarseGraining::CoarseGraining(const Domain& domain, std::array<std::size_t, 2> cells)
    : domain_(domain), cells_(cells) {
    if (domain.dim == 1) cells_[1] = 1;
    for (std::size_t i = 0; i < domain.dim; ++i)
        if (cells_[i] < 1) throw std::invalid_argument("coarse-graining needs at least one cell per axis");
}

CoarseGraining CoarseGraining::from_edge(const Domain& domain, double edge) {
    if (!(edge > 0.0)) throw std::invalid_argument("cell edge must be positive");
    std::array<std::size_t, 2> cells{1, 1};
    for (std::size_t i = 0; i < domain.dim; ++i) {
        const double ratio = (domain.hi[i] - domain.lo[i]) / edge;
        const double r = std::round(ratio);
        if (r < 1.0 || std::abs(ratio - r) > 1e-9 * ratio)
            throw std::invalid_argument("cell edge does not tile the domain exactly");
        cells[i] = static_cast<std::size_t>(r);
    }
    return CoarseGraining(domain, cells);
}

std::size_t CoarseGraining::cell_count() const noexcept { return cells_[0] * cells_[1]; }

std::array<double, 2> CoarseGraining::edge() const noexcept {
    std::array<double, 2> e{1.0, 1.0};
    for (std::size_t i = 0; i < domain_.dim; ++i) e[i] = (domain_.hi[i] - domain_.lo[i]) / cells_[i];
    return e;
}

std::size_t CoarseGraining::cell_index(const Point& x) const noexcept {
    std::size_t idx[2] = {0, 0};
    for (std::size_t i = 0; i < domain_.dim; ++i) {
        const double f = (x[i] - domain_.lo[i]) / (domain_.hi[i] - domain_.lo[i]);
        const auto k = static_cast<long>(std::floor(f * static_cast<double>(cells_[i])));
        idx[i] = static_cast<std::size_t>(std::clamp<long>(k, 0, static_cast<long>(cells_[i]) - 1));
    }
    return idx[0] * cells_[1] + idx[1];
}

Point CoarseGraining::cell_lo(std::size_t cell) const noexcept {
    const auto e = edge();
    return {domain_.lo[0] + e[0] * static_cast<double>(cell / cells_[1]),
            domain_.dim > 1 ? domain_.lo[1] + e[1] * static_cast<double>(cell % cells_[1]) : 0.0};
}

Point CoarseGraining::cell_hi(std::size_t cell) const noexcept {
    const auto e = edge();
    const Point lo = cell_lo(cell);
    return {lo[0] + e[0], domain_.dim > 1 ? lo[1] + e[1] : 1.0};
}

std::string CoarseGraining::label(std::size_t cell) const {
    std::ostringstream os;
    if (domain_.dim == 1) os << '(' << cell << ')';
    else os << '(' << cell / cells_[1] << ',' << cell % cells_[1] << ')';
    return os.str();
}

// ---------------------------------------------------------------------------
// Sampling

Ensemble sample_density(const Domain& domain, const DensityFn& density, std::size_t n, std::uint64_t seed,
                        double bound, unsigned workers, std::string source) {
    if (n == 0) throw std::invalid_argument("ensemble size must be positive");
    if (bound <= 0.0) {
        const std::size_t m = 257;
        const std::size_t m1 = domain.dim > 1 ? m : 1;
        double peak = 0.0;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m1; ++j) {
                const Point x{domain.lo[0] + (domain.hi[0] - domain.lo[0]) * (i + 0.5) / m,
                              domain.dim > 1 ? domain.lo[1] + (domain.hi[1] - domain.lo[1]) * (j + 0.5) / m : 0.0};
                peak = std::max(peak, density(x));
            }
        if (!(peak > 0.0)) throw NumericalError("density vanishes on the sampling lattice");
        bound = 1.5 * peak;
    }
    Ensemble e;
    e.domain = domain;
    e.seed = seed;
    e.source = std::move(source);
    e.points.resize(n);
    const std::size_t nchunks = (n + kSampleChunk - 1) / kSampleChunk;
    parallel_for(nchunks, workers, [&](std::size_t c) {
        Rng rng = make_rng(seed, c);
        const std::size_t begin = c * kSampleChunk;
        const std::size_t end = std::min(n, begin + kSampleChunk);
        std::size_t attempts = 0;
        for (std::size_t i = begin; i < end;) {
            Point x{0.0, 0.0};
            for (std::size_t a = 0; a < domain.dim; ++a)
                x[a] = domain.lo[a] + (domain.hi[a] - domain.lo[a]) * uniform01(rng);
            const double p = density(x);
            if (!(p >= 0.0) || !std::isfinite(p)) throw NumericalError("density is negative or non-finite");
            if (p > bound) throw NumericalError("density exceeds the rejection envelope; raise the bound");
            ++attempts;
            if (uniform01(rng) * bound < p) e.points[i++] = x;
            if (attempts >= 100'000 && static_cast<double>(i - begin) < 1e-4 * static_cast<double>(attempts))
                throw NumericalError("rejection acceptance rate below 1e-4; rescale the envelope bound");
        }
    });
    return e;
}

// ---------------------------------------------------------------------------
// Transport

std::vector<Ensemble> evolve_ensemble_series(const Ensemble& e, const WaveField& psi, double t0,
                                             const std::vector<double>& times, double tol, unsigned workers) {
    if (times.empty()) throw std::invalid_argument("no output times requested");
    const double t1 = times.back();
    std::vector<Ensemble> out(times.size());
    for (auto& o : out) {
        o.domain = e.domain;
        o.source = e.source;
        o.seed = e.seed;
        o.points.resize(e.size());
    }
    std::vector<char> stalled(e.size(), 0);
    guidance::IntegratorOptions opt;
    opt.tol = tol;
    opt.record_all_steps = false;
    opt.output_times = times;
    const std::size_t chunk = 256;
    const std::size_t nchunks = (e.size() + chunk - 1) / chunk;
    parallel_for(nchunks, workers, [&](std::size_t c) {
        for (std::size_t i = c * chunk; i < std::min(e.size(), (c + 1) * chunk); ++i) {
            const auto tr = guidance::integrate_trajectory(psi, e.points[i], t0, t1, opt);
            // Recorded samples: start, then one per output time reached.
            std::size_t r = 0;
            for (std::size_t k = 0; k < times.size(); ++k) {
                // Advance to the sample at times[k] if present, else keep the last one.
                while (r + 1 < tr.times.size() && (tr.times[r + 1] - t0) * (t1 - t0) <= (times[k] - t0) * (t1 - t0)) ++r;
                out[k].points[i] = tr.points[r];
            }
            if (tr.status == guidance::TrajectoryStatus::NodeStall) stalled[i] = 1;
        }
    });
    std::vector<std::size_t> stalled_idx;
    for (std::size_t i = 0; i < stalled.size(); ++i)
        if (stalled[i]) stalled_idx.push_back(i);
    if (static_cast<double>(stalled_idx.size()) > kMaxStalledFraction * static_cast<double>(e.size())) {
        std::ostringstream msg;
        msg << stalled_idx.size() << " of " << e.size()
            << " trajectories stalled at nodes; refine the wavefunction grid or tighten the tolerance";
        throw NumericalError(msg.str());
    }
    for (auto& o : out) o.stalled = stalled_idx;
    return out;
}

Ensemble evolve_ensemble(const Ensemble& e, const WaveField& psi, double t0, double t1, double tol, unsigned workers) {
    return std::move(evolve_ensemble_series(e, psi, t0, {t1}, tol, workers).front());
}

// ---------------------------------------------------------------------------
// Histograms and the H-function

DensityHistogram histogram(const Ensemble& e, const CoarseGraining& cg) {
    DensityHistogram h;
    h.counts.assign(cg.cell_count(), 0);
    for (const auto& x : e.points) ++h.counts[cg.cell_index(x)];
    h.mass.resize(h.counts.size());
    const double n = static_cast<double>(e.size());
    for (std::size_t k = 0; k < h.counts.size(); ++k) h.mass[k] = static_cast<double>(h.counts[k]) / n;
    // Pairwise summation over the fixed cell order.
    std::vector<double> tmp = h.mass;
    while (tmp.size() > 1) {
        std::vector<double> next((tmp.size() + 1) / 2);
        for (std::size_t k = 0; k < next.size(); ++k)
            next[k] = tmp[2 * k] + (2 * k + 1 < tmp.size() ? tmp[2 * k + 1] : 0.0);
        tmp.swap(next);
    }
    h.total = tmp.empty() ? 0.0 : tmp.front();
    return h;
}

std::vector<double> cell_masses(const wave::ModeWavefunction& psi, double t, const CoarseGraining& cg) {
    std::vector<double> m(cg.cell_count());
    for (std::size_t k = 0; k < m.size(); ++k) m[k] = psi.box_probability(cg.cell_lo(k), cg.cell_hi(k), t);
    return m;
}

std::vector<double> cell_masses(const WaveField& psi, double t, const CoarseGraining& cg, int order) {
    if (order < 1 || order > 64) throw std::invalid_argument("quadrature order out of range");
    // Gauss-Legendre nodes on [-1, 1] via boost's 20-point rule applied per sub-panel.
    using Gauss = boost::math::quadrature::gauss<double, 20>;
    const std::size_t dim = cg.domain().dim;
    std::vector<double> m(cg.cell_count());
    for (std::size_t k = 0; k < m.size(); ++k) {
        const Point lo = cg.cell_lo(k);
        const Point hi = cg.cell_hi(k);
        if (dim == 1) {
            m[k] = Gauss::integrate([&](double x) { return psi.density({x, 0.0}, t); }, lo[0], hi[0]);
        } else {
            m[k] = Gauss::integrate(
                [&](double x) {
                    return Gauss::integrate([&](double y) { return psi.density({x, y}, t); }, lo[1], hi[1]);
                },
                lo[0], hi[0]);
        }
    }
    return m;
}

double h_function(const std::vector<double>& p, const std::vector<double>& q, const CoarseGraining& cg) {
    if (p.size() != q.size() || p.size() != cg.cell_count())
        throw std::invalid_argument("histogram sizes do not match the coarse-graining");
    double h = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        if (p[k] <= 0.0) continue;
        if (!(q[k] > 0.0))
            throw NumericalError("ensemble occupies cell " + cg.label(k) + " where |psi|^2 has no mass");
        h += p[k] * std::log(p[k] / q[k]);
    }
    return h;
}

double h_function(const Ensemble& e, const wave::ModeWavefunction& psi, double t, const CoarseGraining& cg) {
    return h_function(histogram(e, cg).mass, cell_masses(psi, t, cg), cg);
}

double l1_distance(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size()) throw std::invalid_argument("histogram sizes differ");
    double s = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) s += std::abs(p[k] - q[k]);
    return s;
}

double l1_noise_envelope(const std::vector<double>& q, std::size_t n, double k_sigma) {
    const double dn = static_cast<double>(n);
    double mean = 0.0, var = 0.0;
    for (double qk : q) {
        const double v = std::max(qk * (1.0 - qk), 0.0) / dn;
        mean += std::sqrt(2.0 * v / kPi);
        var += v * (1.0 - 2.0 / kPi);
    }
    return mean + k_sigma * std::sqrt(var);
}

}  // namespace hvsim::ensemble
