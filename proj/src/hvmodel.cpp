#include "hvsim/hvmodel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <boost/math/quadrature/gauss.hpp>

#include "hvsim/error.hpp"

namespace hvsim::hv {

namespace {

constexpr double kUnitTolerance = 1e-12;

struct IntSums {
    std::int64_t sum = 0;
    std::int64_t sum_sq = 0;
};

MonteCarloEstimate finish(std::int64_t sum, std::int64_t sum_sq, std::size_t n) {
    MonteCarloEstimate est;
    est.samples = n;
    const double dn = static_cast<double>(n);
    est.estimate = static_cast<double>(sum) / dn;
    if (n > 1) {
        const double var = (static_cast<double>(sum_sq) / dn - est.estimate * est.estimate) *
                           dn / (dn - 1.0);
        est.std_error = std::sqrt(std::max(var, 0.0) / dn);
    }
    return est;
}

void require_samples(std::size_t n) {
    if (n < 1) throw std::invalid_argument("Monte Carlo sample count must be >= 1");
}

int outcome_at(Wing wing, const Outcomes& o) { return wing == Wing::A ? o.a : o.b; }

// lambda boxes of T(-,+) and T(+,-) at wing B for theta_old -> theta_new.
void wing_b_boxes(double th_old, double th_new, std::vector<LambdaBox>& mp,
                  std::vector<LambdaBox>& pm) {
    auto push = [](std::vector<LambdaBox>& v, double u_lo, double u_hi, double w_lo, double w_hi) {
        if (w_hi > w_lo) v.push_back({u_lo, u_hi, w_lo, w_hi});
    };
    // u < 1/2: sigma_A = +1, sigma_B = -1 iff w < theta.
    push(mp, 0.0, 0.5, th_new, th_old);
    push(pm, 0.0, 0.5, th_old, th_new);
    // u >= 1/2: sigma_A = -1, sigma_B = +1 iff w < theta.
    push(mp, 0.5, 1.0, th_old, th_new);
    push(pm, 0.5, 1.0, th_new, th_old);
}

}  // namespace

BlochSetting::BlochSetting(const Vec3& m) {
    const double n = m.norm();
    if (!m.finite() || n == 0.0) throw std::invalid_argument("Bloch setting must be a finite non-zero vector");
    m_ = (1.0 / n) * m;
}

Polarization::Polarization(const Vec3& p) : p_(p) {
    if (!p.finite()) throw std::invalid_argument("polarization must be finite");
    if (p.norm() > 1.0 + kUnitTolerance)
        throw std::invalid_argument("unphysical polarization: |P| > 1");
}

std::string to_string(Wing wing) { return wing == Wing::A ? "A" : "B"; }

BornProbabilities born_probabilities(const BlochSetting& m, const Polarization& p) {
    const double mp = std::clamp(m.vec().dot(p.vec()), -1.0, 1.0);
    return {0.5 * (1.0 + mp), 0.5 * (1.0 - mp)};
}

double anti_alignment_threshold(const BlochSetting& m_a, const BlochSetting& m_b) {
    return std::clamp(0.5 * (1.0 + m_a.dot(m_b)), 0.0, 1.0);
}

Outcomes singlet_outcomes(const BlochSetting& m_a, const BlochSetting& m_b, const HVSample& lambda) {
    if (!(lambda.u >= 0.0 && lambda.u < 1.0 && lambda.w >= 0.0 && lambda.w < 1.0))
        throw std::invalid_argument("hidden variable outside [0,1)^2");
    const int a = lambda.u < 0.5 ? +1 : -1;
    const int b = lambda.w < anti_alignment_threshold(m_a, m_b) ? -a : a;
    return {a, b};
}

// ---------------------------------------------------------------------------
// HVDistribution

HVDistribution HVDistribution::uniform() { return separable({1.0}, {1.0}); }

HVDistribution HVDistribution::separable(std::vector<double> u_masses, std::vector<double> w_masses) {
    auto prepare = [](std::vector<double>& m, std::vector<double>& cdf, const char* axis) {
        if (m.empty()) throw std::invalid_argument(std::string("empty bin masses for axis ") + axis);
        double total = 0.0;
        for (double x : m) {
            if (!(x >= 0.0) || !std::isfinite(x))
                throw std::invalid_argument(std::string("negative or non-finite bin mass on axis ") + axis);
            total += x;
        }
        if (total <= 0.0) throw std::invalid_argument(std::string("zero total mass on axis ") + axis);
        for (double& x : m) x /= total;
        cdf.assign(m.size() + 1, 0.0);
        std::partial_sum(m.begin(), m.end(), cdf.begin() + 1);
        cdf.back() = 1.0;
    };
    HVDistribution d;
    d.u_ = std::move(u_masses);
    d.w_ = std::move(w_masses);
    prepare(d.u_, d.u_cdf_, "u");
    prepare(d.w_, d.w_cdf_, "w");
    // Midpoint panels aligned with both bin grids integrate the step density exactly.
    const std::size_t panels = std::lcm(d.u_.size(), d.w_.size());
    const double q = panels <= 4096 ? d.quadrature_integral(panels * std::max<std::size_t>(1, 256 / panels))
                                    : d.box_mass(0.0, 1.0, 0.0, 1.0);
    if (std::abs(q - 1.0) > 1e-6) throw NumericalError("separable density failed normalization check");
    return d;
}

HVDistribution HVDistribution::general(DensityFn density, double bound) {
    if (!density) throw std::invalid_argument("empty density function");
    if (!(bound > 0.0) || !std::isfinite(bound)) throw std::invalid_argument("density bound must be positive");
    HVDistribution d;
    d.general_ = std::move(density);
    d.bound_ = bound;
    d.norm_ = 1.0;
    // Normalization constant by midpoint quadrature; also checks the bound and sign.
    const std::size_t m = 512;
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double v = d.general_((i + 0.5) / m, (j + 0.5) / m);
            if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("density negative or non-finite");
            if (v > bound) throw std::invalid_argument("density exceeds the declared bound");
            total += v;
        }
    }
    total /= static_cast<double>(m * m);
    if (!(total > 0.0)) throw std::invalid_argument("density integrates to zero");
    d.norm_ = total;
    if (std::abs(d.quadrature_integral() - 1.0) > 1e-6) throw NumericalError("density failed normalization check");
    return d;
}

bool HVDistribution::is_uniform() const noexcept {
    auto flat = [](const std::vector<double>& m) {
        return std::all_of(m.begin(), m.end(), [&](double x) { return std::abs(x * m.size() - 1.0) < 1e-14; });
    };
    return !general_ && flat(u_) && flat(w_);
}

double HVDistribution::density(double u, double w) const {
    if (!(u >= 0.0 && u < 1.0 && w >= 0.0 && w < 1.0)) return 0.0;
    if (general_) return general_(u, w) / norm_;
    const auto iu = std::min(static_cast<std::size_t>(u * u_.size()), u_.size() - 1);
    const auto iw = std::min(static_cast<std::size_t>(w * w_.size()), w_.size() - 1);
    return u_[iu] * static_cast<double>(u_.size()) * w_[iw] * static_cast<double>(w_.size());
}

double HVDistribution::axis_mass(const std::vector<double>& masses, double lo, double hi) {
    lo = std::clamp(lo, 0.0, 1.0);
    hi = std::clamp(hi, 0.0, 1.0);
    if (hi <= lo) return 0.0;
    const auto nb = masses.size();
    double total = 0.0;
    for (std::size_t k = 0; k < nb; ++k) {
        const double a = static_cast<double>(k) / nb;
        const double b = static_cast<double>(k + 1) / nb;
        const double overlap = std::min(hi, b) - std::max(lo, a);
        if (overlap > 0.0) total += masses[k] * overlap * static_cast<double>(nb);
    }
    return total;
}

double HVDistribution::box_mass(double u_lo, double u_hi, double w_lo, double w_hi) const {
    if (!general_) return axis_mass(u_, u_lo, u_hi) * axis_mass(w_, w_lo, w_hi);
    u_lo = std::clamp(u_lo, 0.0, 1.0);
    u_hi = std::clamp(u_hi, 0.0, 1.0);
    w_lo = std::clamp(w_lo, 0.0, 1.0);
    w_hi = std::clamp(w_hi, 0.0, 1.0);
    if (u_hi <= u_lo || w_hi <= w_lo) return 0.0;
    using Gauss = boost::math::quadrature::gauss<double, 30>;
    // Composite rule: 16 x 16 panels of 30-point Gauss-Legendre.
    constexpr int panels = 16;
    const double du = (u_hi - u_lo) / panels;
    const double dw = (w_hi - w_lo) / panels;
    double total = 0.0;
    for (int pu = 0; pu < panels; ++pu) {
        const double a = u_lo + pu * du;
        total += Gauss::integrate(
            [&](double u) {
                double inner = 0.0;
                for (int pw = 0; pw < panels; ++pw) {
                    const double b = w_lo + pw * dw;
                    inner += Gauss::integrate([&](double w) { return density(u, w); }, b, b + dw);
                }
                return inner;
            },
            a, a + du);
    }
    return total;
}

double HVDistribution::quadrature_integral(std::size_t per_axis) const {
    double total = 0.0;
    for (std::size_t i = 0; i < per_axis; ++i)
        for (std::size_t j = 0; j < per_axis; ++j)
            total += density((i + 0.5) / per_axis, (j + 0.5) / per_axis);
    return total / static_cast<double>(per_axis * per_axis);
}

double HVDistribution::axis_draw(const std::vector<double>& cdf, const std::vector<double>& masses,
                                 double r) {
    const auto it = std::upper_bound(cdf.begin() + 1, cdf.end(), r);
    auto k = static_cast<std::size_t>(std::distance(cdf.begin() + 1, it));
    k = std::min(k, masses.size() - 1);
    while (masses[k] == 0.0 && k + 1 < masses.size()) ++k;
    const double frac = masses[k] > 0.0 ? (r - cdf[k]) / masses[k] : 0.0;
    const double nb = static_cast<double>(masses.size());
    const double x = (static_cast<double>(k) + std::clamp(frac, 0.0, 1.0)) / nb;
    return std::min(x, std::nextafter(1.0, 0.0));
}

HVSample HVDistribution::draw(Rng& rng) const {
    if (!general_) {
        const double u = axis_draw(u_cdf_, u_, uniform01(rng));
        const double w = axis_draw(w_cdf_, w_, uniform01(rng));
        return {u, w};
    }
    for (std::size_t attempt = 0; attempt < 100'000'000; ++attempt) {
        const double u = uniform01(rng);
        const double w = uniform01(rng);
        if (uniform01(rng) * bound_ < general_(u, w)) return {u, w};
    }
    throw NumericalError("rejection sampler exhausted its attempt budget; rescale the density bound");
}

// ---------------------------------------------------------------------------
// Monte Carlo statistics

MonteCarloEstimate correlation(const BlochSetting& m_a, const BlochSetting& m_b,
                               const HVDistribution& rho, std::size_t n, std::uint64_t seed,
                               unsigned workers) {
    require_samples(n);
    const auto parts = map_chunks<IntSums>(n, seed, workers, [&](ChunkRange r, Rng& rng) {
        IntSums s;
        for (std::size_t i = r.begin; i < r.end; ++i) {
            const auto o = singlet_outcomes(m_a, m_b, rho.draw(rng));
            s.sum += o.a * o.b;
        }
        s.sum_sq = static_cast<std::int64_t>(r.end - r.begin);
        return s;
    });
    IntSums total;
    for (const auto& p : parts) {
        total.sum += p.sum;
        total.sum_sq += p.sum_sq;
    }
    return finish(total.sum, total.sum_sq, n);
}

MonteCarloEstimate marginal_frequency(Wing wing, const BlochSetting& m_a, const BlochSetting& m_b,
                                      const HVDistribution& rho, std::size_t n, std::uint64_t seed,
                                      unsigned workers) {
    require_samples(n);
    const auto parts = map_chunks<std::int64_t>(n, seed, workers, [&](ChunkRange r, Rng& rng) {
        std::int64_t plus = 0;
        for (std::size_t i = r.begin; i < r.end; ++i)
            plus += outcome_at(wing, singlet_outcomes(m_a, m_b, rho.draw(rng))) > 0 ? 1 : 0;
        return plus;
    });
    const std::int64_t plus = std::accumulate(parts.begin(), parts.end(), std::int64_t{0});
    return finish(plus, plus, n);
}

namespace {

struct TransitionCounts {
    std::int64_t minus_plus = 0;
    std::int64_t plus_minus = 0;
};

// Shared by transition_sets (Monte Carlo) and signal_statistic so that both
// see the identical lambda stream for a given (n, seed).
TransitionCounts count_transitions(Wing wing, const BlochSetting& m_fixed, const BlochSetting& m_old,
                                   const BlochSetting& m_new, const HVDistribution& rho, std::size_t n,
                                   std::uint64_t seed, unsigned workers) {
    const auto parts = map_chunks<TransitionCounts>(n, seed, workers, [&](ChunkRange r, Rng& rng) {
        TransitionCounts c;
        for (std::size_t i = r.begin; i < r.end; ++i) {
            const HVSample lambda = rho.draw(rng);
            // The watched wing keeps m_fixed; the remote wing switches setting.
            const Outcomes before = wing == Wing::B ? singlet_outcomes(m_old, m_fixed, lambda)
                                                    : singlet_outcomes(m_fixed, m_old, lambda);
            const Outcomes after = wing == Wing::B ? singlet_outcomes(m_new, m_fixed, lambda)
                                                   : singlet_outcomes(m_fixed, m_new, lambda);
            const int s0 = outcome_at(wing, before);
            const int s1 = outcome_at(wing, after);
            if (s0 < 0 && s1 > 0) ++c.minus_plus;
            if (s0 > 0 && s1 < 0) ++c.plus_minus;
        }
        return c;
    });
    TransitionCounts total;
    for (const auto& p : parts) {
        total.minus_plus += p.minus_plus;
        total.plus_minus += p.plus_minus;
    }
    return total;
}

}  // namespace

TransitionSetReport transition_sets(Wing wing, const BlochSetting& m_fixed, const BlochSetting& m_old,
                                    const BlochSetting& m_new, const HVDistribution& rho,
                                    MeasureMethod method, std::size_t n, std::uint64_t seed,
                                    unsigned workers) {
    TransitionSetReport rep;
    rep.wing = wing;
    rep.remote_old = m_old.vec();
    rep.remote_new = m_new.vec();
    rep.method = method;
    if (wing == Wing::A) {
        // sigma_A depends on u alone: no transitions under a remote change.
        rep.local_wing = true;
        return rep;
    }
    wing_b_boxes(anti_alignment_threshold(m_old, m_fixed), anti_alignment_threshold(m_new, m_fixed),
                 rep.minus_plus_boxes, rep.plus_minus_boxes);
    if (method == MeasureMethod::Analytic) {
        for (const auto& b : rep.minus_plus_boxes) rep.mu_minus_plus += rho.box_mass(b.u_lo, b.u_hi, b.w_lo, b.w_hi);
        for (const auto& b : rep.plus_minus_boxes) rep.mu_plus_minus += rho.box_mass(b.u_lo, b.u_hi, b.w_lo, b.w_hi);
        return rep;
    }
    require_samples(n);
    const auto c = count_transitions(wing, m_fixed, m_old, m_new, rho, n, seed, workers);
    const auto mp = finish(c.minus_plus, c.minus_plus, n);
    const auto pm = finish(c.plus_minus, c.plus_minus, n);
    rep.samples = n;
    rep.mu_minus_plus = mp.estimate;
    rep.mu_plus_minus = pm.estimate;
    rep.std_error_minus_plus = mp.std_error;
    rep.std_error_plus_minus = pm.std_error;
    return rep;
}

MonteCarloEstimate signal_statistic(Wing wing, const BlochSetting& m_fixed, const BlochSetting& m_old,
                                    const BlochSetting& m_new, const HVDistribution& rho,
                                    std::size_t n, std::uint64_t seed, unsigned workers) {
    require_samples(n);
    const auto c = count_transitions(wing, m_fixed, m_old, m_new, rho, n, seed, workers);
    // Per-draw change in the +1 indicator is +1 on T(-,+), -1 on T(+,-), 0 elsewhere.
    auto est = finish(c.minus_plus - c.plus_minus, c.minus_plus + c.plus_minus, n);
    // Same floating-point expression as the difference of the two transition measures.
    est.estimate = finish(c.minus_plus, c.minus_plus, n).estimate - finish(c.plus_minus, c.plus_minus, n).estimate;
    return est;
}

ChshSettings optimal_chsh_settings() {
    constexpr double deg = M_PI / 180.0;
    return {BlochSetting(planar_unit(0.0)), BlochSetting(planar_unit(90.0 * deg)),
            BlochSetting(planar_unit(45.0 * deg)), BlochSetting(planar_unit(135.0 * deg))};
}

MonteCarloEstimate chsh_value(const ChshSettings& s, const HVDistribution& rho, std::size_t n,
                              std::uint64_t seed, unsigned workers) {
    const auto e_ab = correlation(s.a, s.b, rho, n, derive_seed(seed, 0), workers);
    const auto e_abp = correlation(s.a, s.b_prime, rho, n, derive_seed(seed, 1), workers);
    const auto e_apb = correlation(s.a_prime, s.b, rho, n, derive_seed(seed, 2), workers);
    const auto e_apbp = correlation(s.a_prime, s.b_prime, rho, n, derive_seed(seed, 3), workers);
    MonteCarloEstimate out;
    out.samples = 4 * n;
    out.estimate = std::abs(e_ab.estimate - e_abp.estimate + e_apb.estimate + e_apbp.estimate);
    out.std_error = std::sqrt(e_ab.std_error * e_ab.std_error + e_abp.std_error * e_abp.std_error +
                              e_apb.std_error * e_apb.std_error + e_apbp.std_error * e_apbp.std_error);
    return out;
}

}  // namespace hvsim::hv
