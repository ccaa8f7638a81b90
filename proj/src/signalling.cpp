#include "hvsim/signalling.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

#include "hvsim/error.hpp"
#include "hvsim/guidance.hpp"
#include "hvsim/random.hpp"

namespace hvsim::signal {

namespace {

std::vector<double> or_zeros(const std::vector<double>& v, std::size_t n) {
    return v.empty() ? std::vector<double>(n, 0.0) : v;
}

// Cumulative integral of the natural cubic spline through (x_j, y_j) on a
// uniform knot spacing h, evaluated at arbitrary points.
class SplineIntegral {
  public:
    SplineIntegral(double x0, double h, std::vector<double> y) : x0_(x0), h_(h), y_(std::move(y)) {
        const std::size_t n = y_.size();
        m_.assign(n, 0.0);
        if (n > 2) {
            // Tridiagonal system h/6 M_{j-1} + 2h/3 M_j + h/6 M_{j+1} = second difference / h.
            std::vector<double> c(n, 0.0), d(n, 0.0);
            for (std::size_t j = 1; j + 1 < n; ++j) {
                const double rhs = (y_[j + 1] - 2.0 * y_[j] + y_[j - 1]) / h_;
                const double a = h_ / 6.0, b = 2.0 * h_ / 3.0;
                const double denom = b - a * c[j - 1];
                c[j] = a / denom;
                d[j] = (rhs - a * d[j - 1]) / denom;
            }
            for (std::size_t j = n - 2; j >= 1; --j) {
                m_[j] = d[j] - c[j] * m_[j + 1];
                if (j == 1) break;
            }
        }
        cum_.assign(n, 0.0);
        for (std::size_t j = 0; j + 1 < n; ++j) cum_[j + 1] = cum_[j] + piece(j, h_);
    }

    [[nodiscard]] double at(double x) const {
        const double s = (x - x0_) / h_;
        const double last = static_cast<double>(y_.size() - 1);
        if (s <= 0.0) return 0.0;
        if (s >= last) return cum_.back();
        const auto j = std::min(static_cast<std::size_t>(s), y_.size() - 2);
        return cum_[j] + piece(j, x - (x0_ + static_cast<double>(j) * h_));
    }

  private:
    [[nodiscard]] double piece(std::size_t j, double s) const {
        const double b = (y_[j + 1] - y_[j]) / h_ - h_ * (2.0 * m_[j] + m_[j + 1]) / 6.0;
        return y_[j] * s + b * s * s / 2.0 + m_[j] * s * s * s / 6.0 + (m_[j + 1] - m_[j]) * s * s * s * s / (24.0 * h_);
    }

    double x0_, h_;
    std::vector<double> y_, m_, cum_;
};

double point_at(const guidance::Trajectory& tr, double t) {
    // Recorded samples are the start followed by each output time reached.
    std::size_t r = 0;
    while (r + 1 < tr.times.size() && tr.times[r + 1] <= t) ++r;
    return tr.points[r][0];
}

}  // namespace

// ---------------------------------------------------------------------------
// Marginals

std::size_t MarginalBinning::index(double x) const noexcept {
    if (!(x >= lo && x < hi)) return bins;
    return std::min(static_cast<std::size_t>((x - lo) / width()), bins - 1);
}

void MarginalBinning::validate() const {
    if (bins < 1) throw std::invalid_argument("binning needs at least one bin");
    if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi)) throw std::invalid_argument("binning range is empty");
}

std::vector<double> marginal_A(const GridWavefunction& psi, const MarginalBinning& binning) {
    binning.validate();
    const auto& axes = psi.axes();
    const auto& ax = axes[0];
    const std::size_t nb = axes.size() > 1 ? axes[1].nodes : 1;
    const double hb = axes.size() > 1 ? axes[1].spacing() : 1.0;
    std::vector<double> y;
    y.reserve(ax.nodes + 2);
    if (ax.boundary == wave::Boundary::Wall) y.push_back(0.0);
    for (std::size_t j = 0; j < ax.nodes; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < nb; ++i) s += std::norm(psi.amplitudes()[j * nb + i]);
        y.push_back(s * hb);
    }
    y.push_back(ax.boundary == wave::Boundary::Wall ? 0.0 : y.front());
    const SplineIntegral F(ax.lo, ax.spacing(), std::move(y));
    std::vector<double> out(binning.bins);
    for (std::size_t k = 0; k < binning.bins; ++k) out[k] = F.at(binning.edge(k + 1)) - F.at(binning.edge(k));
    return out;
}

std::vector<double> marginal_A(const ensemble::Ensemble& e, const MarginalBinning& binning) {
    binning.validate();
    std::vector<std::uint64_t> counts(binning.bins, 0);
    for (const auto& p : e.points) {
        const auto k = binning.index(p[0]);
        if (k < binning.bins) ++counts[k];
    }
    std::vector<double> out(binning.bins);
    const double n = static_cast<double>(e.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = static_cast<double>(counts[k]) / n;
    return out;
}

// ---------------------------------------------------------------------------
// Experiment

bool SignalExperiment::switch_is_identity() const {
    const std::size_t nb = psi0.axes().at(1).nodes;
    return after.mass_b == psi0.masses()[1] &&
           or_zeros(after.potential_b, nb) == or_zeros(psi0.potential().axis[1], nb);
}

void SignalExperiment::validate() const {
    if (psi0.dimension() != 2) throw ConfigError("the signalling experiment needs a two-particle wavefunction");
    if (!density0) throw ConfigError("the signalling experiment needs an initial ensemble density");
    if (!(after.mass_b > 0.0) || !std::isfinite(after.mass_b)) throw ConfigError("switched mass must be positive");
    const std::size_t nb = psi0.axes()[1].nodes;
    if (!after.potential_b.empty() && after.potential_b.size() != nb)
        throw ConfigError("switched potential must have one value per x_B node");
    for (double v : after.potential_b)
        if (!std::isfinite(v)) throw ConfigError("switched potential must be finite");
    if (times.empty()) throw ConfigError("no observation times");
    for (std::size_t k = 0; k < times.size(); ++k)
        if (!(times[k] > 0.0) || (k > 0 && !(times[k] > times[k - 1])))
            throw ConfigError("observation times must be positive and strictly increasing");
    if (!(dt > 0.0) || steps_per_snapshot < 1) throw ConfigError("time step and snapshot spacing must be positive");
    try {
        binning.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    double mass = 0.0;
    for (std::size_t f = 0; f < psi0.size(); ++f) mass += density0(psi0.node_position(f));
    mass *= psi0.cell_volume();
    if (std::abs(mass - 1.0) > 1e-6) {
        std::ostringstream msg;
        msg << "initial ensemble density integrates to " << mass << ", not 1";
        throw ConfigError(msg.str());
    }
}

double SignalReport::max_signal_to_noise() const {
    double m = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k) m = std::max(m, signal_to_noise(k));
    return m;
}

bool SignalReport::identically_zero() const {
    for (const auto& row : delta_p)
        for (double v : row)
            if (v != 0.0) return false;
    return true;
}

bool SignalReport::zero_sum_holds() const {
    for (std::size_t k = 0; k < times.size(); ++k)
        if (!(std::abs(integral[k]) <= integral_bound[k])) return false;
    return true;
}

void SignalReport::write_csv(std::ostream& os) const {
    os << "t,x_A,delta_p,noise_floor\n";
    for (std::size_t k = 0; k < times.size(); ++k)
        for (std::size_t b = 0; b < binning.bins; ++b)
            os << times[k] << ',' << binning.centre(b) << ',' << delta_p[k][b] << ',' << noise_floor[k] << '\n';
}

SignalRun run_signal_experiment(const SignalExperiment& cfg, const SignalOptions& o) {
    cfg.validate();
    if (o.samples < 2) throw ConfigError("the signalling experiment needs at least two samples");
    if (!(o.tol > 0.0)) throw ConfigError("trajectory tolerance must be positive");

    const double t_max = cfg.times.back();
    const double interval = cfg.dt * static_cast<double>(cfg.steps_per_snapshot);
    const auto snaps = static_cast<std::size_t>(std::ceil(t_max / interval - 1e-9)) + 2;
    const wave::GridHistory base(cfg.psi0, 0.0, cfg.dt, cfg.steps_per_snapshot, snaps);
    auto masses = cfg.psi0.masses();
    masses[1] = cfg.after.mass_b;
    auto pot = cfg.psi0.potential();
    pot.axis[1] = cfg.after.potential_b;
    const wave::GridHistory switched(cfg.psi0.with_hamiltonian(masses, pot), 0.0, cfg.dt, cfg.steps_per_snapshot,
                                     snaps);

    const auto ens = ensemble::sample_density(cfg.psi0.domain(), cfg.density0, o.samples, o.seed,
                                              cfg.density_bound, o.workers, "signal");

    const std::size_t nt = cfg.times.size();
    const std::size_t nb = cfg.binning.bins;
    struct Partial {
        std::vector<std::int64_t> diff, cross, outside;
        std::size_t stalled0 = 0, stalled1 = 0;
    };
    constexpr std::size_t chunk = 1024;
    const std::size_t n = ens.size();
    const std::size_t nchunks = (n + chunk - 1) / chunk;
    std::vector<Partial> parts(nchunks);
    SignalRun run;
    if (o.keep_unswitched) run.unswitched_xa.assign(nt, std::vector<double>(n));

    guidance::IntegratorOptions opt;
    opt.tol = o.tol;
    opt.record_all_steps = false;
    opt.output_times = cfg.times;
    auto trace = [&](const wave::WaveField& field, const Point& x0, bool& stalled) {
        try {
            auto tr = guidance::integrate_trajectory(field, x0, 0.0, t_max, opt);
            stalled = tr.status == guidance::TrajectoryStatus::NodeStall;
            return tr;
        } catch (const NodeError&) {
            stalled = true;
            guidance::Trajectory tr;
            tr.times = {0.0};
            tr.points = {x0};
            return tr;
        }
    };

    parallel_for(nchunks, o.workers, [&](std::size_t c) {
        Partial& p = parts[c];
        p.diff.assign(nt * nb, 0);
        p.cross.assign(nt * nb, 0);
        p.outside.assign(nt, 0);
        for (std::size_t i = c * chunk; i < std::min(n, (c + 1) * chunk); ++i) {
            bool s0 = false, s1 = false;
            const auto tr0 = trace(base, ens.points[i], s0);
            const auto tr1 = trace(switched, ens.points[i], s1);
            p.stalled0 += s0;
            p.stalled1 += s1;
            for (std::size_t k = 0; k < nt; ++k) {
                const double x0 = point_at(tr0, cfg.times[k]);
                const double x1 = point_at(tr1, cfg.times[k]);
                if (o.keep_unswitched) run.unswitched_xa[k][i] = x0;
                const std::size_t b0 = cfg.binning.index(x0);
                const std::size_t b1 = cfg.binning.index(x1);
                p.outside[k] += (b0 == nb) + (b1 == nb);
                if (b0 == b1) continue;
                if (b1 < nb) {
                    ++p.diff[k * nb + b1];
                    ++p.cross[k * nb + b1];
                }
                if (b0 < nb) {
                    --p.diff[k * nb + b0];
                    ++p.cross[k * nb + b0];
                }
            }
        }
    });

    std::vector<std::int64_t> diff(nt * nb, 0), cross(nt * nb, 0), outside(nt, 0);
    SignalReport& r = run.report;
    for (const auto& p : parts) {
        for (std::size_t j = 0; j < diff.size(); ++j) {
            diff[j] += p.diff[j];
            cross[j] += p.cross[j];
        }
        for (std::size_t k = 0; k < nt; ++k) outside[k] += p.outside[k];
        r.stalled_unswitched += p.stalled0;
        r.stalled_switched += p.stalled1;
    }
    const double limit = ensemble::kMaxStalledFraction * static_cast<double>(n);
    if (static_cast<double>(std::max(r.stalled_unswitched, r.stalled_switched)) > limit) {
        std::ostringstream msg;
        msg << "trajectories stalled at nodes (unswitched " << r.stalled_unswitched << ", switched "
            << r.stalled_switched << " of " << n << ")";
        throw NumericalError(msg.str());
    }

    r.times = cfg.times;
    r.binning = cfg.binning;
    r.samples = n;
    const double dn = static_cast<double>(n);
    const double bw = cfg.binning.width();
    for (std::size_t k = 0; k < nt; ++k) {
        std::vector<double> dp(nb), se(nb);
        double max_se = 0.0, max_abs = 0.0, var_sum = 0.0;
        std::int64_t total = 0;
        for (std::size_t b = 0; b < nb; ++b) {
            const double mean = static_cast<double>(diff[k * nb + b]) / dn;
            const double second = static_cast<double>(cross[k * nb + b]) / dn;
            const double var = std::max(second - mean * mean, 0.0) * dn / (dn - 1.0);
            const double se_mass = std::sqrt(var / dn);
            dp[b] = mean / bw;
            se[b] = se_mass / bw;
            var_sum += se_mass * se_mass;
            max_se = std::max(max_se, se[b]);
            max_abs = std::max(max_abs, std::abs(dp[b]));
            total += diff[k * nb + b];
        }
        r.delta_p.push_back(std::move(dp));
        r.std_error.push_back(std::move(se));
        r.noise_floor.push_back(4.0 * std::max(max_se, 1.0 / (dn * bw)));
        r.max_abs.push_back(max_abs);
        r.integral.push_back(static_cast<double>(total) / dn);
        r.integral_bound.push_back(std::sqrt(var_sum) + static_cast<double>(outside[k]) / dn);
    }
    return run;
}

// ---------------------------------------------------------------------------
// Power-law fits

ScalingFit fit_power_law(const std::vector<double>& t, const std::vector<double>& y) {
    if (t.size() != y.size()) throw std::invalid_argument("time and value counts differ");
    if (t.size() < 3) throw std::invalid_argument("a power-law fit needs at least three points");
    const std::size_t n = t.size();
    std::vector<double> lx(n), ly(n);
    for (std::size_t k = 0; k < n; ++k) {
        if (!(t[k] > 0.0) || !(y[k] > 0.0)) throw std::invalid_argument("power-law fit needs positive data");
        lx[k] = std::log(t[k]);
        ly[k] = std::log(y[k]);
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        mx += lx[k];
        my += ly[k];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        sxx += (lx[k] - mx) * (lx[k] - mx);
        sxy += (lx[k] - mx) * (ly[k] - my);
    }
    if (!(sxx > 0.0)) throw std::invalid_argument("power-law fit needs distinct times");
    ScalingFit fit;
    fit.exponent = sxy / sxx;
    fit.log_prefactor = my - fit.exponent * mx;
    double ssr = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double e = ly[k] - fit.log_prefactor - fit.exponent * lx[k];
        ssr += e * e;
    }
    const double dof = static_cast<double>(n - 2);
    const double se = std::sqrt(ssr / dof / sxx);
    const double q = boost::math::quantile(boost::math::students_t(dof), 0.975);
    fit.ci_lo = fit.exponent - q * se;
    fit.ci_hi = fit.exponent + q * se;
    return fit;
}

ScalingFit fit_time_scaling(const SignalReport& report) {
    const auto& t = report.times;
    if (t.size() < 4) throw std::invalid_argument("time-scaling fit needs at least four observation times");
    if (t.back() < 10.0 * t.front()) throw std::invalid_argument("observation times must span at least one decade");
    for (std::size_t k = 0; k < t.size(); ++k)
        if (!(report.max_abs[k] > report.noise_floor[k])) {
            std::ostringstream msg;
            msg << "signal at t=" << t[k] << " does not exceed its noise floor; refusing to fit";
            throw std::invalid_argument(msg.str());
        }
    return fit_power_law(t, report.max_abs);
}

// ---------------------------------------------------------------------------
// Reference experiment

double hermite_function(int n, double x) {
    if (n < 0) throw std::invalid_argument("oscillator level must be non-negative");
    double prev = 0.0;
    double cur = std::pow(M_PI, -0.25) * std::exp(-0.5 * x * x);
    for (int k = 0; k < n; ++k) {
        const double next = std::sqrt(2.0 / (k + 1)) * x * cur - std::sqrt(static_cast<double>(k) / (k + 1)) * prev;
        prev = cur;
        cur = next;
    }
    return cur;
}

SignalExperiment reference_experiment(const ReferenceOptions& ro) {
    if (!(ro.half_width > 0.0) || ro.nodes < 16) throw ConfigError("reference grid is too small");
    if (!(ro.sigma > 0.0) || std::abs(ro.epsilon) > 1.0) throw ConfigError("need sigma > 0 and |epsilon| <= 1");
    if (!(ro.bin_width > 0.0) || !(ro.bin_half_width > 0.0)) throw ConfigError("bin widths must be positive");
    const auto bins = static_cast<std::size_t>(std::llround(2.0 * ro.bin_half_width / ro.bin_width));
    if (bins < 1 || std::abs(static_cast<double>(bins) * ro.bin_width - 2.0 * ro.bin_half_width) > 1e-9)
        throw ConfigError("bin width must divide the binned range");

    const wave::Axis axis{-ro.half_width, ro.half_width, ro.nodes, wave::Boundary::Wall};
    wave::Potential pot;
    std::vector<double> v(ro.nodes);
    for (std::size_t j = 0; j < ro.nodes; ++j) v[j] = 0.5 * axis.node(j) * axis.node(j);
    pot.axis = {v, v};
    auto amplitude = [](const Point& x) {
        return (hermite_function(0, x[0]) * hermite_function(1, x[1]) +
                hermite_function(1, x[0]) * hermite_function(0, x[1])) / std::sqrt(2.0);
    };
    auto psi0 = GridWavefunction::from_function({axis, axis}, {1.0, 1.0}, amplitude, pot);

    SignalExperiment cfg{.psi0 = std::move(psi0)};
    const double eps = ro.epsilon, sigma = ro.sigma;
    cfg.density0 = [amplitude, eps, sigma](const Point& x) {
        const double a = amplitude(x);
        return a * a * (1.0 + eps * std::tanh(x[1] / sigma));
    };
    // Peak of |psi0|^2 is 2 e^{-1} / pi at a = b = 1/sqrt 2.
    cfg.density_bound = 1.05 * (1.0 + std::abs(eps)) * 2.0 * std::exp(-1.0) / M_PI;
    cfg.after.mass_b = ro.mass_b_after;
    cfg.after.potential_b = v;
    for (std::size_t j = 0; j < ro.nodes; ++j) cfg.after.potential_b[j] += ro.tilt * axis.node(j);
    cfg.times = ro.times;
    cfg.binning = {-ro.bin_half_width, ro.bin_half_width, bins};
    cfg.dt = ro.dt;
    cfg.steps_per_snapshot = ro.steps_per_snapshot;
    return cfg;
}

}  // namespace hvsim::signal
