#include "hvsim/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hvsim/error.hpp"

namespace hvsim::guidance {

namespace {

struct Eval {
    std::array<double, 2> v;
    double density;
    bool ok;
};

Eval try_velocity(const WaveField& psi, const Point& x, double t, double threshold) {
    const auto& d = psi.domain();
    if (!d.contains(x)) return {{0.0, 0.0}, 0.0, false};
    const auto fs = psi.sample(d.wrap(x), t);
    const double rho = std::norm(fs.psi);
    if (!(rho >= threshold) || !std::isfinite(rho)) return {{0.0, 0.0}, rho, false};
    const auto m = psi.masses();
    Eval e{{0.0, 0.0}, rho, true};
    for (std::size_t i = 0; i < d.dim; ++i) e.v[i] = (fs.grad[i] / fs.psi).imag() / m[i];
    return e;
}

// Dormand-Prince 5(4) coefficients.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

}  // namespace

std::array<double, 2> velocity(const WaveField& psi, const Point& x, double t) {
    const Eval e = try_velocity(psi, x, t, wave::node_threshold(psi));
    if (!e.ok) throw NodeError("guidance velocity undefined: |psi|^2 below node threshold", e.density);
    return e.v;
}

Trajectory integrate_trajectory(const WaveField& psi, const Point& x0, double t0, double t1,
                                const IntegratorOptions& opt) {
    if (!(opt.tol > 0.0)) throw std::invalid_argument("integration tolerance must be positive");
    if (!std::isfinite(t0) || !std::isfinite(t1) || t0 == t1)
        throw std::invalid_argument("integration interval must be finite and non-empty");
    const double dir = t1 > t0 ? 1.0 : -1.0;
    const double lo = std::min(t0, t1), hi = std::max(t0, t1);
    if (lo < psi.t_begin() - 1e-12 || hi > psi.t_end() + 1e-12)
        throw std::invalid_argument("integration interval outside the wavefunction's time window");

    std::vector<double> stops;
    for (double t : opt.output_times) {
        if (t < lo - 1e-15 || t > hi + 1e-15) throw std::invalid_argument("output time outside the interval");
        if (t != t0) stops.push_back(t);
    }
    stops.push_back(t1);
    std::sort(stops.begin(), stops.end(), [dir](double a, double b) { return dir * a < dir * b; });
    stops.erase(std::unique(stops.begin(), stops.end()), stops.end());

    const double threshold = wave::node_threshold(psi);
    const std::size_t dim = psi.domain().dim;
    Trajectory tr;
    tr.times.push_back(t0);
    tr.points.push_back(psi.domain().wrap(x0));

    Eval k1 = try_velocity(psi, x0, t0, threshold);
    if (!k1.ok) throw NodeError("trajectory starts at a node of psi", k1.density);
    tr.stats.min_density = k1.density;

    double t = t0;
    Point x = x0;
    double h = opt.initial_step > 0.0 ? opt.initial_step : std::min(hi - lo, 1e-2);
    std::size_t next_stop = 0;

    auto stage = [&](const Point& base, double tt, double step, std::initializer_list<std::pair<double, const Eval*>> terms) {
        Point y = base;
        for (std::size_t i = 0; i < dim; ++i) {
            double acc = 0.0;
            for (const auto& [coef, k] : terms) acc += coef * k->v[i];
            y[i] += dir * step * acc;
        }
        return std::pair{y, try_velocity(psi, y, tt, threshold)};
    };

    while (next_stop < stops.size()) {
        if (tr.stats.accepted + tr.stats.rejected >= opt.max_steps)
            throw NumericalError("trajectory exceeded the step budget");
        const double target = stops[next_stop];
        const double remaining = dir * (target - t);
        bool clipped = false;
        double step = h;
        if (step >= remaining) {
            step = remaining;
            clipped = true;
        }
        const double ts = dir * step;
        auto [y2, k2] = stage(x, t + c2 * ts, step, {{a21, &k1}});
        bool ok = k2.ok;
        Eval k3{}, k4{}, k5{}, k6{}, k7{};
        Point y5{};
        if (ok) { auto r = stage(x, t + c3 * ts, step, {{a31, &k1}, {a32, &k2}}); k3 = r.second; ok = k3.ok; }
        if (ok) { auto r = stage(x, t + c4 * ts, step, {{a41, &k1}, {a42, &k2}, {a43, &k3}}); k4 = r.second; ok = k4.ok; }
        if (ok) { auto r = stage(x, t + c5 * ts, step, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}); k5 = r.second; ok = k5.ok; }
        if (ok) {
            auto r = stage(x, t + ts, step, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}});
            k6 = r.second;
            ok = k6.ok;
        }
        if (ok) {
            auto r = stage(x, t + ts, step, {{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}});
            y5 = r.first;
            k7 = r.second;
            ok = k7.ok;
        }
        if (!ok) {
            ++tr.stats.rejected;
            ++tr.stats.node_rejections;
            h = 0.25 * step;
            if (h < opt.min_step) {
                tr.status = TrajectoryStatus::NodeStall;
                if (!opt.record_all_steps && tr.times.back() != t) {
                    tr.times.push_back(t);
                    tr.points.push_back(psi.domain().wrap(x));
                }
                return tr;
            }
            continue;
        }
        double err = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            const double e = step * (e1 * k1.v[i] + e3 * k3.v[i] + e4 * k4.v[i] + e5 * k5.v[i] + e6 * k6.v[i] +
                                     e7 * k7.v[i]);
            err = std::max(err, std::abs(e));
        }
        const double allowed = opt.tol * step;
        if (err <= allowed) {
            ++tr.stats.accepted;
            t = clipped ? target : t + ts;
            x = y5;
            k1 = k7;
            for (const Eval* k : {&k2, &k3, &k4, &k5, &k6, &k7})
                tr.stats.min_density = std::min(tr.stats.min_density, k->density);
            const bool at_stop = clipped;
            if (at_stop) ++next_stop;
            if (opt.record_all_steps || at_stop) {
                tr.times.push_back(t);
                tr.points.push_back(psi.domain().wrap(x));
            }
            const double fac = err > 0.0 ? 0.9 * std::pow(allowed / err, 0.25) : 5.0;
            const double grown = step * std::clamp(fac, 0.2, 5.0);
            // A clipped step says nothing about the attainable size.
            h = clipped ? std::max(h, grown) : grown;
        } else {
            ++tr.stats.rejected;
            const double fac = 0.9 * std::pow(allowed / err, 0.25);
            h = step * std::clamp(fac, 0.1, 0.9);
            if (h < opt.min_step) {
                tr.status = TrajectoryStatus::NodeStall;
                return tr;
            }
        }
    }
    return tr;
}

}  // namespace hvsim::guidance
