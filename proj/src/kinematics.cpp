#include "hvsim/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hvsim::kin {

namespace {

void check_speed(double v, double c) {
    if (!(c > 0.0)) throw std::invalid_argument("speed of light must be positive");
    if (!(std::abs(v) < c)) throw std::invalid_argument("boost speed must satisfy |v| < c");
}

double gamma_factor(double v, double c) { return 1.0 / std::sqrt(1.0 - (v / c) * (v / c)); }

Vec lerp(const Vec& a, const Vec& b, double s) {
    return {a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1]), a[2] + s * (b[2] - a[2])};
}

Vec diff(const Vec& a, const Vec& b) { return {b[0] - a[0], b[1] - a[1], b[2] - a[2]}; }

constexpr double kNullSlack = 1e-12;

}  // namespace

// ---------------------------------------------------------------------------
// Worldline

Worldline::Worldline(std::vector<Event> events, double c) : events_(std::move(events)), c_(c) {
    if (events_.size() < 2) throw std::invalid_argument("a worldline needs at least two events");
    if (!(c > 0.0)) throw std::invalid_argument("speed of light must be positive");
    for (const auto& e : events_)
        if (!std::isfinite(e.t) || !std::isfinite(e.x[0]) || !std::isfinite(e.x[1]) || !std::isfinite(e.x[2]))
            throw std::invalid_argument("worldline events must have finite coordinates");
    for (std::size_t k = 1; k < events_.size(); ++k) {
        const double dt = events_[k].t - events_[k - 1].t;
        if (!(dt > 0.0)) throw std::invalid_argument("worldline times must be strictly increasing");
        const Vec dx = diff(events_[k - 1].x, events_[k].x);
        const double dl2 = dx[0] * dx[0] + dx[1] * dx[1] + dx[2] * dx[2];
        if (dl2 > c * c * dt * dt * (1.0 + kNullSlack)) throw std::invalid_argument("worldline segment is superluminal");
    }
}

Worldline Worldline::at_rest(const Vec& x, double t_begin, double t_end) {
    return Worldline({{t_begin, x}, {t_end, x}});
}

Vec Worldline::position_at(double t) const {
    if (t < t_begin() || t > t_end()) throw std::out_of_range("time outside the worldline");
    auto it = std::upper_bound(events_.begin(), events_.end(), t, [](double v, const Event& e) { return v < e.t; });
    if (it == events_.end()) return events_.back().x;
    if (it == events_.begin()) return events_.front().x;
    const Event& b = *it;
    const Event& a = *(it - 1);
    return lerp(a.x, b.x, (t - a.t) / (b.t - a.t));
}

Worldline Worldline::clipped(double t1, double t2) const {
    if (!(t2 > t1)) throw std::invalid_argument("clip interval must have t2 > t1");
    if (t1 < t_begin() || t2 > t_end()) throw std::invalid_argument("worldline does not span the requested slices");
    std::vector<Event> out{{t1, position_at(t1)}};
    for (const auto& e : events_)
        if (e.t > t1 && e.t < t2) out.push_back(e);
    out.push_back({t2, position_at(t2)});
    return Worldline(std::move(out), c_);
}

// ---------------------------------------------------------------------------
// Flat spacetime

double lorentz_clock_reading(double t, double x, double v, double c) {
    check_speed(v, c);
    return (t - v * x / (c * c)) * gamma_factor(v, c);
}

double lorentz_position(double t, double x, double v, double c) {
    check_speed(v, c);
    return (x - v * t) * gamma_factor(v, c);
}

BoostedEvent boost(double t, double x, double v, double c) {
    return {lorentz_clock_reading(t, x, v, c), lorentz_position(t, x, v, c)};
}

double poincare_first_order(double t, double x, double v, double c) {
    check_speed(v, c);
    return t - v * x / (c * c);
}

double poincare_gap_bound(double t, double x, double v, double c) {
    check_speed(v, c);
    const double beta = v / c;
    const double g = gamma_factor(v, c);
    return beta * beta * (g * g / (g + 1.0)) * (std::abs(t) + std::abs(x) / c);
}

double proper_time_flat(const Worldline& w, double c) {
    if (!(c > 0.0)) throw std::invalid_argument("speed of light must be positive");
    double tau = 0.0;
    const auto& ev = w.events();
    for (std::size_t k = 1; k < ev.size(); ++k) {
        const double dt = ev[k].t - ev[k - 1].t;
        const Vec dx = diff(ev[k - 1].x, ev[k].x);
        const double dl2 = (dx[0] * dx[0] + dx[1] * dx[1] + dx[2] * dx[2]) / (c * c);
        tau += std::sqrt(std::max(dt * dt - dl2, 0.0));
    }
    return tau;
}

// ---------------------------------------------------------------------------
// Foliated spacetime

LatticeField::LatticeField(std::array<double, 4> lo, std::array<double, 4> hi, std::array<std::size_t, 4> counts,
                           std::vector<double> values)
    : lo_(lo), hi_(hi), n_(counts), v_(std::move(values)) {
    std::size_t total = 1;
    for (std::size_t d = 0; d < 4; ++d) {
        if (n_[d] < 1) throw std::invalid_argument("lattice needs at least one sample per dimension");
        if (n_[d] > 1 && !(hi_[d] > lo_[d])) throw std::invalid_argument("lattice extent must be positive");
        total *= n_[d];
    }
    if (v_.size() != total) throw std::invalid_argument("lattice value count mismatch");
}

double LatticeField::operator()(const Vec& x, double t) const {
    const double q[4] = {t, x[0], x[1], x[2]};
    std::size_t base[4];
    double frac[4];
    for (std::size_t d = 0; d < 4; ++d) {
        if (n_[d] == 1) {
            base[d] = 0;
            frac[d] = 0.0;
            continue;
        }
        const double s = std::clamp((q[d] - lo_[d]) / (hi_[d] - lo_[d]), 0.0, 1.0) * static_cast<double>(n_[d] - 1);
        base[d] = std::min(static_cast<std::size_t>(s), n_[d] - 2);
        frac[d] = s - static_cast<double>(base[d]);
    }
    double out = 0.0;
    for (unsigned corner = 0; corner < 16; ++corner) {
        double w = 1.0;
        std::size_t flat = 0;
        bool skip = false;
        for (std::size_t d = 0; d < 4; ++d) {
            const unsigned bit = (corner >> d) & 1U;
            if (n_[d] == 1 && bit) {
                skip = true;
                break;
            }
            w *= bit ? frac[d] : 1.0 - frac[d];
            flat = flat * n_[d] + base[d] + bit;
        }
        if (!skip && w != 0.0) out += w * v_[flat];
    }
    return out;
}

Foliation::Foliation(LapseFn lapse, MetricFn metric, double t_min, double t_max)
    : lapse_(std::move(lapse)), metric_(std::move(metric)), t_min_(t_min), t_max_(t_max) {
    if (!lapse_ || !metric_) throw std::invalid_argument("foliation needs lapse and metric fields");
    if (!(t_max_ > t_min_)) throw std::invalid_argument("foliation slice range is empty");
}

Foliation Foliation::minkowski() {
    return Foliation([](const Vec&, double) { return 1.0; },
                     [](const Vec&, double) { return Mat3{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}}; });
}

Foliation Foliation::gridded(LatticeField lapse, std::array<LatticeField, 6> g) {
    return Foliation([lapse = std::move(lapse)](const Vec& x, double t) { return lapse(x, t); },
                     [g = std::move(g)](const Vec& x, double t) {
                         const double xx = g[0](x, t), xy = g[1](x, t), xz = g[2](x, t);
                         const double yy = g[3](x, t), yz = g[4](x, t), zz = g[5](x, t);
                         return Mat3{{{xx, xy, xz}, {xy, yy, yz}, {xz, yz, zz}}};
                     });
}

double Foliation::lapse(const Vec& x, double t) const {
    if (t < t_min_ || t > t_max_) throw std::domain_error("time outside the foliation's slice range");
    const double n = lapse_(x, t);
    if (!(n > 0.0) || !std::isfinite(n)) throw std::domain_error("lapse must be positive and finite");
    return n;
}

Mat3 Foliation::metric(const Vec& x, double t) const {
    if (t < t_min_ || t > t_max_) throw std::domain_error("time outside the foliation's slice range");
    const Mat3 g = metric_(x, t);
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j)
            if (std::abs(g[i][j] - g[j][i]) > 1e-12 * (std::abs(g[i][j]) + 1.0))
                throw std::domain_error("spatial metric must be symmetric");
    (void)checked_determinant(g);
    return g;
}

double metric_product(const Mat3& g, const Vec& a, const Vec& b) noexcept {
    double s = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) s += g[i][j] * a[i] * b[j];
    return s;
}

double checked_determinant(const Mat3& g) {
    const double m1 = g[0][0];
    const double m2 = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    const double m3 = g[0][0] * (g[1][1] * g[2][2] - g[1][2] * g[2][1]) -
                      g[0][1] * (g[1][0] * g[2][2] - g[1][2] * g[2][0]) +
                      g[0][2] * (g[1][0] * g[2][1] - g[1][1] * g[2][0]);
    if (!(m1 > 0.0 && m2 > 0.0 && m3 > 0.0)) throw std::domain_error("spatial metric is not positive definite");
    return m3;
}

double proper_time_foliated(const Worldline& w, const Foliation& f, std::size_t subdivisions) {
    if (subdivisions < 1) throw std::invalid_argument("subdivisions must be >= 1");
    double tau = 0.0;
    const auto& ev = w.events();
    for (std::size_t k = 1; k < ev.size(); ++k) {
        const Event& a = ev[k - 1];
        const Event& b = ev[k];
        const double dt = (b.t - a.t) / static_cast<double>(subdivisions);
        const Vec full = diff(a.x, b.x);
        const Vec dx{full[0] / subdivisions, full[1] / subdivisions, full[2] / subdivisions};
        for (std::size_t s = 0; s < subdivisions; ++s) {
            const double mid = (static_cast<double>(s) + 0.5) / static_cast<double>(subdivisions);
            const Vec xm = lerp(a.x, b.x, mid);
            const double tm = a.t + mid * (b.t - a.t);
            const double n = f.lapse(xm, tm);
            const double dl2 = metric_product(f.metric(xm, tm), dx, dx);
            const double d2 = n * n * dt * dt - dl2;
            if (d2 < -kNullSlack * n * n * dt * dt)
                throw std::domain_error("worldline segment is spacelike in the foliated metric");
            tau += std::sqrt(std::max(d2, 0.0));
        }
    }
    return tau;
}

double proper_length(const std::vector<Vec>& curve, const Foliation& f, double t, std::size_t subdivisions) {
    if (subdivisions < 1) throw std::invalid_argument("subdivisions must be >= 1");
    double l = 0.0;
    for (std::size_t k = 1; k < curve.size(); ++k) {
        const Vec full = diff(curve[k - 1], curve[k]);
        const Vec dx{full[0] / subdivisions, full[1] / subdivisions, full[2] / subdivisions};
        for (std::size_t s = 0; s < subdivisions; ++s) {
            const double mid = (static_cast<double>(s) + 0.5) / static_cast<double>(subdivisions);
            l += std::sqrt(std::max(metric_product(f.metric(lerp(curve[k - 1], curve[k], mid), t), dx, dx), 0.0));
        }
    }
    return l;
}

double unimodular_lapse(const Mat3& g) {
    const double det = checked_determinant(g);
    return 1.0 / std::sqrt(det);
}

ClockPairReport compare_clocks(const Worldline& clock1, double start1, double end1, const Worldline& clock2,
                               double start2, double end2, const Foliation& f, double tol, std::size_t subdivisions) {
    ClockPairReport r{clock1.clipped(start1, end1), clock2.clipped(start2, end2), start1, end1, start2, end2};
    r.tau1 = proper_time_foliated(r.clock1, f, subdivisions);
    r.tau2 = proper_time_foliated(r.clock2, f, subdivisions);
    r.simultaneous = start1 == start2 && end1 == end2;
    r.synchronous = std::abs(r.tau1 - r.tau2) < tol;
    return r;
}

ClockPairReport synchrony_report(const Worldline& clock1, const Worldline& clock2, const Foliation& f, double t1,
                                 double t2, double tol, std::size_t subdivisions) {
    for (const Worldline* w : {&clock1, &clock2})
        if (w->t_begin() > t1 || w->t_end() < t2)
            throw std::invalid_argument("worldline does not span the compared slices");
    return compare_clocks(clock1, t1, t2, clock2, t1, t2, f, tol, subdivisions);
}

}  // namespace hvsim::kin
