#include "hvsim/wavefunction.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "hvsim/error.hpp"

namespace hvsim::wave {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr cplx kI{0.0, 1.0};
constexpr double kNodeFactor = 1e-12;

void check_dim(std::size_t dim) {
    if (dim != 1 && dim != 2) throw std::invalid_argument("configuration space must be 1- or 2-dimensional");
}

}  // namespace

// ---------------------------------------------------------------------------
// Domain

double Domain::volume() const noexcept {
    double v = 1.0;
    for (std::size_t i = 0; i < dim; ++i) v *= hi[i] - lo[i];
    return v;
}

bool Domain::contains(const Point& x) const noexcept {
    for (std::size_t i = 0; i < dim; ++i) {
        if (boundary[i] == Boundary::Periodic) continue;
        if (!(x[i] >= lo[i] && x[i] <= hi[i])) return false;
    }
    return true;
}

Point Domain::wrap(const Point& x) const noexcept {
    Point out = x;
    for (std::size_t i = 0; i < dim; ++i) {
        if (boundary[i] != Boundary::Periodic) continue;
        const double len = hi[i] - lo[i];
        out[i] = lo[i] + std::fmod(x[i] - lo[i], len);
        if (out[i] < lo[i]) out[i] += len;
        if (out[i] >= hi[i]) out[i] = lo[i];
    }
    return out;
}

// ---------------------------------------------------------------------------
// ModeWavefunction

ModeWavefunction::ModeWavefunction(std::size_t dim, Point sides, std::array<double, 2> masses,
                                   std::vector<Term> terms)
    : masses_(masses) {
    check_dim(dim);
    domain_.dim = dim;
    domain_.lo = {0.0, 0.0};
    domain_.hi = {sides[0], dim > 1 ? sides[1] : 1.0};
    for (std::size_t i = 0; i < dim; ++i) {
        if (!(sides[i] > 0.0)) throw std::invalid_argument("box sides must be positive");
        if (!(masses[i] > 0.0)) throw std::invalid_argument("masses must be positive");
    }
    if (terms.empty()) throw std::invalid_argument("mode expansion needs at least one term");
    for (const auto& t : terms) {
        Mode m;
        m.index = t.index;
        if (dim == 1) m.index[1] = 1;
        for (std::size_t i = 0; i < dim; ++i) {
            if (m.index[i] < 1) throw std::invalid_argument("mode indices start at 1");
            max_index_ = std::max(max_index_, m.index[i]);
        }
        m.coeff = t.coeff;
        modes_.push_back(m);
    }
    for (auto& m : modes_) m.energy = box_energy(m.index);
    if (std::abs(norm() - 1.0) > 1e-12) throw std::invalid_argument("mode coefficients must satisfy sum |c|^2 = 1");
}

ModeWavefunction ModeWavefunction::normalized(std::size_t dim, Point sides, std::array<double, 2> masses,
                                              std::vector<Term> terms) {
    double n = 0.0;
    for (const auto& t : terms) n += std::norm(t.coeff);
    if (!(n > 0.0)) throw std::invalid_argument("mode coefficients are all zero");
    for (auto& t : terms) t.coeff /= std::sqrt(n);
    return ModeWavefunction(dim, sides, masses, std::move(terms));
}

double ModeWavefunction::box_energy(const std::array<int, 2>& index) const noexcept {
    double e = 0.0;
    for (std::size_t i = 0; i < domain_.dim; ++i) {
        const double k = index[i] * kPi / (domain_.hi[i] - domain_.lo[i]);
        e += k * k / (2.0 * masses_[i]);
    }
    return e;
}

double ModeWavefunction::norm() const noexcept {
    double n = 0.0;
    for (const auto& m : modes_) n += std::norm(m.coeff);
    return n;
}

namespace {

// sin(n a), cos(n a) for n = 0..nmax by angle addition.
void harmonics(double a, int nmax, double* s, double* c) {
    const double s1 = std::sin(a);
    const double c1 = std::cos(a);
    s[0] = 0.0;
    c[0] = 1.0;
    for (int n = 1; n <= nmax; ++n) {
        s[n] = s[n - 1] * c1 + c[n - 1] * s1;
        c[n] = c[n - 1] * c1 - s[n - 1] * s1;
    }
}

constexpr int kMaxHarmonic = 64;

}  // namespace

FieldSample ModeWavefunction::sample(const Point& x, double t) const {
    if (max_index_ > kMaxHarmonic) throw std::invalid_argument("mode index too large for evaluation table");
    double s[2][kMaxHarmonic + 1];
    double c[2][kMaxHarmonic + 1];
    double norm_factor = 1.0;
    double kbase[2] = {0.0, 0.0};
    for (std::size_t i = 0; i < domain_.dim; ++i) {
        const double len = domain_.hi[i];
        kbase[i] = kPi / len;
        norm_factor *= std::sqrt(2.0 / len);
        harmonics(kbase[i] * x[i], max_index_, s[i], c[i]);
    }
    FieldSample out{};
    for (const auto& m : modes_) {
        const cplx a = m.coeff * std::polar(norm_factor, -m.energy * t);
        const int n0 = m.index[0];
        if (domain_.dim == 1) {
            out.psi += a * s[0][n0];
            out.grad[0] += a * (n0 * kbase[0] * c[0][n0]);
        } else {
            const int n1 = m.index[1];
            out.psi += a * (s[0][n0] * s[1][n1]);
            out.grad[0] += a * (n0 * kbase[0] * c[0][n0] * s[1][n1]);
            out.grad[1] += a * (n1 * kbase[1] * s[0][n0] * c[1][n1]);
        }
    }
    return out;
}

cplx ModeWavefunction::time_derivative(const Point& x, double t) const {
    cplx out;
    for (const auto& m : modes_) {
        double phi = 1.0;
        for (std::size_t i = 0; i < domain_.dim; ++i) {
            const double len = domain_.hi[i];
            phi *= std::sqrt(2.0 / len) * std::sin(m.index[i] * kPi * x[i] / len);
        }
        out += -kI * m.energy * m.coeff * std::polar(phi, -m.energy * t);
    }
    return out;
}

namespace {

// Integral of (2/L) sin(n k x) sin(m k x) over [a, b], k = pi/L.
double overlap_integral(int n, int m, double len, double a, double b) {
    const double k = kPi / len;
    auto prim = [&](double x) {
        if (n == m) return x / 2.0 - std::sin(2.0 * n * k * x) / (4.0 * n * k);
        const double d = (n - m) * k;
        const double s = (n + m) * k;
        return 0.5 * (std::sin(d * x) / d - std::sin(s * x) / s);
    };
    return (2.0 / len) * (prim(b) - prim(a));
}

}  // namespace

double ModeWavefunction::box_probability(const Point& lo, const Point& hi, double t) const {
    const std::size_t nm = modes_.size();
    std::vector<cplx> a(nm);
    for (std::size_t p = 0; p < nm; ++p) a[p] = modes_[p].coeff * std::polar(1.0, -modes_[p].energy * t);
    double total = 0.0;
    for (std::size_t p = 0; p < nm; ++p) {
        for (std::size_t q = p; q < nm; ++q) {
            double ov = 1.0;
            for (std::size_t i = 0; i < domain_.dim; ++i)
                ov *= overlap_integral(modes_[p].index[i], modes_[q].index[i], domain_.hi[i],
                                       std::clamp(lo[i], 0.0, domain_.hi[i]), std::clamp(hi[i], 0.0, domain_.hi[i]));
            const double w = (std::conj(a[p]) * a[q]).real() * ov;
            total += p == q ? w : 2.0 * w;
        }
    }
    return total;
}

ModeWavefunction evolve_modes(const ModeWavefunction& psi, double t) {
    if (!std::isfinite(t)) throw std::invalid_argument("evolution time must be finite");
    std::vector<ModeWavefunction::Term> terms;
    terms.reserve(psi.modes().size());
    for (const auto& m : psi.modes()) terms.push_back({m.index, m.coeff * std::polar(1.0, -m.energy * t)});
    const auto& d = psi.domain();
    return ModeWavefunction(d.dim, d.hi, psi.masses(), std::move(terms));
}

// ---------------------------------------------------------------------------
// PlaneWave

PlaneWave::PlaneWave(Domain box, Point k, std::array<double, 2> masses)
    : domain_(box), k_(k), masses_(masses) {
    check_dim(box.dim);
    omega_ = 0.0;
    for (std::size_t i = 0; i < box.dim; ++i) {
        if (box.boundary[i] != Boundary::Periodic) throw std::invalid_argument("plane waves need periodic axes");
        if (!(masses[i] > 0.0)) throw std::invalid_argument("masses must be positive");
        omega_ += k[i] * k[i] / (2.0 * masses[i]);
    }
    amplitude_ = 1.0 / std::sqrt(box.volume());
}

FieldSample PlaneWave::sample(const Point& x, double t) const {
    double phase = -omega_ * t;
    for (std::size_t i = 0; i < domain_.dim; ++i) phase += k_[i] * x[i];
    const cplx psi = std::polar(amplitude_, phase);
    FieldSample out{psi, {}};
    for (std::size_t i = 0; i < domain_.dim; ++i) out.grad[i] = kI * k_[i] * psi;
    return out;
}

// ---------------------------------------------------------------------------
// Axis / GridWavefunction

double Axis::spacing() const noexcept {
    const double len = hi - lo;
    return boundary == Boundary::Wall ? len / static_cast<double>(nodes + 1) : len / static_cast<double>(nodes);
}

double Axis::node(std::size_t j) const noexcept {
    return boundary == Boundary::Wall ? lo + static_cast<double>(j + 1) * spacing()
                                      : lo + static_cast<double>(j) * spacing();
}

double Axis::fractional_index(double x) const noexcept {
    return boundary == Boundary::Wall ? (x - lo) / spacing() - 1.0 : (x - lo) / spacing();
}

GridWavefunction::GridWavefunction(std::vector<Axis> axes, std::array<double, 2> masses,
                                   std::vector<cplx> amplitudes, Potential potential)
    : axes_(std::move(axes)), masses_(masses), amp_(std::move(amplitudes)), pot_(std::move(potential)) {
    check_dim(axes_.size());
    std::size_t total = 1;
    domain_.dim = axes_.size();
    for (std::size_t i = 0; i < axes_.size(); ++i) {
        const auto& a = axes_[i];
        if (a.nodes < 16) throw std::invalid_argument("grid axes need at least 16 nodes");
        if (!(a.hi > a.lo)) throw std::invalid_argument("grid axis has empty extent");
        if (!(masses_[i] > 0.0)) throw std::invalid_argument("masses must be positive");
        total *= a.nodes;
        domain_.lo[i] = a.lo;
        domain_.hi[i] = a.hi;
        domain_.boundary[i] = a.boundary;
        if (pot_.axis[i].empty()) pot_.axis[i].assign(a.nodes, 0.0);
        if (pot_.axis[i].size() != a.nodes) throw std::invalid_argument("axis potential size mismatch");
    }
    if (amp_.size() != total) throw std::invalid_argument("amplitude count does not match the grid");
    if (!pot_.coupling.empty() && pot_.coupling.size() != total)
        throw std::invalid_argument("coupling potential size mismatch");
    for (const auto& a : amp_)
        if (!std::isfinite(a.real()) || !std::isfinite(a.imag()))
            throw NumericalError("grid wavefunction has non-finite amplitudes");
    const double n = norm();
    if (std::abs(n - 1.0) > 1e-8)
        throw std::invalid_argument("grid wavefunction norm " + std::to_string(n) + " differs from 1 by more than 1e-8");
}

double GridWavefunction::cell_volume() const noexcept {
    double v = 1.0;
    for (const auto& a : axes_) v *= a.spacing();
    return v;
}

double GridWavefunction::norm() const noexcept {
    double s = 0.0;
    for (const auto& a : amp_) s += std::norm(a);
    return s * cell_volume();
}

Point GridWavefunction::node_position(std::size_t flat) const noexcept {
    if (axes_.size() == 1) return {axes_[0].node(flat), 0.0};
    const std::size_t n1 = axes_[1].nodes;
    return {axes_[0].node(flat / n1), axes_[1].node(flat % n1)};
}

double GridWavefunction::potential_at(std::size_t flat) const noexcept {
    double v = pot_.coupling.empty() ? 0.0 : pot_.coupling[flat];
    if (axes_.size() == 1) return v + pot_.axis[0][flat];
    const std::size_t n1 = axes_[1].nodes;
    return v + pot_.axis[0][flat / n1] + pot_.axis[1][flat % n1];
}

namespace {

// Index of a (possibly ghost) node along an axis and the sign of the reflected
// value; sign 0 means the node lies on a wall.
struct GhostIndex {
    std::size_t index;
    double sign;
};

inline GhostIndex ghost(long j, const Axis& a) {
    const long n = static_cast<long>(a.nodes);
    if (a.boundary == Boundary::Periodic) {
        long k = j % n;
        if (k < 0) k += n;
        return {static_cast<std::size_t>(k), 1.0};
    }
    double sign = 1.0;
    // Odd reflection about the walls at -1 and n.
    for (int guard = 0; guard < 4; ++guard) {
        if (j >= 0 && j < n) return {static_cast<std::size_t>(j), sign};
        if (j == -1 || j == n) return {0, 0.0};
        j = j < -1 ? -2 - j : 2 * n - j;
        sign = -sign;
    }
    return {0, 0.0};
}

// Catmull-Rom weights for nodes j-1, j, j+1, j+2 at fraction f.
inline void catmull_rom(double f, double w[4]) {
    const double f2 = f * f;
    const double f3 = f2 * f;
    w[0] = 0.5 * (-f3 + 2.0 * f2 - f);
    w[1] = 0.5 * (3.0 * f3 - 5.0 * f2 + 2.0);
    w[2] = 0.5 * (-3.0 * f3 + 4.0 * f2 + f);
    w[3] = 0.5 * (f3 - f2);
}

// Nodes j-2..j+3 around the interpolation cell together with the
// Catmull-Rom weights for j-1..j+2.
struct AxisStencil {
    GhostIndex nodes[6];
    double w[4];
    double inv_2h;
};

struct Stencil {
    std::size_t dim;
    AxisStencil ax[2];
    bool inside;
};

Stencil make_stencil(const std::vector<Axis>& axes, const Point& x) {
    Stencil st{};
    st.dim = axes.size();
    st.inside = true;
    for (std::size_t i = 0; i < st.dim; ++i) {
        const auto& a = axes[i];
        const double s = a.fractional_index(x[i]);
        if (a.boundary == Boundary::Wall && !(s >= -1.0 && s <= static_cast<double>(a.nodes))) {
            st.inside = false;
            return st;
        }
        const double fl = std::floor(s);
        const long j = static_cast<long>(fl);
        catmull_rom(s - fl, st.ax[i].w);
        for (int k = 0; k < 6; ++k) st.ax[i].nodes[k] = ghost(j - 2 + k, a);
        st.ax[i].inv_2h = 0.5 / a.spacing();
    }
    return st;
}

FieldSample apply_stencil(const Stencil& st, const std::vector<cplx>& amp, std::size_t n1) {
    FieldSample out{};
    if (!st.inside) return out;
    if (st.dim == 1) {
        const auto& ax = st.ax[0];
        cplx v[6];
        for (int k = 0; k < 6; ++k) v[k] = ax.nodes[k].sign * amp[ax.nodes[k].index];
        for (int k = 0; k < 4; ++k) {
            out.psi += ax.w[k] * v[k + 1];
            out.grad[0] += ax.w[k] * (v[k + 2] - v[k]);
        }
        out.grad[0] *= ax.inv_2h;
        return out;
    }
    const auto& a0 = st.ax[0];
    const auto& a1 = st.ax[1];
    cplx v[6][6];
    for (int p = 0; p < 6; ++p) {
        const double s0 = a0.nodes[p].sign;
        const std::size_t row = a0.nodes[p].index * n1;
        for (int q = 0; q < 6; ++q) {
            const double s = s0 * a1.nodes[q].sign;
            v[p][q] = s == 0.0 ? cplx{} : s * amp[row + a1.nodes[q].index];
        }
    }
    for (int p = 0; p < 4; ++p) {
        cplx row_psi, row_g0, row_g1;
        for (int q = 0; q < 4; ++q) {
            const double w1 = a1.w[q];
            row_psi += w1 * v[p + 1][q + 1];
            row_g0 += w1 * (v[p + 2][q + 1] - v[p][q + 1]);
            row_g1 += w1 * (v[p + 1][q + 2] - v[p + 1][q]);
        }
        out.psi += a0.w[p] * row_psi;
        out.grad[0] += a0.w[p] * row_g0;
        out.grad[1] += a0.w[p] * row_g1;
    }
    out.grad[0] *= a0.inv_2h;
    out.grad[1] *= a1.inv_2h;
    return out;
}

}  // namespace

FieldSample GridWavefunction::sample(const Point& x, double /*t*/) const {
    const Stencil st = make_stencil(axes_, domain_.wrap(x));
    return apply_stencil(st, amp_, axes_.size() > 1 ? axes_[1].nodes : 1);
}

double GridWavefunction::energy() const {
    const std::size_t n1 = axes_.size() > 1 ? axes_[1].nodes : 1;
    double e = 0.0;
    for (std::size_t f = 0; f < amp_.size(); ++f) {
        const std::size_t idx[2] = {axes_.size() > 1 ? f / n1 : f, f % n1};
        cplx h_psi = potential_at(f) * amp_[f];
        for (std::size_t i = 0; i < axes_.size(); ++i) {
            const auto& a = axes_[i];
            const double h = a.spacing();
            const std::size_t stride = i == 0 ? n1 : 1;
            const long j = static_cast<long>(idx[i]);
            auto neighbour = [&](long k) {
                const auto g = ghost(k, a);
                if (g.sign == 0.0) return cplx{};
                const long shift = static_cast<long>(g.index) - j;
                return g.sign * amp_[static_cast<std::size_t>(static_cast<long>(f) + shift * static_cast<long>(stride))];
            };
            h_psi += -(neighbour(j + 1) + neighbour(j - 1) - 2.0 * amp_[f]) / (2.0 * masses_[i] * h * h);
        }
        e += (std::conj(amp_[f]) * h_psi).real();
    }
    return e * cell_volume();
}

GridWavefunction GridWavefunction::with_amplitudes(std::vector<cplx> amplitudes) const {
    return GridWavefunction(axes_, masses_, std::move(amplitudes), pot_);
}

GridWavefunction GridWavefunction::with_hamiltonian(std::array<double, 2> masses, Potential potential) const {
    return GridWavefunction(axes_, masses, amp_, std::move(potential));
}

// Text format:
//   hvsim-wavefunction 1
//   dimension <d>
//   axis <i> <lo> <hi> <nodes> <spacing> <wall|periodic>      (d lines)
//   masses <m_0> [<m_1>]
//   potential_axis <i> <v_0> ... <v_{n_i-1}>                    (d lines)
//   potential_coupling <count> [<v> ...]
//   amplitudes <count>
//   <re> <im>                                                   (count lines)
void GridWavefunction::write_text(std::ostream& os) const {
    const auto old_prec = os.precision(17);
    os << "hvsim-wavefunction 1\n";
    os << "dimension " << axes_.size() << '\n';
    for (std::size_t i = 0; i < axes_.size(); ++i) {
        const auto& a = axes_[i];
        os << "axis " << i << ' ' << a.lo << ' ' << a.hi << ' ' << a.nodes << ' ' << a.spacing() << ' '
           << (a.boundary == Boundary::Wall ? "wall" : "periodic") << '\n';
    }
    os << "masses";
    for (std::size_t i = 0; i < axes_.size(); ++i) os << ' ' << masses_[i];
    os << '\n';
    for (std::size_t i = 0; i < axes_.size(); ++i) {
        os << "potential_axis " << i;
        for (double v : pot_.axis[i]) os << ' ' << v;
        os << '\n';
    }
    os << "potential_coupling " << pot_.coupling.size();
    for (double v : pot_.coupling) os << ' ' << v;
    os << '\n';
    os << "amplitudes " << amp_.size() << '\n';
    for (const auto& a : amp_) os << a.real() << ' ' << a.imag() << '\n';
    os.precision(old_prec);
}

GridWavefunction GridWavefunction::read_text(std::istream& is) {
    auto expect = [&](const std::string& word) {
        std::string w;
        if (!(is >> w) || w != word) throw ConfigError("wavefunction text: expected '" + word + "'");
    };
    expect("hvsim-wavefunction");
    int version = 0;
    if (!(is >> version) || version != 1) throw ConfigError("wavefunction text: unsupported version");
    expect("dimension");
    std::size_t dim = 0;
    is >> dim;
    check_dim(dim);
    std::vector<Axis> axes(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        expect("axis");
        std::size_t idx = 0;
        double spacing = 0.0;
        std::string kind;
        is >> idx >> axes[i].lo >> axes[i].hi >> axes[i].nodes >> spacing >> kind;
        if (!is || idx != i) throw ConfigError("wavefunction text: malformed axis line");
        if (kind == "wall") axes[i].boundary = Boundary::Wall;
        else if (kind == "periodic") axes[i].boundary = Boundary::Periodic;
        else throw ConfigError("wavefunction text: unknown boundary '" + kind + "'");
        if (std::abs(axes[i].spacing() - spacing) > 1e-12 * std::abs(spacing))
            throw ConfigError("wavefunction text: spacing inconsistent with extent and node count");
    }
    expect("masses");
    std::array<double, 2> masses{1.0, 1.0};
    for (std::size_t i = 0; i < dim; ++i) is >> masses[i];
    Potential pot;
    for (std::size_t i = 0; i < dim; ++i) {
        expect("potential_axis");
        std::size_t idx = 0;
        is >> idx;
        pot.axis[i].resize(axes[i].nodes);
        for (auto& v : pot.axis[i]) is >> v;
    }
    expect("potential_coupling");
    std::size_t nc = 0;
    is >> nc;
    pot.coupling.resize(nc);
    for (auto& v : pot.coupling) is >> v;
    expect("amplitudes");
    std::size_t count = 0;
    is >> count;
    std::vector<cplx> amp(count);
    for (auto& a : amp) {
        double re = 0.0, im = 0.0;
        is >> re >> im;
        a = {re, im};
    }
    if (!is) throw ConfigError("wavefunction text: truncated body");
    return GridWavefunction(std::move(axes), masses, std::move(amp), std::move(pot));
}

// ---------------------------------------------------------------------------
// Crank-Nicolson

CrankNicolson::CrankNicolson(const GridWavefunction& layout, double dt) : dt_(dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("time step must be positive and finite");
    const auto& axes = layout.axes();
    const std::size_t n1 = axes.size() > 1 ? axes[1].nodes : 1;
    const std::size_t n0 = axes[0].nodes;
    for (std::size_t i = 0; i < axes.size(); ++i) {
        const auto& a = axes[i];
        AxisSolver s;
        s.n = a.nodes;
        s.periodic = a.boundary == Boundary::Periodic;
        if (axes.size() == 1) {
            s.stride = 1;
            s.lines = 1;
            s.line_stride = 0;
        } else if (i == 0) {
            s.stride = n1;
            s.lines = n1;
            s.line_stride = 1;
        } else {
            s.stride = 1;
            s.lines = n0;
            s.line_stride = n1;
        }
        const double h = a.spacing();
        const double m = layout.masses()[i];
        const double off_h = -1.0 / (2.0 * m * h * h);
        const cplx half = kI * (0.5 * dt);
        s.off_a = half * off_h;
        s.off_b = -half * off_h;
        std::vector<cplx> diag_a(s.n);
        s.diag_b.resize(s.n);
        const auto& v = layout.potential().axis[i];
        for (std::size_t j = 0; j < s.n; ++j) {
            const double d = 1.0 / (m * h * h) + v[j];
            diag_a[j] = 1.0 + half * d;
            s.diag_b[j] = 1.0 - half * d;
        }
        if (s.periodic) {
            // Sherman-Morrison: A = T + u v^T with T tridiagonal.
            s.gamma = -diag_a[0];
            diag_a[0] -= s.gamma;
            diag_a[s.n - 1] -= s.off_a * s.off_a / s.gamma;
        }
        s.c_prime.resize(s.n);
        s.denom.resize(s.n);
        s.denom[0] = 1.0 / diag_a[0];
        s.c_prime[0] = s.off_a * s.denom[0];
        for (std::size_t j = 1; j < s.n; ++j) {
            s.denom[j] = 1.0 / (diag_a[j] - s.off_a * s.c_prime[j - 1]);
            s.c_prime[j] = s.off_a * s.denom[j];
        }
        if (s.periodic) {
            s.z.assign(s.n, cplx{});
            s.z[0] = s.gamma;
            s.z[s.n - 1] = s.off_a;
            s.thomas(s.z);
            const cplx vz = s.z[0] + s.off_a / s.gamma * s.z[s.n - 1];
            s.corner_factor = 1.0 / (1.0 + vz);
        }
        solvers_.push_back(std::move(s));
    }
    if (!layout.potential().coupling.empty()) {
        coupling_phase_.resize(layout.size());
        for (std::size_t f = 0; f < layout.size(); ++f)
            coupling_phase_[f] = std::polar(1.0, -0.5 * dt * layout.potential().coupling[f]);
    }
}

void CrankNicolson::AxisSolver::thomas(std::vector<cplx>& x) const {
    x[0] *= denom[0];
    for (std::size_t j = 1; j < n; ++j) x[j] = (x[j] - off_a * x[j - 1]) * denom[j];
    for (std::size_t j = n - 1; j-- > 0;) x[j] -= c_prime[j] * x[j + 1];
}

void CrankNicolson::AxisSolver::apply(std::vector<cplx>& amp, std::vector<cplx>& rhs, std::vector<cplx>& tmp) const {
    for (std::size_t line = 0; line < lines; ++line) {
        const std::size_t base = line * line_stride;
        for (std::size_t j = 0; j < n; ++j) tmp[j] = amp[base + j * stride];
        for (std::size_t j = 0; j < n; ++j) {
            cplx nb;
            if (j > 0) nb += tmp[j - 1];
            else if (periodic) nb += tmp[n - 1];
            if (j + 1 < n) nb += tmp[j + 1];
            else if (periodic) nb += tmp[0];
            rhs[j] = diag_b[j] * tmp[j] + off_b * nb;
        }
        thomas(rhs);
        if (periodic) {
            const cplx vy = rhs[0] + off_a / gamma * rhs[n - 1];
            const cplx scale = vy * corner_factor;
            for (std::size_t j = 0; j < n; ++j) rhs[j] -= scale * z[j];
        }
        for (std::size_t j = 0; j < n; ++j) amp[base + j * stride] = rhs[j];
    }
}

void CrankNicolson::step(std::vector<cplx>& amp) const {
    std::size_t maxn = 0;
    for (const auto& s : solvers_) maxn = std::max(maxn, s.n);
    std::vector<cplx> rhs(maxn), tmp(maxn);
    if (!coupling_phase_.empty())
        for (std::size_t f = 0; f < amp.size(); ++f) amp[f] *= coupling_phase_[f];
    for (const auto& s : solvers_) s.apply(amp, rhs, tmp);
    if (!coupling_phase_.empty())
        for (std::size_t f = 0; f < amp.size(); ++f) amp[f] *= coupling_phase_[f];
}

namespace {

void check_state(const GridWavefunction& layout, const std::vector<cplx>& amp, std::size_t step) {
    double s = 0.0;
    for (std::size_t f = 0; f < amp.size(); ++f) {
        if (!std::isfinite(amp[f].real()) || !std::isfinite(amp[f].imag())) {
            std::ostringstream msg;
            msg << "non-finite amplitude at node " << f << " after step " << step;
            throw NumericalError(msg.str());
        }
        s += std::norm(amp[f]);
    }
    const double n = s * layout.cell_volume();
    if (std::abs(n - 1.0) > 1e-6) {
        std::ostringstream msg;
        msg << "norm drift " << (n - 1.0) << " after step " << step;
        throw NumericalError(msg.str());
    }
}

}  // namespace

GridWavefunction evolve_grid(const GridWavefunction& psi, double dt, std::size_t steps) {
    if (steps == 0) return psi;
    const CrankNicolson cn(psi, dt);
    std::vector<cplx> amp = psi.amplitudes();
    for (std::size_t k = 0; k < steps; ++k) cn.step(amp);
    check_state(psi, amp, steps);
    return psi.with_amplitudes(std::move(amp));
}

// ---------------------------------------------------------------------------
// GridHistory

GridHistory::GridHistory(const GridWavefunction& initial, double t0, double dt, std::size_t steps_per_snapshot,
                         std::size_t snapshot_count)
    : t0_(t0), interval_(dt * static_cast<double>(steps_per_snapshot)) {
    if (snapshot_count < 2) throw std::invalid_argument("a grid history needs at least two snapshots");
    if (steps_per_snapshot < 1) throw std::invalid_argument("steps per snapshot must be >= 1");
    const CrankNicolson cn(initial, dt);
    snapshots_.reserve(snapshot_count);
    snapshots_.push_back(initial);
    std::vector<cplx> amp = initial.amplitudes();
    for (std::size_t k = 1; k < snapshot_count; ++k) {
        for (std::size_t s = 0; s < steps_per_snapshot; ++s) cn.step(amp);
        check_state(initial, amp, k * steps_per_snapshot);
        snapshots_.push_back(initial.with_amplitudes(amp));
    }
}

double GridHistory::t_end() const noexcept {
    return t0_ + interval_ * static_cast<double>(snapshots_.size() - 1);
}

FieldSample GridHistory::sample(const Point& x, double t) const {
    const double s = (t - t0_) / interval_;
    const double last = static_cast<double>(snapshots_.size() - 1);
    if (!(s >= -1e-9 && s <= last + 1e-9)) throw std::out_of_range("time outside the recorded grid history");
    const std::size_t count = snapshots_.size();
    const std::size_t npts = std::min<std::size_t>(4, count);
    long base = static_cast<long>(std::floor(s)) - 1;
    base = std::clamp<long>(base, 0, static_cast<long>(count - npts));
    // Lagrange weights in time.
    double w[4];
    for (std::size_t i = 0; i < npts; ++i) {
        double li = 1.0;
        const double ti = static_cast<double>(base) + static_cast<double>(i);
        for (std::size_t j = 0; j < npts; ++j) {
            if (j == i) continue;
            const double tj = static_cast<double>(base) + static_cast<double>(j);
            li *= (s - tj) / (ti - tj);
        }
        w[i] = li;
    }
    const auto& first = snapshots_.front();
    const Stencil st = make_stencil(first.axes(), first.domain().wrap(x));
    const std::size_t n1 = first.axes().size() > 1 ? first.axes()[1].nodes : 1;
    FieldSample out{};
    for (std::size_t i = 0; i < npts; ++i) {
        const FieldSample fs = apply_stencil(st, snapshots_[static_cast<std::size_t>(base) + i].amplitudes(), n1);
        out.psi += w[i] * fs.psi;
        out.grad[0] += w[i] * fs.grad[0];
        out.grad[1] += w[i] * fs.grad[1];
    }
    return out;
}

// ---------------------------------------------------------------------------

double node_threshold(const WaveField& psi) noexcept { return kNodeFactor * psi.mean_density(); }

std::array<double, 2> current(const WaveField& psi, const Point& x, double t) {
    const FieldSample fs = psi.sample(x, t);
    const double rho = std::norm(fs.psi);
    if (!(rho >= node_threshold(psi))) throw NodeError("current evaluated at a node of psi", rho);
    const auto m = psi.masses();
    std::array<double, 2> j{0.0, 0.0};
    for (std::size_t i = 0; i < psi.domain().dim; ++i) j[i] = (std::conj(fs.psi) * fs.grad[i]).imag() / m[i];
    return j;
}

std::vector<cplx> sample_on_grid(const ModeWavefunction& psi, const std::vector<Axis>& axes, double t) {
    std::size_t total = 1;
    for (const auto& a : axes) total *= a.nodes;
    const std::size_t n1 = axes.size() > 1 ? axes[1].nodes : 1;
    std::vector<cplx> out(total);
    for (std::size_t f = 0; f < total; ++f) {
        const Point x{axes[0].node(axes.size() > 1 ? f / n1 : f), axes.size() > 1 ? axes[1].node(f % n1) : 0.0};
        out[f] = psi.sample(x, t).psi;
    }
    return out;
}

double max_continuity_residual(const ModeWavefunction& psi, std::size_t nodes, double t) {
    const auto& d = psi.domain();
    std::vector<Axis> axes;
    for (std::size_t i = 0; i < d.dim; ++i) axes.push_back({d.lo[i], d.hi[i], nodes, Boundary::Wall});
    const auto amp = sample_on_grid(psi, axes, t);
    const std::size_t n1 = d.dim > 1 ? nodes : 1;
    const auto m = psi.masses();
    auto at = [&](long i0, long i1) -> cplx {
        if (i0 < 0 || i0 >= static_cast<long>(nodes)) return {};
        if (d.dim > 1 && (i1 < 0 || i1 >= static_cast<long>(nodes))) return {};
        return amp[static_cast<std::size_t>(i0) * n1 + static_cast<std::size_t>(i1)];
    };
    auto flux = [&](std::size_t axis, long i0, long i1) {
        const double h = axes[axis].spacing();
        const cplx g = axis == 0 ? (at(i0 + 1, i1) - at(i0 - 1, i1)) / (2.0 * h)
                                 : (at(i0, i1 + 1) - at(i0, i1 - 1)) / (2.0 * h);
        return (std::conj(at(i0, i1)) * g).imag() / m[axis];
    };
    double worst = 0.0;
    const long lo = 2;
    const long hi0 = static_cast<long>(nodes) - 2;
    const long hi1 = d.dim > 1 ? hi0 : 1;
    const long lo1 = d.dim > 1 ? lo : 0;
    for (long i0 = lo; i0 < hi0; ++i0) {
        for (long i1 = lo1; i1 < hi1; ++i1) {
            double div = (flux(0, i0 + 1, i1) - flux(0, i0 - 1, i1)) / (2.0 * axes[0].spacing());
            if (d.dim > 1) div += (flux(1, i0, i1 + 1) - flux(1, i0, i1 - 1)) / (2.0 * axes[1].spacing());
            const Point x{axes[0].node(static_cast<std::size_t>(i0)),
                          d.dim > 1 ? axes[1].node(static_cast<std::size_t>(i1)) : 0.0};
            const double drho_dt = 2.0 * (std::conj(at(i0, i1)) * psi.time_derivative(x, t)).real();
            worst = std::max(worst, std::abs(drho_dt + div));
        }
    }
    return worst;
}

}  // namespace hvsim::wave
