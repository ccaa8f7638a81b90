#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "hvsim/cli.hpp"
#include "hvsim/error.hpp"
#include "hvsim/hvmodel.hpp"
#include "hvsim/kinematics.hpp"
#include "hvsim/signalling.hpp"

namespace py = pybind11;
using namespace hvsim;

namespace {

using Triple = std::array<double, 3>;

hv::BlochSetting setting(const Triple& v) { return hv::BlochSetting({v[0], v[1], v[2]}); }

hv::HVDistribution distribution(const std::vector<double>& u, const std::vector<double>& w) {
    if (u.size() <= 1 && w.size() <= 1) return hv::HVDistribution::uniform();
    return hv::HVDistribution::separable(u.empty() ? std::vector<double>{1.0} : u, w.empty() ? std::vector<double>{1.0} : w);
}

py::tuple estimate(const hv::MonteCarloEstimate& e) { return py::make_tuple(e.estimate, e.std_error); }

kin::Worldline worldline(const std::vector<std::pair<double, Triple>>& events) {
    std::vector<kin::Event> ev;
    for (const auto& [t, x] : events) ev.push_back({t, x});
    return kin::Worldline(std::move(ev));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Hidden-variables, pilot-wave and clock-kinematics simulations.";
    m.attr("__version__") = HVSIM_VERSION;

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    // Settings are 3-vectors; they are normalized. Empty mass lists mean uniform.
    m.def(
        "correlation",
        [](const Triple& ma, const Triple& mb, std::size_t n, std::uint64_t seed, const std::vector<double>& u,
           const std::vector<double>& w, unsigned workers) {
            py::gil_scoped_release nogil;
            return hv::correlation(setting(ma), setting(mb), distribution(u, w), n, seed, workers);
        },
        py::arg("m_a"), py::arg("m_b"), py::arg("samples"), py::arg("seed"), py::arg("u_masses") = std::vector<double>{},
        py::arg("w_masses") = std::vector<double>{}, py::arg("workers") = 1u);

    m.def(
        "transition_sets",
        [](const Triple& fixed, const Triple& old_a, const Triple& new_a, const std::vector<double>& u,
           const std::vector<double>& w) {
            const auto r = hv::transition_sets(hv::Wing::B, setting(fixed), setting(old_a), setting(new_a), distribution(u, w),
                                               hv::MeasureMethod::Analytic);
            return py::dict(py::arg("mu_minus_plus") = r.mu_minus_plus, py::arg("mu_plus_minus") = r.mu_plus_minus);
        },
        "Analytic wing-B transition-set measures under a change of the wing-A setting.", py::arg("m_b"), py::arg("m_a_old"),
        py::arg("m_a_new"), py::arg("u_masses") = std::vector<double>{}, py::arg("w_masses") = std::vector<double>{});

    m.def(
        "signal_statistic",
        [](const Triple& fixed, const Triple& old_a, const Triple& new_a, std::size_t n, std::uint64_t seed,
           const std::vector<double>& u, const std::vector<double>& w) {
            return estimate(hv::signal_statistic(hv::Wing::B, setting(fixed), setting(old_a), setting(new_a), distribution(u, w), n,
                                                 seed));
        },
        py::arg("m_b"), py::arg("m_a_old"), py::arg("m_a_new"), py::arg("samples"), py::arg("seed"),
        py::arg("u_masses") = std::vector<double>{}, py::arg("w_masses") = std::vector<double>{});

    m.def(
        "chsh",
        [](std::size_t n, std::uint64_t seed) {
            return estimate(hv::chsh_value(hv::optimal_chsh_settings(), hv::HVDistribution::uniform(), n, seed));
        },
        "S at the optimal settings under the equilibrium distribution.", py::arg("samples"), py::arg("seed"));

    py::class_<hv::MonteCarloEstimate>(m, "Estimate")
        .def_readonly("estimate", &hv::MonteCarloEstimate::estimate)
        .def_readonly("std_error", &hv::MonteCarloEstimate::std_error)
        .def_readonly("samples", &hv::MonteCarloEstimate::samples);

    m.def(
        "run_relaxation",
        [](const std::string& state, bool equilibrium, std::size_t samples, std::size_t cells, double t_final,
           std::size_t snapshots, double tol, std::uint64_t phase_seed, std::uint64_t seed) {
            cli::RelaxationParams p{state, equilibrium, samples, cells, t_final, snapshots, tol, phase_seed, seed, 1};
            cli::RelaxationSeries s;
            {
                py::gil_scoped_release nogil;
                s = cli::run_relaxation(p);
            }
            return py::dict(py::arg("times") = s.times, py::arg("h") = s.h, py::arg("l1") = s.l1,
                            py::arg("envelope") = s.envelope);
        },
        py::arg("state") = "d11", py::arg("equilibrium") = false, py::arg("samples") = 10000, py::arg("cells") = 16,
        py::arg("t_final") = 0.0, py::arg("snapshots") = 8, py::arg("tol") = 1e-5, py::arg("phase_seed") = 11,
        py::arg("seed") = 1);

    m.def(
        "run_signal",
        [](std::size_t samples, std::uint64_t seed, double epsilon, double mass_b_after, double tilt, std::size_t nodes,
           const std::vector<double>& times) {
            signal::ReferenceOptions ro;
            ro.epsilon = epsilon;
            ro.mass_b_after = mass_b_after;
            ro.tilt = tilt;
            ro.nodes = nodes;
            if (!times.empty()) ro.times = times;
            signal::SignalOptions so;
            so.samples = samples;
            so.seed = seed;
            so.tol = 1e-5;
            signal::SignalReport r;
            {
                py::gil_scoped_release nogil;
                r = signal::run_signal_experiment(signal::reference_experiment(ro), so).report;
            }
            return py::dict(py::arg("times") = r.times, py::arg("delta_p") = r.delta_p, py::arg("noise_floor") = r.noise_floor,
                            py::arg("integral") = r.integral, py::arg("integral_bound") = r.integral_bound,
                            py::arg("identically_zero") = r.identically_zero(),
                            py::arg("max_signal_to_noise") = r.max_signal_to_noise());
        },
        "Paired switched/unswitched run of the reference two-particle experiment.", py::arg("samples"), py::arg("seed"),
        py::arg("epsilon") = 0.5, py::arg("mass_b_after") = 0.5, py::arg("tilt") = 0.0, py::arg("nodes") = 256,
        py::arg("times") = std::vector<double>{});

    m.def("fit_power_law", [](const std::vector<double>& t, const std::vector<double>& y) {
        const auto f = signal::fit_power_law(t, y);
        return py::dict(py::arg("exponent") = f.exponent, py::arg("ci_lo") = f.ci_lo, py::arg("ci_hi") = f.ci_hi);
    });

    m.def("lorentz_clock_reading", &kin::lorentz_clock_reading, py::arg("t"), py::arg("x"), py::arg("v"), py::arg("c") = 1.0);
    m.def("poincare_first_order", &kin::poincare_first_order, py::arg("t"), py::arg("x"), py::arg("v"), py::arg("c") = 1.0);
    m.def(
        "proper_time_flat", [](const std::vector<std::pair<double, Triple>>& events) { return kin::proper_time_flat(worldline(events)); },
        "Proper time along (t, (x, y, z)) events joined by straight segments.", py::arg("events"));
    m.def(
        "lapse_desync",
        [](double epsilon, double separation, double t1, double t2, std::size_t segments) {
            const kin::Foliation f([epsilon](const kin::Vec& x, double) { return 1.0 + epsilon * x[0]; },
                                   [](const kin::Vec&, double) { return kin::Mat3{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}}; });
            const auto r = kin::synchrony_report(kin::Worldline::at_rest({0, 0, 0}, t1, t2),
                                                 kin::Worldline::at_rest({separation, 0, 0}, t1, t2), f, t1, t2,
                                                 kin::kSynchronyTolerance, segments);
            return py::dict(py::arg("tau1") = r.tau1, py::arg("tau2") = r.tau2, py::arg("simultaneous") = r.simultaneous,
                            py::arg("synchronous") = r.synchronous);
        },
        "Two clocks at rest at x = 0 and x = separation under N = 1 + epsilon x.", py::arg("epsilon"), py::arg("separation"),
        py::arg("t1"), py::arg("t2"), py::arg("segments") = 1);

    m.def(
        "run_config",
        [](const std::filesystem::path& config, std::optional<std::uint64_t> seed, std::optional<unsigned> workers,
           std::optional<std::filesystem::path> output) {
            std::ostringstream log;
            int code;
            {
                py::gil_scoped_release nogil;
                code = cli::run({config, seed, workers, output}, log);
            }
            return py::make_tuple(code, log.str());
        },
        "Run a config file; returns (exit code, log text).", py::arg("config"), py::arg("seed") = py::none(),
        py::arg("workers") = py::none(), py::arg("output") = py::none());

    m.def(
        "list_experiments",
        [](const std::filesystem::path& dir) {
            py::list out;
            for (const auto& e : cli::list_experiments(dir)) out.append(py::make_tuple(e.name, e.path, e.description));
            return out;
        },
        py::arg("config_dir"));
}
