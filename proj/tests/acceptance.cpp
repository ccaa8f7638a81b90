// Acceptance run: one PASS/FAIL line per criterion, tolerances pinned below.
//
//   acceptance <path-to-hvsim-tool>
//
// Exit status is the number of failed criteria (capped at 10).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "hvsim/cli.hpp"
#include "hvsim/hvmodel.hpp"
#include "hvsim/kinematics.hpp"
#include "hvsim/random.hpp"
#include "hvsim/signalling.hpp"

using namespace hvsim;
namespace fs = std::filesystem;

namespace {

// Monte Carlo agreement, in standard errors.
constexpr double kSigmas = 4.0;
constexpr std::size_t kSingletSamples = 1'000'000;
constexpr double kSignalFreq = 0.20;
constexpr double kSignalFreqTol = 0.004;
constexpr std::size_t kRelaxSamples = 100'000;
constexpr double kRelaxRatio = 0.5;
constexpr std::size_t kSignalSamples = 2'000'000;
constexpr std::size_t kNullSamples = 200'000;
constexpr double kMinSignalToNoise = 5.0;
constexpr double kExponentLo = 1.8, kExponentHi = 2.2;
constexpr double kExactTol = 1e-12;
constexpr double kSlopeTol = 0.05;
constexpr double kFoliatedRelTol = 1e-8;
constexpr std::size_t kFoliatedSegments = 10'000;

const double kDeg = M_PI / 180.0;
const double kTsirelson = 2.0 * std::sqrt(2.0);

struct Outcome {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

hv::BlochSetting at(double deg) { return hv::BlochSetting(planar_unit(deg * kDeg)); }

// ---------------------------------------------------------------------------

Outcome singlet_correlation() {
    const auto rho = hv::HVDistribution::uniform();
    double worst = 0.0;
    bool ok = true;
    for (int k = 0; k < 12; ++k) {
        const double phi = 180.0 * k / 11.0;
        const auto e = hv::correlation(at(0), at(phi), rho, kSingletSamples, derive_seed(101, k));
        const double predicted = -at(0).dot(at(phi));
        const double dev = std::abs(e.estimate - predicted);
        ok = ok && dev <= kSigmas * e.std_error + kExactTol;
        if (e.std_error > 0) worst = std::max(worst, dev / e.std_error);
    }
    return {ok, fmt("12 pairs, n=1e6: max |E + m_A.m_B| = %.2f stderr (tol %.0f)", worst, kSigmas)};
}

Outcome equilibrium_no_signalling() {
    const auto rho = hv::HVDistribution::uniform();
    const double changes[][3] = {{0, 0, 90}, {30, 10, 170}, {90, 45, 135}, {0, 0, 180}, {60, 200, 20}};
    bool ok = true;
    double worst = 0.0;
    int k = 0;
    for (const auto& c : changes) {
        const auto sets = hv::transition_sets(hv::Wing::B, at(c[0]), at(c[1]), at(c[2]), rho, hv::MeasureMethod::Analytic);
        ok = ok && sets.mu_minus_plus == sets.mu_plus_minus;
        const auto s = hv::signal_statistic(hv::Wing::B, at(c[0]), at(c[1]), at(c[2]), rho, kSingletSamples, derive_seed(202, k++));
        // A change that leaves theta fixed has no transitions: estimate and stderr are both 0.
        ok = ok && std::abs(s.estimate) <= kSigmas * s.std_error;
        if (s.std_error > 0) worst = std::max(worst, std::abs(s.estimate) / s.std_error);
    }
    return {ok, fmt("5 remote changes: analytic mu[T(-,+)] == mu[T(+,-)], max |shift| = %.2f stderr (tol %.0f)", worst, kSigmas)};
}

Outcome nonequilibrium_signal() {
    const auto rho = hv::HVDistribution::separable({0.7, 0.3}, {1.0});
    const auto sets = hv::transition_sets(hv::Wing::B, at(0), at(0), at(90), rho, hv::MeasureMethod::Analytic);
    const double analytic = sets.mu_minus_plus - sets.mu_plus_minus;
    const auto s = hv::signal_statistic(hv::Wing::B, at(0), at(0), at(90), rho, kSingletSamples, 303);
    const bool ok = std::abs(analytic - kSignalFreq) <= kExactTol && std::abs(s.estimate - kSignalFreq) <= kSignalFreqTol &&
                    std::abs(s.estimate - analytic) <= kSigmas * s.std_error;
    return {ok, fmt("analytic %.12f, Monte Carlo %+.5f +- %.5f (target +0.20 +- %.3f)", analytic, s.estimate, s.std_error,
                    kSignalFreqTol)};
}

Outcome chsh() {
    const auto rho = hv::HVDistribution::uniform();
    const auto s = hv::chsh_value(hv::optimal_chsh_settings(), rho, kSingletSamples, 404);
    bool ok = std::abs(s.estimate - kTsirelson) <= kSigmas * s.std_error;
    double max_excess = -1e9;
    Rng rng = make_rng(405, 0);
    for (int k = 0; k < 60; ++k) {
        const hv::ChshSettings cs{at(360 * uniform01(rng)), at(360 * uniform01(rng)), at(360 * uniform01(rng)),
                                  at(360 * uniform01(rng))};
        const auto r = hv::chsh_value(cs, rho, 100'000, derive_seed(406, k));
        ok = ok && r.estimate <= kTsirelson + kSigmas * r.std_error;
        max_excess = std::max(max_excess, (r.estimate - kTsirelson) / r.std_error);
    }
    return {ok, fmt("S = %.4f +- %.4f at optimal settings; 60 random settings max (S - 2 sqrt 2) = %.2f stderr", s.estimate,
                    s.std_error, max_excess)};
}

Outcome equivariance() {
    cli::RelaxationParams p;
    p.state = "two_mode";
    p.equilibrium = true;
    p.samples = kRelaxSamples;
    p.cells = 16;
    p.snapshots = 16;
    p.tol = 1e-6;
    p.seed = 505;
    const auto s = cli::run_relaxation(p);
    bool ok = true;
    double worst = 0.0;
    for (std::size_t k = 0; k < s.times.size(); ++k) {
        ok = ok && s.l1[k] <= s.envelope[k];
        worst = std::max(worst, s.l1[k] / s.envelope[k]);
    }
    return {ok, fmt("1e5 trajectories over one beat period (t = %.4f), 16x16 cells: max L1/envelope = %.3f", s.times.back(), worst)};
}

Outcome relaxation() {
    cli::RelaxationParams p;
    p.state = "d11";
    p.equilibrium = false;
    p.samples = kRelaxSamples;
    p.cells = 16;
    p.snapshots = 8;
    p.tol = 1e-5;
    p.phase_seed = 11;
    p.seed = 606;
    const auto s = cli::run_relaxation(p);
    bool nonneg = true;
    for (double h : s.h) nonneg = nonneg && h >= 0.0;
    const bool ok = nonneg && s.h.back() < kRelaxRatio * s.h.front();
    return {ok, fmt("16 modes, 1e5 trajectories, t = 4 pi: H(0) = %.4f, H(final) = %.4f, ratio %.3f (need < %.1f)", s.h.front(),
                    s.h.back(), s.h.back() / s.h.front(), kRelaxRatio)};
}

Outcome signal_structure() {
    using namespace hvsim::signal;
    std::ostringstream detail;
    bool ok = true;

    ReferenceOptions eq;
    eq.epsilon = 0.0;
    SignalOptions so;
    so.samples = kNullSamples;
    so.seed = 701;
    const auto a = run_signal_experiment(reference_experiment(eq), so).report;
    const bool pa = a.max_signal_to_noise() < 1.0 && a.zero_sum_holds();
    detail << "(a) equilibrium max S/N " << fmt("%.2f", a.max_signal_to_noise()) << (pa ? "" : " FAIL");

    ReferenceOptions same;
    same.mass_b_after = 1.0;
    so.seed = 702;
    const auto b = run_signal_experiment(reference_experiment(same), so).report;
    const bool pb = b.identically_zero();
    detail << "; (b) unchanged H_B identically zero " << (pb ? "yes" : "no FAIL");

    so.samples = kSignalSamples;
    so.seed = 703;
    const auto c = run_signal_experiment(reference_experiment(ReferenceOptions{}), so).report;
    const double snr = c.signal_to_noise(c.times.size() - 1);
    const bool pc = snr > kMinSignalToNoise;
    detail << "; (c) S/N at t_max " << fmt("%.1f", snr) << (pc ? "" : " FAIL");
    bool pd = false;
    try {
        const auto fit = fit_time_scaling(c);
        pd = fit.exponent >= kExponentLo && fit.exponent <= kExponentHi;
        detail << "; (d) exponent " << fmt("%.3f [%.3f, %.3f]", fit.exponent, fit.ci_lo, fit.ci_hi) << (pd ? "" : " FAIL");
    } catch (const std::exception& e) {
        detail << "; (d) no fit: " << e.what() << " FAIL";
    }
    const bool pe = c.zero_sum_holds() && a.zero_sum_holds() && b.zero_sum_holds();
    double worst = 0.0;
    for (std::size_t k = 0; k < c.times.size(); ++k) worst = std::max(worst, std::abs(c.integral[k]) / c.integral_bound[k]);
    detail << "; (e) max |sum dp dx| / bound " << fmt("%.2f", worst) << (pe ? "" : " FAIL");
    ok = pa && pb && pc && pd && pe;
    return {ok, detail.str()};
}

Outcome kinematics_exactness() {
    using namespace hvsim::kin;
    const double r1 = lorentz_clock_reading(1.0, 0.0, 0.6), r2 = lorentz_clock_reading(0.0, 1.0, 0.6);
    const double tau = proper_time_flat(Worldline({{0.0, {0, 0, 0}}, {1.0, {0.6, 0, 0}}, {2.0, {0, 0, 0}}}));
    bool ok = std::abs(r1 - 1.25) <= kExactTol && std::abs(r2 + 0.75) <= kExactTol && std::abs(tau - 2.0 / 1.25) <= kExactTol;
    double worst_slope = 0.0;
    for (const auto& ev : {std::pair{1.0, 0.0}, std::pair{0.7, -1.9}, std::pair{-2.0, 0.5}}) {
        std::vector<double> vs, gaps;
        for (int k = 0; k <= 16; ++k) {
            const double v = std::pow(10.0, -3.0 + 2.0 * k / 16.0);
            vs.push_back(v);
            gaps.push_back(std::abs(poincare_first_order(ev.first, ev.second, v) - lorentz_clock_reading(ev.first, ev.second, v)) /
                           std::max(std::abs(ev.first), std::abs(ev.second)));
        }
        const double slope = signal::fit_power_law(vs, gaps).exponent;
        ok = ok && std::abs(slope - 2.0) <= kSlopeTol;
        worst_slope = std::max(worst_slope, std::abs(slope - 2.0));
    }
    return {ok, fmt("t'(1,0) = %.15g, t'(0,1) = %.15g, twin tau = %.15g, max |slope - 2| = %.4f", r1, r2, tau, worst_slope)};
}

Outcome foliated_desync() {
    using namespace hvsim::kin;
    const double eps = 0.01, L = 4.0, t1 = 0.0, t2 = 2.5;
    const Foliation f([eps](const Vec& x, double) { return 1.0 + eps * x[0]; },
                      [](const Vec&, double) { return Mat3{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}}; });
    const auto r = synchrony_report(Worldline::at_rest({0, 0, 0}, t1, t2), Worldline::at_rest({L, 0, 0}, t1, t2), f, t1, t2,
                                    kSynchronyTolerance, kFoliatedSegments);
    const double expect = eps * L * (t2 - t1);
    const double rel = std::abs((r.tau2 - r.tau1) - expect) / expect;
    const bool ok = rel < kFoliatedRelTol && r.simultaneous && !r.synchronous;
    return {ok, fmt("dtau = %.15g vs eps L dt = %.15g (rel %.2e), ", r.tau2 - r.tau1, expect, rel) +
                    (r.simultaneous ? "simultaneous" : "not simultaneous") + ", " +
                    (r.synchronous ? "synchronous" : "not synchronous")};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

bool same_tree(const fs::path& a, const fs::path& b, std::string& why) {
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(a)) {
        const auto other = b / e.path().filename();
        if (!fs::exists(other) || slurp(e.path()) != slurp(other)) {
            why = e.path().filename().string();
            return false;
        }
        ++files;
    }
    std::size_t other_files = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(b)) ++other_files;
    if (files != other_files) why = "file count";
    return files == other_files && files > 0;
}

Outcome cli_reproducibility(const std::string& tool) {
    if (tool.empty()) return {false, "no tool path given"};
    const auto root = fs::temp_directory_path() / "hvsim_acceptance_cli";
    fs::remove_all(root);
    const auto entries = cli::list_experiments(cli::bundled_config_dir());
    bool ok = entries.size() >= 8;
    std::string failures;
    for (const auto& e : entries) {
        auto go = [&](const std::string& tag, unsigned workers) {
            const auto out = root / e.name / tag;
            const std::string cmd = "\"" + tool + "\" run \"" + e.path.string() + "\" --workers " + std::to_string(workers) +
                                    " --output \"" + out.string() + "\" > /dev/null 2>&1";
            const int status = std::system(cmd.c_str());
            return std::pair{WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
        };
        const auto [s1, d1] = go("first", 1);
        const auto [s2, d2] = go("second", 1);
        const auto [s4, d4] = go("four", 4);
        std::string why;
        const bool same = s1 == 0 && s2 == 0 && s4 == 0 && same_tree(d1, d2, why) && same_tree(d1, d4, why);
        if (!same) failures += " " + e.name + "(exit " + std::to_string(s1) + "/" + std::to_string(s2) + "/" +
                               std::to_string(s4) + (why.empty() ? "" : ", " + why) + ")";
        ok = ok && same;
    }
    fs::remove_all(root);
    return {ok, std::to_string(entries.size()) + " bundled configs, two runs at 1 worker and one at 4" +
                    (failures.empty() ? ": all artifacts byte-identical" : ", differing:" + failures)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::string tool = argc > 1 ? argv[1] : "";
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"singlet equilibrium correlation", singlet_correlation},
        {"equilibrium no-signalling", equilibrium_no_signalling},
        {"non-equilibrium signal", nonequilibrium_signal},
        {"CHSH", chsh},
        {"equivariance", equivariance},
        {"relaxation", relaxation},
        {"signal structure", signal_structure},
        {"kinematics exactness", kinematics_exactness},
        {"foliated desync", foliated_desync},
        {"CLI reproducibility", [&] { return cli_reproducibility(tool); }},
    };
    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o{false, ""};
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failed += !o.pass;
        std::printf("%s  %2zu %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first.c_str(), o.detail.c_str(),
                    secs);
        std::fflush(stdout);
    }
    return std::min(failed, 10);
}
