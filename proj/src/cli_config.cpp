#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hvsim/cli.hpp"
#include "hvsim/error.hpp"

namespace hvsim::cli {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool valid_key(const std::string& k) {
    if (k.empty() || k.front() == '.' || k.back() == '.') return false;
    return std::all_of(k.begin(), k.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'; });
}

std::optional<double> parse_real(const std::string& s) {
    double v = 0.0;
    const auto* end = s.data() + s.size();
    const auto r = std::from_chars(s.data(), end, v);
    if (r.ec != std::errc() || r.ptr != end || !std::isfinite(v)) return std::nullopt;
    return v;
}

// Integers may be written as 200000 or 2e5.
std::optional<std::int64_t> parse_integer(const std::string& s) {
    std::int64_t v = 0;
    const auto* end = s.data() + s.size();
    const auto r = std::from_chars(s.data(), end, v);
    if (r.ec == std::errc() && r.ptr == end) return v;
    const auto d = parse_real(s);
    if (d && *d == std::floor(*d) && std::abs(*d) < 9e15) return static_cast<std::int64_t>(*d);
    return std::nullopt;
}

std::optional<std::vector<double>> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto v = parse_real(trim(item));
        if (!v) return std::nullopt;
        out.push_back(*v);
    }
    if (out.empty()) return std::nullopt;
    return out;
}

void check_value(const ParamSpec& p, const std::string& value, const std::string& where) {
    bool ok = true;
    switch (p.type) {
        case ParamType::Int: ok = parse_integer(value).has_value(); break;
        case ParamType::Real: ok = parse_real(value).has_value(); break;
        case ParamType::RealList: ok = parse_list(value).has_value(); break;
        case ParamType::Bool: ok = value == "true" || value == "false"; break;
        case ParamType::Choice:
            ok = std::find(p.choices.begin(), p.choices.end(), value) != p.choices.end();
            break;
    }
    if (!ok) throw ConfigError(where + ": invalid value '" + value + "'");
}

const std::vector<ParamSpec> kSinglet = {
    {"samples", ParamType::Int, "1000000", "Monte Carlo draws per estimate"},
    {"pairs", ParamType::Int, "12", "setting pairs with m_A.m_B spread over [-1, 1]"},
    {"u_masses", ParamType::RealList, "1", "bin masses of f(u)"},
    {"w_masses", ParamType::RealList, "1", "bin masses of g(w)"},
    {"fixed_deg", ParamType::Real, "0", "wing B setting for the remote change"},
    {"remote_old_deg", ParamType::Real, "0", "wing A setting before the change"},
    {"remote_new_deg", ParamType::Real, "90", "wing A setting after the change"},
    {"chsh", ParamType::Bool, "true", "also estimate S at the optimal settings"},
};

const std::vector<ParamSpec> kRelax = {
    {"state", ParamType::Choice, "d11", "guiding wavefunction", {"two_mode", "d11"}},
    {"ensemble", ParamType::Choice, "ground", "initial density", {"equilibrium", "ground"}},
    {"samples", ParamType::Int, "100000", "trajectories"},
    {"cells", ParamType::Int, "16", "coarse-graining cells per axis"},
    {"t_final", ParamType::Real, "0", "end time; 0 picks the state's default"},
    {"snapshots", ParamType::Int, "8", "equally spaced observation times"},
    {"tol", ParamType::Real, "1e-5", "trajectory error tolerance per unit time"},
    {"phase_seed", ParamType::Int, "11", "seed of the random mode phases"},
    {"h_ratio", ParamType::Real, "0.5", "required H(final) / H(0) for a non-equilibrium run"},
};

const std::vector<ParamSpec> kSignal = {
    {"samples", ParamType::Int, "200000", "ensemble size"},
    {"epsilon", ParamType::Real, "0.5", "non-equilibrium tilt of the initial density"},
    {"sigma", ParamType::Real, "0.25", "width of the tanh tilt"},
    {"mass_b_after", ParamType::Real, "0.5", "particle B mass after the switch"},
    {"tilt", ParamType::Real, "0", "linear potential added on particle B"},
    {"nodes", ParamType::Int, "256", "grid nodes per axis"},
    {"half_width", ParamType::Real, "7", "grid covers [-half_width, half_width]"},
    {"times", ParamType::RealList, "0.04,0.0633957,0.100475,0.159243,0.252383,0.4", "observation times"},
    {"bin_width", ParamType::Real, "2", "x_A bin width"},
    {"bin_half_width", ParamType::Real, "4", "bins cover [-bin_half_width, bin_half_width]"},
    {"dt", ParamType::Real, "0.002", "Crank-Nicolson step"},
    {"steps_per_snapshot", ParamType::Int, "5", "steps between stored snapshots"},
    {"tol", ParamType::Real, "1e-5", "trajectory error tolerance per unit time"},
    {"min_snr", ParamType::Real, "5", "signal/noise required at the last time"},
    {"fit", ParamType::Bool, "false", "require the fitted exponent to lie in [exponent_lo, exponent_hi]"},
    {"exponent_lo", ParamType::Real, "1.8", ""},
    {"exponent_hi", ParamType::Real, "2.2", ""},
};

const std::vector<ParamSpec> kKinematics = {
    {"scenario", ParamType::Choice, "lorentz", "which study", {"lorentz", "foliation"}},
    {"velocity", ParamType::Real, "0.6", "twin speed in units of c"},
    {"sweep_points", ParamType::Int, "9", "v/c values over [1e-3, 1e-1]"},
    {"epsilon", ParamType::Real, "0.01", "lapse gradient, N = 1 + epsilon x"},
    {"separation", ParamType::Real, "4", "distance L between the clocks"},
    {"t_start", ParamType::Real, "0", "first slice"},
    {"t_end", ParamType::Real, "2.5", "second slice"},
    {"segments", ParamType::Int, "10000", "subdivisions per worldline segment"},
};

}  // namespace

// ---------------------------------------------------------------------------

KeyValueConfig KeyValueConfig::parse(std::istream& in, const std::string& origin) {
    KeyValueConfig cfg;
    std::string line, block;
    for (int lineno = 1; std::getline(in, line); ++lineno) {
        const std::string where = origin + ":" + std::to_string(lineno);
        const auto hash = line.find('#');
        const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
        if (body.empty()) continue;
        if (body.front() == '[') {
            if (body.back() != ']') throw ConfigError(where + ": unterminated block header");
            block = trim(body.substr(1, body.size() - 2));
            if (!valid_key(block) || block.find('.') != std::string::npos)
                throw ConfigError(where + ": invalid block name '" + block + "'");
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
        const std::string key = trim(body.substr(0, eq));
        const std::string value = trim(body.substr(eq + 1));
        if (!valid_key(key)) throw ConfigError(where + ": invalid key '" + key + "'");
        if (value.empty()) throw ConfigError(where + ": empty value for '" + key + "'");
        const std::string full = block.empty() ? key : block + "." + key;
        if (cfg.has(full)) throw ConfigError(where + ": duplicate key '" + full + "'");
        cfg.entries_[full] = value;
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    return parse(in, path.string());
}

const std::string& KeyValueConfig::at(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError("missing key '" + key + "'");
    return it->second;
}

std::string to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::Singlet: return "singlet";
        case ExperimentKind::Relax: return "relax";
        case ExperimentKind::Signal: return "signal";
        case ExperimentKind::Kinematics: return "kinematics";
    }
    return "?";
}

ExperimentKind parse_kind(const std::string& name) {
    for (auto k : {ExperimentKind::Singlet, ExperimentKind::Relax, ExperimentKind::Signal, ExperimentKind::Kinematics})
        if (to_string(k) == name) return k;
    throw ConfigError("unknown experiment '" + name + "' (expected singlet, relax, signal or kinematics)");
}

const std::vector<ParamSpec>& schema(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::Singlet: return kSinglet;
        case ExperimentKind::Relax: return kRelax;
        case ExperimentKind::Signal: return kSignal;
        case ExperimentKind::Kinematics: return kKinematics;
    }
    return kSinglet;
}

// ---------------------------------------------------------------------------

Params::Params(ExperimentKind kind, std::map<std::string, std::string> values) : kind_(kind), values_(std::move(values)) {
    const auto& specs = schema(kind_);
    for (const auto& [k, v] : values_) {
        const auto it = std::find_if(specs.begin(), specs.end(), [&](const ParamSpec& p) { return p.key == k; });
        if (it == specs.end()) throw ConfigError("unknown key '" + to_string(kind_) + "." + k + "'");
        check_value(*it, v, to_string(kind_) + "." + k);
    }
    for (const auto& p : specs) values_.emplace(p.key, p.default_value);
}

const ParamSpec& Params::spec(const std::string& key, ParamType type) const {
    for (const auto& p : schema(kind_))
        if (p.key == key && p.type == type) return p;
    throw std::logic_error("no parameter " + key + " of the requested type");
}

std::int64_t Params::integer(const std::string& key) const {
    (void)spec(key, ParamType::Int);
    return *parse_integer(values_.at(key));
}

std::size_t Params::count(const std::string& key) const {
    const auto v = integer(key);
    if (v < 1) throw ConfigError(to_string(kind_) + "." + key + " must be at least 1");
    return static_cast<std::size_t>(v);
}

double Params::real(const std::string& key) const {
    (void)spec(key, ParamType::Real);
    return *parse_real(values_.at(key));
}

std::vector<double> Params::reals(const std::string& key) const {
    (void)spec(key, ParamType::RealList);
    return *parse_list(values_.at(key));
}

bool Params::flag(const std::string& key) const {
    (void)spec(key, ParamType::Bool);
    return values_.at(key) == "true";
}

const std::string& Params::text(const std::string& key) const {
    (void)spec(key, ParamType::Choice);
    return values_.at(key);
}

// ---------------------------------------------------------------------------

std::string RunConfig::canonical() const {
    std::ostringstream os;
    os << "experiment = " << to_string(kind) << "\n";
    os << "seed = " << seed << "\n";
    for (const auto& p : schema(kind)) {
        os << to_string(kind) << "." << p.key << " = ";
        switch (p.type) {
            case ParamType::Int: os << params.integer(p.key); break;
            case ParamType::Real: os << std::to_string(params.real(p.key)); break;
            case ParamType::RealList: {
                const auto v = params.reals(p.key);
                for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << std::to_string(v[i]);
                break;
            }
            case ParamType::Bool: os << (params.flag(p.key) ? "true" : "false"); break;
            case ParamType::Choice: os << params.text(p.key); break;
        }
        os << "\n";
    }
    return os.str();
}

RunConfig validate_config(const KeyValueConfig& cfg, const std::string& name) {
    RunConfig rc;
    rc.name = name;
    rc.kind = parse_kind(cfg.at("experiment"));
    const std::string prefix = to_string(rc.kind) + ".";

    std::map<std::string, std::string> block;
    for (const auto& [k, v] : cfg.entries()) {
        if (k == "experiment" || k == "seed" || k == "workers" || k == "output") continue;
        if (k.rfind(prefix, 0) != 0) throw ConfigError("unknown key '" + k + "'");
        block[k.substr(prefix.size())] = v;
    }

    const auto seed = parse_integer(cfg.at("seed"));
    if (!seed || *seed < 0) throw ConfigError("seed must be a non-negative integer");
    rc.seed = static_cast<std::uint64_t>(*seed);
    if (cfg.has("workers")) {
        const auto w = parse_integer(cfg.at("workers"));
        if (!w || *w < 1 || *w > 1024) throw ConfigError("workers must be an integer in [1, 1024]");
        rc.workers = static_cast<unsigned>(*w);
    }
    if (cfg.has("output")) rc.output = cfg.at("output");
    rc.params = Params(rc.kind, std::move(block));
    return rc;
}

}  // namespace hvsim::cli
