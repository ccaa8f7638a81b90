#pragma once

/**
 * @file cli.hpp
 * @brief Batch experiment runner: key-value configuration files, the four
 *        canonical studies (singlet, relax, signal, kinematics) and their
 *        artifacts (CSV tables, summary.txt, stamp.txt).
 *
 * Configuration syntax, one entry per line:
 *
 *   # comment
 *   experiment = singlet
 *   seed = 42
 *   [singlet]
 *   samples = 200000
 *
 * Entries after a `[block]` header are stored as `block.key`; dotted keys may
 * also be written directly. Lists are comma separated.
 */

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hvsim/signalling.hpp"
#include "hvsim/wavefunction.hpp"

namespace hvsim::cli {

/// Process exit statuses.
enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitNumerical = 3, kExitInvariant = 4 };

// ---------------------------------------------------------------------------
// Configuration

class KeyValueConfig {
  public:
    /// Throws ConfigError on malformed lines or duplicate keys; `origin`
    /// prefixes the messages.
    static KeyValueConfig parse(std::istream& in, const std::string& origin = "config");
    static KeyValueConfig load(const std::filesystem::path& path);

    void set(const std::string& key, const std::string& value) { entries_[key] = value; }
    void erase(const std::string& key) { entries_.erase(key); }
    [[nodiscard]] bool has(const std::string& key) const { return entries_.count(key) != 0; }
    [[nodiscard]] const std::string& at(const std::string& key) const;
    [[nodiscard]] const std::map<std::string, std::string>& entries() const noexcept { return entries_; }

  private:
    std::map<std::string, std::string> entries_;
};

enum class ParamType { Int, Real, RealList, Bool, Choice };

struct ParamSpec {
    std::string key;
    ParamType type;
    std::string default_value;
    std::string help;
    /// Allowed values for ParamType::Choice.
    std::vector<std::string> choices{};
};

enum class ExperimentKind { Singlet, Relax, Signal, Kinematics };

[[nodiscard]] std::string to_string(ExperimentKind kind);
[[nodiscard]] ExperimentKind parse_kind(const std::string& name);
/// Parameters of the experiment's block, without the block prefix.
[[nodiscard]] const std::vector<ParamSpec>& schema(ExperimentKind kind);

/// Typed view of one experiment block with defaults filled in.
class Params {
  public:
    Params(ExperimentKind kind, std::map<std::string, std::string> values);

    [[nodiscard]] std::int64_t integer(const std::string& key) const;
    [[nodiscard]] std::size_t count(const std::string& key) const;
    [[nodiscard]] double real(const std::string& key) const;
    [[nodiscard]] std::vector<double> reals(const std::string& key) const;
    [[nodiscard]] bool flag(const std::string& key) const;
    [[nodiscard]] const std::string& text(const std::string& key) const;

  private:
    const ParamSpec& spec(const std::string& key, ParamType type) const;

    ExperimentKind kind_;
    std::map<std::string, std::string> values_;
};

struct RunConfig {
    ExperimentKind kind = ExperimentKind::Singlet;
    /// Catalog name, the config file stem.
    std::string name;
    Params params{ExperimentKind::Singlet, {}};
    std::uint64_t seed = 0;
    /// Empty means "derive from the output root".
    std::string output;
    unsigned workers = 1;

    /// Sorted `key = value` lines of everything that affects the results
    /// (worker count and output directory excluded).
    [[nodiscard]] std::string canonical() const;
};

/// Checks the schema (required keys, unknown keys, value types) before any
/// computation. Throws ConfigError.
[[nodiscard]] RunConfig validate_config(const KeyValueConfig& cfg, const std::string& name);

// ---------------------------------------------------------------------------
// Experiments

struct Table {
    std::string file;
    std::string csv;
};

struct Check {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct RunResult {
    std::vector<Table> tables;
    /// Ordered key-value lines for summary.txt.
    std::vector<std::pair<std::string, std::string>> summary;
    std::vector<Check> checks;

    [[nodiscard]] bool passed() const;
};

/// Runs the experiment. Throws ConfigError for parameter values the schema
/// cannot catch and NumericalError for integration failures.
[[nodiscard]] RunResult execute(const RunConfig& cfg);

/// Box of side pi with unit masses. "two_mode" is (psi_11 + i psi_21)/sqrt 2;
/// "d11" is the 16 modes (n1, n2) in {1..4}^2 with equal amplitudes and
/// phases drawn from `phase_seed`.
[[nodiscard]] wave::ModeWavefunction relaxation_state(const std::string& state, std::uint64_t phase_seed);

struct RelaxationParams {
    std::string state = "d11";
    /// Sample from |psi_0|^2, otherwise from the ground mode |psi_11|^2.
    bool equilibrium = false;
    std::size_t samples = 100000;
    std::size_t cells = 16;
    /// 0 picks one beat period (two_mode) or 4 pi (d11).
    double t_final = 0.0;
    std::size_t snapshots = 8;
    double tol = 1e-5;
    /// Seed of the d11 mode phases.
    std::uint64_t phase_seed = 11;
    /// Seed of the initial ensemble.
    std::uint64_t seed = 1;
    unsigned workers = 1;
};

struct RelaxationSeries {
    /// Includes t = 0.
    std::vector<double> times;
    std::vector<double> h;
    std::vector<double> l1;
    std::vector<double> envelope;
    std::size_t stalled = 0;
};

[[nodiscard]] RelaxationSeries run_relaxation(const RelaxationParams& p);

// ---------------------------------------------------------------------------
// Runner

struct RunOptions {
    std::filesystem::path config;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
    std::optional<std::filesystem::path> output;
};

/// 64-bit FNV-1a.
[[nodiscard]] std::uint64_t fnv1a64(const std::string& bytes) noexcept;

/// Output directory: explicit flag, else the config's `output` key, else
/// $HVSIM_OUTPUT_ROOT/<name>, else ./hvsim-runs/<name>.
[[nodiscard]] std::filesystem::path resolve_output(const RunConfig& cfg, const RunOptions& options);

/// Loads, validates, runs and writes artifacts. Diagnostics go to `log`.
/// Returns an ExitCode; nothing is written on a configuration error.
int run(const RunOptions& options, std::ostream& log);

struct CatalogEntry {
    std::string name;
    std::filesystem::path path;
    std::string description;
};

/// $HVSIM_CONFIG_DIR if set, else the configs/ directory of the source tree.
[[nodiscard]] std::filesystem::path bundled_config_dir();

/// *.conf files in `dir`, sorted by name; the description is the first
/// comment line.
[[nodiscard]] std::vector<CatalogEntry> list_experiments(const std::filesystem::path& dir);
[[nodiscard]] std::string format_catalog(const std::vector<CatalogEntry>& entries);

}  // namespace hvsim::cli
