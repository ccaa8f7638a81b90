#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

#include "hvsim/cli.hpp"
#include "hvsim/error.hpp"

#ifndef HVSIM_VERSION
#define HVSIM_VERSION "unknown"
#endif
#ifndef HVSIM_SOURCE_CONFIG_DIR
#define HVSIM_SOURCE_CONFIG_DIR "configs"
#endif

namespace hvsim::cli {

namespace fs = std::filesystem;

namespace {

std::string hex64(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw fs::filesystem_error("cannot write", path, std::make_error_code(std::errc::io_error));
}

}  // namespace

std::uint64_t fnv1a64(const std::string& bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

fs::path resolve_output(const RunConfig& cfg, const RunOptions& options) {
    if (options.output) return *options.output;
    if (!cfg.output.empty()) return cfg.output;
    if (const char* root = std::getenv("HVSIM_OUTPUT_ROOT"); root && *root) return fs::path(root) / cfg.name;
    return fs::path("hvsim-runs") / cfg.name;
}

int run(const RunOptions& options, std::ostream& log) {
    RunConfig cfg;
    try {
        auto kv = KeyValueConfig::load(options.config);
        if (options.seed) kv.set("seed", std::to_string(*options.seed));
        if (options.workers) kv.set("workers", std::to_string(*options.workers));
        cfg = validate_config(kv, options.config.stem().string());
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << "\n";
        return kExitConfig;
    }

    RunResult result;
    try {
        result = execute(cfg);
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        log << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        log << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    }

    const fs::path dir = resolve_output(cfg, options);
    const std::string canonical = cfg.canonical();
    try {
        fs::create_directories(dir);
        for (const auto& t : result.tables) write_file(dir / t.file, t.csv);

        std::ostringstream summary;
        summary << "name = " << cfg.name << "\n";
        summary << "experiment = " << to_string(cfg.kind) << "\n";
        summary << "seed = " << cfg.seed << "\n";
        for (const auto& [k, v] : result.summary) summary << k << " = " << v << "\n";
        for (const auto& c : result.checks) summary << "detail." << c.name << " = " << c.detail << "\n";
        write_file(dir / "summary.txt", summary.str());

        std::ostringstream stamp;
        stamp << "seed = " << cfg.seed << "\n";
        stamp << "version = " << HVSIM_VERSION << "\n";
        stamp << "config_hash = fnv1a64:" << hex64(fnv1a64(canonical)) << "\n";
        write_file(dir / "stamp.txt", stamp.str());
        write_file(dir / "config.resolved", canonical);
    } catch (const fs::filesystem_error& e) {
        log << "config error: cannot write outputs: " << e.what() << "\n";
        return kExitConfig;
    }

    for (const auto& c : result.checks)
        log << (c.passed ? "pass  " : "FAIL  ") << c.name << "  (" << c.detail << ")\n";
    log << "outputs in " << dir.string() << "\n";
    return result.passed() ? kExitOk : kExitInvariant;
}

fs::path bundled_config_dir() {
    if (const char* d = std::getenv("HVSIM_CONFIG_DIR"); d && *d) return d;
    return HVSIM_SOURCE_CONFIG_DIR;
}

std::vector<CatalogEntry> list_experiments(const fs::path& dir) {
    std::vector<CatalogEntry> out;
    if (!fs::is_directory(dir)) return out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".conf") continue;
        CatalogEntry c{entry.path().stem().string(), entry.path(), ""};
        std::ifstream in(entry.path());
        std::string line;
        while (std::getline(in, line)) {
            const auto b = line.find_first_not_of(" \t");
            if (b == std::string::npos || line[b] != '#') continue;
            const auto text = line.find_first_not_of("# \t", b);
            if (text == std::string::npos) continue;
            c.description = line.substr(text);
            break;
        }
        out.push_back(std::move(c));
    }
    std::sort(out.begin(), out.end(), [](const CatalogEntry& a, const CatalogEntry& b) { return a.name < b.name; });
    return out;
}

std::string format_catalog(const std::vector<CatalogEntry>& entries) {
    std::size_t width = 0;
    for (const auto& e : entries) width = std::max(width, e.name.size());
    std::ostringstream os;
    for (const auto& e : entries) os << e.name << std::string(width - e.name.size() + 2, ' ') << e.description << "\n";
    return os.str();
}

}  // namespace hvsim::cli
