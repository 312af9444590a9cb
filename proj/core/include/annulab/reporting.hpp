#ifndef ANNULAB_REPORTING_HPP
#define ANNULAB_REPORTING_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace annulab {

std::string library_version();

/// Writes via a sibling temp file and an atomic rename.
void atomic_write_text(const std::filesystem::path& path, const std::string& content);

/// Plain key=value configuration (comments start with '#').
using Config = std::map<std::string, std::string>;
Config parse_config(const std::string& text);
Config load_config(const std::filesystem::path& path);
/// Rejects keys outside the allowed set.
void validate_config(const Config& config, const std::vector<std::string>& allowed_keys);

/// CSV table with a hashed header; cells are untyped strings, the diff
/// decides integer/real semantics per column. No quoting: payloads are
/// numeric by construction.
struct GoldenTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::string header_hash() const;  // FNV-1a 64 over the joined header
    std::string to_csv() const;
    static GoldenTable from_csv(const std::string& text);
    static GoldenTable load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;  // atomic
};

struct GoldenDiffEntry {
    std::size_t row = 0;
    std::string column;
    std::string expected;
    std::string actual;
};

struct GoldenDiffReport {
    bool schema_match = true;
    bool row_count_match = true;
    std::vector<GoldenDiffEntry> entries;

    bool match() const { return schema_match && row_count_match && entries.empty(); }
    std::string summary() const;
};

/// Header hashes must agree before any cell is compared. Columns listed in
/// real_tolerances diff as reals with the per-column absolute-or-relative
/// tolerance; all other columns diff exactly.
GoldenDiffReport diff_golden(const GoldenTable& golden, const GoldenTable& actual,
                             const std::map<std::string, double>& real_tolerances);

struct RunManifest {
    std::string subcommand;
    std::map<std::string, std::string> parameters;  // includes every tolerance in force
    std::uint64_t seed = 0;
    int threads = 0;
    std::map<std::string, std::string> golden_hashes;  // compared file -> header hash
    double wall_seconds = 0.0;
    std::map<std::string, bool> checks;  // pass/fail per criterion evaluated
    std::string library = library_version();

    bool all_passed() const;
    std::string to_json() const;
    static RunManifest from_json(const std::string& text);
    void save(const std::filesystem::path& path) const;  // atomic
    static RunManifest load(const std::filesystem::path& path);
};

}  // namespace annulab

#endif
