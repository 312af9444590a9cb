#include "annulab/reporting.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace annulab {

std::string library_version() { return "0.1.0"; }

void atomic_write_text(const std::filesystem::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("atomic_write_text: cannot open " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("atomic_write_text: write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw std::runtime_error("atomic_write_text: rename failed: " + ec.message());
    }
}

namespace {

std::string strip(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace

Config parse_config(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = strip(line);
        if (t.empty() || t[0] == '#') continue;
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key=value");
        std::string key = strip(t.substr(0, eq));
        std::string value = strip(t.substr(eq + 1));
        if (key.empty())
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
        if (cfg.count(key))
            throw std::invalid_argument("config: duplicate key '" + key + "'");
        cfg[key] = value;
    }
    return cfg;
}

Config load_config(const std::filesystem::path& path) { return parse_config(read_file(path)); }

void validate_config(const Config& config, const std::vector<std::string>& allowed_keys) {
    for (const auto& [key, value] : config) {
        if (std::find(allowed_keys.begin(), allowed_keys.end(), key) == allowed_keys.end())
            throw std::invalid_argument("config: unknown key '" + key + "'");
    }
}

std::string GoldenTable::header_hash() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ull;
        }
        h ^= 0x1f;
        h *= 1099511628211ull;
    };
    for (const auto& col : header) mix(col);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string GoldenTable::to_csv() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
    os << "\n";
    for (const auto& row : rows) {
        if (row.size() != header.size())
            throw std::logic_error("GoldenTable: row width differs from header");
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
        os << "\n";
    }
    return os.str();
}

GoldenTable GoldenTable::from_csv(const std::string& text) {
    GoldenTable t;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::size_t pos = 0;
        while (true) {
            auto comma = line.find(',', pos);
            cells.push_back(line.substr(pos, comma - pos));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (first) {
            t.header = std::move(cells);
            first = false;
        } else {
            if (cells.size() != t.header.size())
                throw std::invalid_argument("GoldenTable: ragged CSV row");
            t.rows.push_back(std::move(cells));
        }
    }
    if (t.header.empty()) throw std::invalid_argument("GoldenTable: empty CSV");
    return t;
}

GoldenTable GoldenTable::load(const std::filesystem::path& path) {
    return from_csv(read_file(path));
}

void GoldenTable::save(const std::filesystem::path& path) const {
    atomic_write_text(path, to_csv());
}

std::string GoldenDiffReport::summary() const {
    if (!schema_match) return "schema mismatch";
    if (!row_count_match) return "row count mismatch";
    if (entries.empty()) return "identical within tolerance";
    std::ostringstream os;
    os << entries.size() << " mismatched cell(s); first at row " << entries.front().row
       << " column " << entries.front().column << ": expected " << entries.front().expected
       << ", got " << entries.front().actual;
    return os.str();
}

GoldenDiffReport diff_golden(const GoldenTable& golden, const GoldenTable& actual,
                             const std::map<std::string, double>& real_tolerances) {
    GoldenDiffReport rep;
    if (golden.header != actual.header || golden.header_hash() != actual.header_hash()) {
        rep.schema_match = false;
        return rep;
    }
    if (golden.rows.size() != actual.rows.size()) {
        rep.row_count_match = false;
        return rep;
    }
    for (std::size_t r = 0; r < golden.rows.size(); ++r) {
        for (std::size_t c = 0; c < golden.header.size(); ++c) {
            const std::string& e = golden.rows[r][c];
            const std::string& a = actual.rows[r][c];
            auto tol_it = real_tolerances.find(golden.header[c]);
            bool ok;
            if (tol_it == real_tolerances.end()) {
                ok = (e == a);
            } else {
                try {
                    double ev = std::stod(e), av = std::stod(a);
                    ok = std::fabs(ev - av) <= tol_it->second * std::max(1.0, std::fabs(ev));
                } catch (const std::exception&) {
                    ok = (e == a);
                }
            }
            if (!ok) rep.entries.push_back({r, golden.header[c], e, a});
        }
    }
    return rep;
}

bool RunManifest::all_passed() const {
    for (const auto& [name, passed] : checks)
        if (!passed) return false;
    return true;
}

std::string RunManifest::to_json() const {
    nlohmann::ordered_json j;
    j["subcommand"] = subcommand;
    j["parameters"] = parameters;
    j["seed"] = seed;
    j["threads"] = threads;
    j["golden_hashes"] = golden_hashes;
    j["wall_seconds"] = wall_seconds;
    j["checks"] = checks;
    j["library"] = library;
    return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    RunManifest m;
    m.subcommand = j.at("subcommand").get<std::string>();
    m.parameters = j.at("parameters").get<std::map<std::string, std::string>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.threads = j.at("threads").get<int>();
    m.golden_hashes = j.value("golden_hashes", std::map<std::string, std::string>{});
    m.wall_seconds = j.value("wall_seconds", 0.0);
    m.checks = j.value("checks", std::map<std::string, bool>{});
    m.library = j.value("library", std::string{});
    return m;
}

void RunManifest::save(const std::filesystem::path& path) const {
    atomic_write_text(path, to_json());
}

RunManifest RunManifest::load(const std::filesystem::path& path) {
    return from_json(read_file(path));
}

}  // namespace annulab
