#include <filesystem>
#include <fstream>

#include "annulab/reporting.hpp"
#include "doctest.h"

using namespace annulab;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    auto p = fs::temp_directory_path() / "annulab-test";
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("config parsing: comments, blanks, trimming") {
    auto cfg = parse_config("# comment\n\n key = value \nn_max=100\n");
    CHECK(cfg.size() == 2);
    CHECK(cfg.at("key") == "value");
    CHECK(cfg.at("n_max") == "100");
}

TEST_CASE("config rejects duplicates and unknown keys") {
    CHECK_THROWS(parse_config("a=1\na=2\n"));
    auto cfg = parse_config("a=1\nb=2\n");
    CHECK_THROWS(validate_config(cfg, {"a"}));
    CHECK_NOTHROW(validate_config(cfg, {"a", "b", "c"}));
}

TEST_CASE("golden table CSV round trip and header hash") {
    GoldenTable t;
    t.header = {"n", "value"};
    t.rows = {{"1", "0.5"}, {"2", "0.25"}};
    auto back = GoldenTable::from_csv(t.to_csv());
    CHECK(back.header == t.header);
    CHECK(back.rows == t.rows);
    CHECK(back.header_hash() == t.header_hash());
    GoldenTable other;
    other.header = {"n", "val"};
    CHECK(other.header_hash() != t.header_hash());
}

TEST_CASE("golden diff separates exact and toleranced columns") {
    GoldenTable golden;
    golden.header = {"n", "x"};
    golden.rows = {{"1", "0.500000"}, {"2", "0.250000"}};
    GoldenTable actual = golden;
    actual.rows[1][1] = "0.250001";

    auto strict = diff_golden(golden, actual, {});
    CHECK_FALSE(strict.match());
    REQUIRE(strict.entries.size() == 1);
    CHECK(strict.entries[0].column == "x");

    auto loose = diff_golden(golden, actual, {{"x", 1e-4}});
    CHECK(loose.match());

    actual.rows[0][0] = "3";  // integer column stays exact regardless
    auto mixed = diff_golden(golden, actual, {{"x", 1e-4}});
    CHECK_FALSE(mixed.match());
}

TEST_CASE("golden diff refuses mismatched schemas") {
    GoldenTable a, b;
    a.header = {"n"};
    b.header = {"m"};
    auto rep = diff_golden(a, b, {});
    CHECK_FALSE(rep.schema_match);
    CHECK_FALSE(rep.match());
}

TEST_CASE("atomic write leaves no temp files and saves content") {
    auto dir = temp_dir();
    auto p = dir / "atomic.txt";
    atomic_write_text(p, "hello\n");
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    CHECK(line == "hello");
    int stray = 0;
    for (auto& e : fs::directory_iterator(dir))
        if (e.path().filename().string().find("atomic.txt.") == 0) ++stray;
    CHECK(stray == 0);
    fs::remove(p);
}

TEST_CASE("golden table save/load through a file") {
    auto p = temp_dir() / "table.csv";
    GoldenTable t;
    t.header = {"a", "b"};
    t.rows = {{"1", "2"}};
    t.save(p);
    auto back = GoldenTable::load(p);
    CHECK(back.rows == t.rows);
    fs::remove(p);
}

TEST_CASE("run manifest JSON round trip") {
    RunManifest m;
    m.subcommand = "census";
    m.parameters = {{"q-max", "8"}, {"tol", "1e-10"}};
    m.seed = 20260824;
    m.threads = 4;
    m.golden_hashes = {{"census.csv", "deadbeef"}};
    m.wall_seconds = 1.25;
    m.checks = {{"complete", true}, {"growth", false}};
    auto back = RunManifest::from_json(m.to_json());
    CHECK(back.subcommand == m.subcommand);
    CHECK(back.parameters == m.parameters);
    CHECK(back.seed == m.seed);
    CHECK(back.threads == m.threads);
    CHECK(back.golden_hashes == m.golden_hashes);
    CHECK(back.wall_seconds == doctest::Approx(m.wall_seconds));
    CHECK(back.checks == m.checks);
    CHECK(back.library == library_version());
    CHECK_FALSE(back.all_passed());
    back.checks["growth"] = true;
    CHECK(back.all_passed());
}

TEST_CASE("manifest save/load via file") {
    auto p = temp_dir() / "manifest.json";
    RunManifest m;
    m.subcommand = "count";
    m.checks["ok"] = true;
    m.save(p);
    auto back = RunManifest::load(p);
    CHECK(back.subcommand == "count");
    CHECK(back.all_passed());
    fs::remove(p);
}
