// annulab: numerical laboratory for irreducible-fraction counting, annulus
// twist maps, periodic-orbit censuses, half-return maps of positively curved
// spheres, and the S^3 -> SO(3) double cover.
//
// Subcommands: count, rotnum, census, geodesics, so3check, replay.
// Every run writes a JSON manifest next to its primary output; `replay`
// re-executes a manifest and verifies byte-identical outputs.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "annulab/annulus.hpp"
#include "annulab/geodesic.hpp"
#include "annulab/numtheory.hpp"
#include "annulab/orbit_search.hpp"
#include "annulab/reporting.hpp"
#include "annulab/so3.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace annulab;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct RunContext {
    std::map<std::string, std::string> params;  // every parameter in force
    fs::path out;
    bool force = false;
    int threads = 0;
    std::uint64_t seed = 0;
    std::map<std::string, bool> checks;
    std::vector<fs::path> written;  // outputs, for replay comparison
};

int env_threads() {
    if (const char* v = std::getenv("ANNULAB_THREADS")) {
        int n = std::atoi(v);
        if (n > 0) return n;
    }
    return 0;
}

void require_writable(const RunContext& ctx, const fs::path& p) {
    if (!ctx.force && fs::exists(p))
        throw std::runtime_error("output exists (use --force to overwrite): " + p.string());
}

void write_text(RunContext& ctx, const fs::path& p, const std::string& content) {
    require_writable(ctx, p);
    atomic_write_text(p, content);
    ctx.written.push_back(p);
}

void write_manifest(RunContext& ctx, const std::string& subcommand, double wall_seconds) {
    RunManifest m;
    m.subcommand = subcommand;
    m.parameters = ctx.params;
    m.seed = ctx.seed;
    m.threads = ctx.threads;
    m.wall_seconds = wall_seconds;
    m.checks = ctx.checks;
    fs::path p = ctx.out;
    p += ".manifest.json";
    atomic_write_text(p, m.to_json());
}

double param_real(const RunContext& ctx, const std::string& key) {
    return std::stod(ctx.params.at(key));
}

long param_int(const RunContext& ctx, const std::string& key) {
    return std::stol(ctx.params.at(key));
}

FractionWindow parse_window(const std::string& text) {
    auto comma = text.find(',');
    if (comma == std::string::npos)
        throw std::invalid_argument("window: expected 'lo,hi', got '" + text + "'");
    auto lo = parse_rational(text.substr(0, comma));
    auto hi = parse_rational(text.substr(comma + 1));
    if (lo && hi) return FractionWindow(*lo, *hi);
    return FractionWindow(std::stod(text.substr(0, comma)), std::stod(text.substr(comma + 1)));
}

// ---------------------------------------------------------------------------
// map families shared by rotnum and census

Config parse_params_flag(const std::string& text) {
    std::string lines = text;
    std::replace(lines.begin(), lines.end(), ',', '\n');
    return parse_config(lines);
}

MapPtr build_family(const std::string& family, Config params, RunContext& ctx) {
    auto take = [&](const std::string& key, const std::string& def) {
        std::string v = params.count(key) ? params[key] : def;
        params.erase(key);
        ctx.params["param." + key] = v;
        return v;
    };
    MapPtr map;
    if (family == "rigid") {
        map = make_rigid_rotation(std::stod(take("alpha", "0.25")));
    } else if (family == "integrable") {
        double w0 = std::stod(take("omega0", "-0.3"));
        double w1 = std::stod(take("omega1", "0.4"));
        map = make_linear_twist(w0, w1);
    } else if (family == "perturbed") {
        double w0 = std::stod(take("omega0", "-0.3"));
        double w1 = std::stod(take("omega1", "0.4"));
        double eps = std::stod(take("epsilon", "0.05"));
        double amp = std::stod(take("amplitude", "1.0"));
        int substeps = static_cast<int>(std::stol(take("substeps", "6")));
        map = make_perturbed_twist(w0, w1, standard_bump_hamiltonian(amp), eps, substeps);
    } else {
        throw std::invalid_argument("unknown family '" + family +
                                    "' (rigid | integrable | perturbed)");
    }
    int deck = static_cast<int>(std::stol(take("deck", "0")));
    if (deck != 0) map = make_deck_shifted(map, deck);
    if (!params.empty())
        throw std::invalid_argument("unknown family parameter '" + params.begin()->first + "'");
    return map;
}

// ---------------------------------------------------------------------------
// subcommand bodies (shared by direct invocation and replay)

void run_count(RunContext& ctx) {
    auto t0 = std::chrono::steady_clock::now();
    long n_max = param_int(ctx, "n-max");
    FractionWindow w = parse_window(ctx.params.at("window"));
    std::optional<std::uint64_t> n0;
    if (ctx.params.at("n0") != "") n0 = static_cast<std::uint64_t>(param_int(ctx, "n0"));

    auto sieve = totient_sieve(static_cast<std::uint32_t>(n_max));
    GoldenTable table;
    table.header = {"n", "phi", "phi_window", "Phi", "Psi"};
    std::uint64_t Phi = 0, Psi = 0;
    for (long n = 1; n <= n_max; ++n) {
        std::uint64_t pw = phi_window(n, w);
        Phi += pw;
        if (n0 && std::gcd(static_cast<std::uint64_t>(n), *n0) == 1) Psi += pw;
        table.rows.push_back({std::to_string(n), std::to_string(sieve[n]), std::to_string(pw),
                              std::to_string(Phi), std::to_string(n0 ? Psi : 0)});
    }
    require_writable(ctx, ctx.out);
    table.save(ctx.out);
    ctx.written.push_back(ctx.out);

    double density = static_cast<double>(Phi) * kPi * kPi /
                     (3.0 * w.width() * static_cast<double>(n_max) * static_cast<double>(n_max));
    auto envelope = liminf_envelope(static_cast<std::uint32_t>(std::max(n_max, 101L)));
    ordered_json summary;
    summary["n_max"] = n_max;
    summary["window"] = {w.lo(), w.hi()};
    summary["Phi"] = Phi;
    summary["Psi"] = n0 ? ordered_json(Psi) : ordered_json(nullptr);
    summary["asymptotic_density_ratio"] = density;  // -> 1 as n -> infinity
    summary["envelope_min_value"] = envelope.min_value;
    summary["envelope_min_at"] = envelope.min_at;
    summary["exp_minus_gamma"] = 0.5614594835668851;
    fs::path sp = ctx.out;
    sp += ".summary.json";
    write_text(ctx, sp, summary.dump(2) + "\n");
    ctx.checks["density_ratio_within_2_percent"] = std::fabs(density - 1.0) <= 0.02;
    write_manifest(ctx, "count",
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
}

void run_rotnum(RunContext& ctx) {
    auto t0 = std::chrono::steady_clock::now();
    MapPtr map = build_family(ctx.params.at("family"), parse_params_flag(ctx.params.at("params")),
                              ctx);
    auto comma = ctx.params.at("seed-point").find(',');
    AnnulusPoint seed{std::stod(ctx.params.at("seed-point").substr(0, comma)),
                      std::stod(ctx.params.at("seed-point").substr(comma + 1))};
    long iters = param_int(ctx, "iters");
    double rec_eps = param_real(ctx, "recurrence-eps");

    RotationEstimate est = rotation_number(*map, seed, iters, rec_eps);
    ordered_json j;
    j["family"] = map->describe();
    j["seed_point"] = {seed.x, seed.y};
    j["value"] = est.value;
    j["error_bound"] = est.error_bound;
    j["iterates_used"] = est.iterates_used;
    if (est.exact_rational)
        j["exact_rational"] = {est.exact_rational->first, est.exact_rational->second};
    else
        j["exact_rational"] = nullptr;
    j["flags"] = {{"recurrent", est.recurrent}, {"periodic", est.periodic}};
    write_text(ctx, ctx.out, j.dump(2) + "\n");
    std::cout << j.dump(2) << "\n";
    write_manifest(ctx, "rotnum",
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
}

void run_census(RunContext& ctx) {
    auto t0 = std::chrono::steady_clock::now();
    MapPtr map = build_family(ctx.params.at("family"), parse_params_flag(ctx.params.at("params")),
                              ctx);
    int q_max = static_cast<int>(param_int(ctx, "q-max"));
    std::optional<std::uint64_t> n0;
    if (ctx.params.at("n0") != "") n0 = static_cast<std::uint64_t>(param_int(ctx, "n0"));

    SolverParams sp;
    auto comma = ctx.params.at("grid").find(',');
    sp.grid_nx = std::stoi(ctx.params.at("grid").substr(0, comma));
    sp.grid_ny = std::stoi(ctx.params.at("grid").substr(comma + 1));
    sp.tol = param_real(ctx, "tol");
    sp.threads = ctx.threads;

    OrbitCensus c = census(*map, q_max, n0, sp);

    GoldenTable table;
    table.header = {"n", "N_eq", "N_le", "N_le_coprime"};
    for (int n = 1; n <= q_max; ++n)
        table.rows.push_back({std::to_string(n), std::to_string(c.n_eq(n)),
                              std::to_string(c.n_le(n)),
                              std::to_string(c.n_le_coprime(n))});
    require_writable(ctx, ctx.out);
    table.save(ctx.out);
    ctx.written.push_back(ctx.out);

    ordered_json j;
    j["map"] = map->describe();
    j["q_max"] = q_max;
    j["window"] = c.window ? ordered_json({c.window->lo(), c.window->hi()}) : ordered_json(nullptr);
    j["solver"] = {{"grid_nx", sp.grid_nx}, {"grid_ny", sp.grid_ny},   {"tol", sp.tol},
                   {"dedup_eps", sp.dedup_eps}, {"fd_step", sp.fd_step}, {"threads", sp.threads}};
    j["complete"] = c.complete;
    j["has_continua"] = c.has_continua;
    ordered_json missing = ordered_json::array();
    for (auto& [p, q] : c.missing) missing.push_back({p, q});
    j["missing"] = missing;
    ordered_json orbits = ordered_json::array();
    for (auto& [pq, list] : c.orbits) {
        for (auto& o : list) {
            ordered_json jo;
            jo["p"] = pq.first;
            jo["q"] = pq.second;
            jo["prime_period"] = o.prime_period;
            jo["residual"] = o.residual;
            jo["non_isolated"] = o.non_isolated;
            jo["point"] = {o.points.front().x, o.points.front().y};
            orbits.push_back(jo);
        }
    }
    j["orbits"] = orbits;
    fs::path mp = ctx.out;
    mp += ".orbits.json";
    write_text(ctx, mp, j.dump(2) + "\n");
    ctx.checks["census_complete"] = c.complete;
    write_manifest(ctx, "census",
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
}

void run_geodesics(RunContext& ctx) {
    auto t0 = std::chrono::steady_clock::now();
    double ax[3];
    {
        std::istringstream in(ctx.params.at("axes"));
        char sep;
        in >> ax[0] >> sep >> ax[1] >> sep >> ax[2];
        if (!in) throw std::invalid_argument("axes: expected 'a,b,c'");
    }
    std::shared_ptr<const ConformalFactor> conf;
    if (ctx.params.at("conformal") != "")
        conf = std::make_shared<ConformalFactor>(
            ConformalFactor::from_file(ctx.params.at("conformal")));
    EllipsoidMetric metric(ax[0], ax[1], ax[2], conf);

    FlowOptions fo;
    fo.rtol = param_real(ctx, "rtol");
    fo.atol = fo.rtol * 1e-2;
    GeodesicLab lab(metric, 256, 1e-10, fo);

    int q_max_odd = static_cast<int>(param_int(ctx, "q-max-odd"));
    double l_max = param_real(ctx, "l-max");
    SolverParams sp;
    sp.grid_nx = 48;
    sp.grid_ny = 24;
    sp.tol = param_real(ctx, "orbit-tol");
    GeodesicCensus c = geodesic_census(lab, q_max_odd, sp, param_real(ctx, "closure-tol"),
                                       param_real(ctx, "l-fit-min"));

    GoldenTable table;
    table.header = {"l", "N"};
    for (auto& [l, n] : c.N_of_l) {
        if (l_max > 0.0 && l > l_max) break;
        std::ostringstream cell;
        cell.precision(12);
        cell << l;
        table.rows.push_back({cell.str(), std::to_string(n)});
    }
    require_writable(ctx, ctx.out);
    table.save(ctx.out);
    ctx.written.push_back(ctx.out);

    // per-geodesic polylines (xyz rows) for external plotting
    for (std::size_t k = 0; k < c.entries.size(); ++k) {
        const auto& e = c.entries[k];
        TangentState st = lab.section_to_state(e.representative);
        std::ostringstream os;
        os.precision(12);
        int n_pts = 64 * e.q;
        for (int i = 0; i <= n_pts; ++i) {
            TangentState s =
                geodesic_flow(lab.metric(), st, e.length * static_cast<double>(i) / n_pts, fo);
            os << s.q[0] << " " << s.q[1] << " " << s.q[2] << "\n";
        }
        fs::path pp = ctx.out;
        pp += ".geodesic_" + std::to_string(k) + ".txt";
        write_text(ctx, pp, os.str());
    }

    std::optional<ConjugatePointRecord> conj;
    if (!metric.conformal()) conj = lab.boundary_extension(0.0);
    ordered_json j;
    j["axes"] = {ax[0], ax[1], ax[2]};
    j["conformal"] = metric.conformal();
    j["delta"] = lab.delta();
    j["boundary_twist"] = {lab.boundary_twist(), lab.boundary_twist_top()};
    j["flight_time_band"] = {lab.flight_time_lower(), lab.flight_time_upper()};
    j["curve"] = {{"shooting_residual", lab.curve_report().shooting_residual},
                  {"simple", lab.curve_report().simple}};
    if (conj)
        j["conjugate_point_at_s0_0"] = {{"distance", conj->conjugate_distance},
                                        {"half_period_gap", conj->half_period_gap}};
    j["census"] = {{"complete", c.complete},
                   {"entries", c.entries.size()},
                   {"non_closing", c.non_closing.size()},
                   {"fit_exponent", c.fit.exponent},
                   {"fit_prefactor", c.fit.prefactor},
                   {"l_fit_min", c.l_fit_min}};
    ordered_json entries = ordered_json::array();
    for (auto& e : c.entries)
        entries.push_back({{"p", e.p},
                           {"q", e.q},
                           {"length", e.length},
                           {"closure_error", e.closure_error},
                           {"non_isolated", e.non_isolated}});
    j["entries"] = entries;
    fs::path mp = ctx.out;
    mp += ".lab.json";
    write_text(ctx, mp, j.dump(2) + "\n");
    ctx.checks["census_complete"] = c.complete;
    ctx.checks["all_reconstructions_close"] = c.non_closing.empty();
    write_manifest(ctx, "geodesics",
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
}

void run_so3check(RunContext& ctx) {
    auto t0 = std::chrono::steady_clock::now();
    int samples = static_cast<int>(param_int(ctx, "samples"));
    So3CheckReport rep = so3_check(samples, ctx.seed);
    ordered_json j;
    j["samples"] = samples;
    j["seed"] = ctx.seed;
    j["identity_residual"] = rep.identity_residual;
    j["worst"] = {{"orthogonality", rep.orthogonality_worst},
                  {"determinant", rep.det_worst},
                  {"two_to_one", rep.two_to_one_worst},
                  {"homomorphism", rep.homomorphism_worst},
                  {"isometry", rep.isometry_worst},
                  {"conjugation", rep.conjugation_consistency_worst},
                  {"z4_equivariance", rep.z4_equivariance_worst},
                  {"preimage_roundtrip", rep.preimage_roundtrip_worst}};
    j["pass"] = rep.pass(1e-12);
    write_text(ctx, ctx.out, j.dump(2) + "\n");
    std::cout << j.dump(2) << "\n";
    ctx.checks["so3_battery_1e-12"] = rep.pass(1e-12);
    write_manifest(ctx, "so3check",
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
}

void dispatch(const std::string& subcommand, RunContext& ctx) {
    if (subcommand == "count")
        run_count(ctx);
    else if (subcommand == "rotnum")
        run_rotnum(ctx);
    else if (subcommand == "census")
        run_census(ctx);
    else if (subcommand == "geodesics")
        run_geodesics(ctx);
    else if (subcommand == "so3check")
        run_so3check(ctx);
    else
        throw std::invalid_argument("replay: unknown subcommand '" + subcommand + "'");
}

int run_replay(const fs::path& manifest_path) {
    RunManifest m = RunManifest::load(manifest_path);
    RunContext ctx;
    // strip derived family parameters; they are rebuilt by the subcommand
    for (auto& [k, v] : m.parameters)
        if (k.rfind("param.", 0) != 0) ctx.params[k] = v;
    if (m.parameters.count("params")) ctx.params["params"] = m.parameters.at("params");
    fs::path original = ctx.params.at("out");
    ctx.out = original;
    ctx.out += ".replay";
    ctx.params["out"] = ctx.out.string();
    ctx.force = true;
    ctx.threads = m.threads;
    ctx.seed = m.seed;
    dispatch(m.subcommand, ctx);

    // deterministic subcommands must reproduce the original bytes
    bool all_equal = true;
    for (const auto& replay_file : ctx.written) {
        std::string tail = replay_file.string().substr(ctx.out.string().size());
        fs::path orig = original;
        orig += tail;
        std::ifstream a(orig, std::ios::binary), b(replay_file, std::ios::binary);
        std::stringstream sa, sb;
        sa << a.rdbuf();
        sb << b.rdbuf();
        bool same = a && b && sa.str() == sb.str();
        std::cout << (same ? "match    " : "MISMATCH ") << orig.string() << "\n";
        all_equal = all_equal && same;
    }
    std::cout << (all_equal ? "replay: outputs identical\n" : "replay: outputs differ\n");
    return all_equal ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"annulab: fraction counts, twist maps, orbit censuses, geodesic "
                 "half-return maps, and the S^3 -> SO(3) cover"};
    app.require_subcommand(1);

    int threads = env_threads();
    app.add_option("--threads", threads, "work pool width (overrides ANNULAB_THREADS)");

    std::string out, window = "0,1", n0, family = "perturbed", params, seed_point = "0.1,0.35";
    std::string axes = "1,1,1.92", conformal, grid = "512,512", manifest;
    long n_max = 1000, iters = 100000, q_max = 8, q_max_odd = 9, samples = 1000;
    double tol = 1e-10, rec_eps = 1e-3, rtol = 1e-10, orbit_tol = 1e-8, closure_tol = 1e-6;
    double l_max = 0.0, l_fit_min = 20.0;
    std::uint64_t seed = 20260824;
    bool force = false;
    app.add_flag("--force", force, "overwrite existing outputs");

    auto* c_count = app.add_subcommand("count", "exact irreducible-fraction counts");
    c_count->add_option("--n-max", n_max, "largest denominator")->required();
    c_count->add_option("--window", window, "rotation window 'lo,hi' (decimals or p/q)");
    c_count->add_option("--n0", n0, "prime for the coprime-filtered Psi column");
    c_count->add_option("--out", out, "CSV output path")->required();

    auto* c_rot = app.add_subcommand("rotnum", "rotation number of a map family");
    c_rot->add_option("--family", family, "rigid | integrable | perturbed");
    c_rot->add_option("--params", params, "family parameters 'key=value,...'");
    c_rot->add_option("--seed-point", seed_point, "annulus seed 'x,y'");
    c_rot->add_option("--iters", iters, "iteration budget");
    c_rot->add_option("--recurrence-eps", rec_eps, "recurrence radius");
    c_rot->add_option("--out", out, "JSON output path")->required();

    auto* c_cen = app.add_subcommand("census", "periodic-orbit census of a map family");
    c_cen->add_option("--family", family, "rigid | integrable | perturbed");
    c_cen->add_option("--params", params, "family parameters 'key=value,...'");
    c_cen->add_option("--q-max", q_max, "largest period");
    c_cen->add_option("--n0", n0, "prime for the coprime-filtered count");
    c_cen->add_option("--grid", grid, "seed grid 'nx,ny'");
    c_cen->add_option("--tol", tol, "orbit residual tolerance");
    c_cen->add_option("--out", out, "CSV output path")->required();

    auto* c_geo = app.add_subcommand("geodesics", "half-return map and geodesic census");
    c_geo->add_option("--axes", axes, "ellipsoid semi-axes 'a,b,c'");
    c_geo->add_option("--conformal", conformal, "plain-text sampled conformal exponent");
    c_geo->add_option("--q-max-odd", q_max_odd, "largest odd period");
    c_geo->add_option("--l-max", l_max, "truncate N(l) listing (0: keep all)");
    c_geo->add_option("--rtol", rtol, "flow relative tolerance");
    c_geo->add_option("--orbit-tol", orbit_tol, "orbit residual tolerance");
    c_geo->add_option("--closure-tol", closure_tol, "reconstruction closure tolerance");
    c_geo->add_option("--l-fit-min", l_fit_min, "shortest length used in the growth fit");
    c_geo->add_option("--out", out, "CSV output path")->required();

    auto* c_so3 = app.add_subcommand("so3check", "covering-map property battery");
    c_so3->add_option("--samples", samples, "random samples");
    c_so3->add_option("--seed", seed, "RNG seed");
    c_so3->add_option("--out", out, "JSON output path")->required();

    auto* c_rep = app.add_subcommand("replay", "re-run a stored manifest and compare");
    c_rep->add_option("--manifest", manifest, "path to a .manifest.json")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (c_rep->parsed()) return run_replay(manifest);

        RunContext ctx;
        ctx.out = out;
        ctx.force = force;
        ctx.threads = threads;
        ctx.seed = seed;
        ctx.params["out"] = out;
        std::string name;
        if (c_count->parsed()) {
            name = "count";
            ctx.params["n-max"] = std::to_string(n_max);
            ctx.params["window"] = window;
            ctx.params["n0"] = n0;
        } else if (c_rot->parsed()) {
            name = "rotnum";
            ctx.params["family"] = family;
            ctx.params["params"] = params;
            ctx.params["seed-point"] = seed_point;
            ctx.params["iters"] = std::to_string(iters);
            std::ostringstream os;
            os << rec_eps;
            ctx.params["recurrence-eps"] = os.str();
        } else if (c_cen->parsed()) {
            name = "census";
            ctx.params["family"] = family;
            ctx.params["params"] = params;
            ctx.params["q-max"] = std::to_string(q_max);
            ctx.params["n0"] = n0;
            ctx.params["grid"] = grid;
            std::ostringstream os;
            os << tol;
            ctx.params["tol"] = os.str();
        } else if (c_geo->parsed()) {
            name = "geodesics";
            ctx.params["axes"] = axes;
            ctx.params["conformal"] = conformal;
            ctx.params["q-max-odd"] = std::to_string(q_max_odd);
            auto put = [&](const std::string& k, double v) {
                std::ostringstream os;
                os << v;
                ctx.params[k] = os.str();
            };
            put("l-max", l_max);
            put("rtol", rtol);
            put("orbit-tol", orbit_tol);
            put("closure-tol", closure_tol);
            put("l-fit-min", l_fit_min);
        } else if (c_so3->parsed()) {
            name = "so3check";
            ctx.params["samples"] = std::to_string(samples);
        }
        dispatch(name, ctx);
        for (auto& [check, passed] : ctx.checks)
            std::cout << (passed ? "pass " : "FAIL ") << check << "\n";
        bool all = std::all_of(ctx.checks.begin(), ctx.checks.end(),
                               [](const auto& kv) { return kv.second; });
        return all ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
