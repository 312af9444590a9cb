#include "annulab/orbit_search.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace annulab {

namespace {

struct Vec2 {
    double x = 0.0, y = 0.0;
};

// displacement field D(z~) = f~^q(z~) - z~ - (p, 0)
Vec2 displacement(const LiftedAnnulusMap& map, long p, int q, double x, double y) {
    LiftPoint z{x, y};
    LiftPoint w = z;
    for (int i = 0; i < q; ++i) w = map.lift(w);
    return {w.x_tilde - z.x_tilde - static_cast<double>(p), w.y - z.y};
}

double norm_inf(const Vec2& v) { return std::max(std::abs(v.x), std::abs(v.y)); }

// One damped-Newton descent with a fixed finite-difference step; returns the
// best residual reached before stalling.
double newton_attempt(const LiftedAnnulusMap& map, long p, int q, const SolverParams& sp,
                      double h, double target, double& x, double& y) {
    Vec2 d = displacement(map, p, q, x, y);
    double res = norm_inf(d);
    for (int step = 0; step < sp.newton_max_steps && res > target; ++step) {
        Vec2 dxp = displacement(map, p, q, x + h, y);
        Vec2 dxm = displacement(map, p, q, x - h, y);
        double ylo = std::max(0.0, y - h), yhi = std::min(1.0, y + h);
        Vec2 dyp = displacement(map, p, q, x, yhi);
        Vec2 dym = displacement(map, p, q, x, ylo);
        double j11 = (dxp.x - dxm.x) / (2 * h), j12 = (dyp.x - dym.x) / (yhi - ylo);
        double j21 = (dxp.y - dxm.y) / (2 * h), j22 = (dyp.y - dym.y) / (yhi - ylo);
        double det = j11 * j22 - j12 * j21;
        if (std::abs(det) < 1e-16) break;
        double sx = (d.x * j22 - d.y * j12) / det;
        double sy = (j11 * d.y - j21 * d.x) / det;
        double damp = 1.0;
        bool improved = false;
        for (int k = 0; k < 20; ++k) {
            double nx = x - damp * sx;
            double ny = std::min(1.0, std::max(0.0, y - damp * sy));
            Vec2 nd = displacement(map, p, q, nx, ny);
            if (norm_inf(nd) < res) {
                x = nx;
                y = ny;
                d = nd;
                res = norm_inf(nd);
                improved = true;
                break;
            }
            damp *= 0.5;
        }
        if (!improved) break;  // stalled at the finite-difference floor
    }
    return res;
}

bool newton_refine(const LiftedAnnulusMap& map, long p, int q, const SolverParams& sp,
                   double& x, double& y) {
    // polish well past tol: the acceptance quantity is the residual over the
    // whole orbit, which runs a few derivative factors above the seed point
    const double target = 0.01 * sp.tol;
    double res = newton_attempt(map, p, q, sp, sp.fd_step, target, x, y);
    // near-parabolic orbits have a tiny displacement Jacobian, where the
    // finite-difference roundoff floor scales like eps/h; widening the step
    // trades harmless truncation error for a lower floor
    for (double h = sp.fd_step * 10.0; res > target && h <= 1e-2; h *= 10.0)
        res = newton_attempt(map, p, q, sp, h, target, x, y);
    return res <= sp.tol;
}

// orbit points of the root, on the annulus
std::vector<AnnulusPoint> orbit_points(const LiftedAnnulusMap& map, int q, double x, double y) {
    std::vector<AnnulusPoint> pts;
    pts.reserve(q);
    LiftPoint z{x, y};
    for (int i = 0; i < q; ++i) {
        pts.push_back({wrap_unit(z.x_tilde), z.y});
        z = map.lift(z);
    }
    return pts;
}

bool same_orbit(const std::vector<AnnulusPoint>& a, const std::vector<AnnulusPoint>& b,
                double eps) {
    for (const auto& pa : a)
        for (const auto& pb : b)
            if (annulus_distance(pa, pb) < eps) return true;
    return false;
}

double orbit_residual(const LiftedAnnulusMap& map, long p, int q,
                      const std::vector<AnnulusPoint>& pts) {
    double worst = 0.0;
    for (const auto& z : pts)
        worst = std::max(worst, norm_inf(displacement(map, p, q, z.x, z.y)));
    return worst;
}

struct RawRoot {
    double x, y;
};

void slice_candidates(const LiftedAnnulusMap& map, long p, int q, const SolverParams& sp,
                      std::vector<RawRoot>& out) {
    // twist-like: D.x is monotone across y on each column; bisect D.x = 0,
    // then walk the resulting curve looking for small / sign-changing D.y.
    const int nx = sp.grid_nx;
    std::vector<RawRoot> curve;
    std::vector<double> dy_on_curve;
    for (int i = 0; i < nx; ++i) {
        double x = (i + 0.5) / nx;
        double ylo = 0.0, yhi = 1.0;
        double flo = displacement(map, p, q, x, ylo).x;
        double fhi = displacement(map, p, q, x, yhi).x;
        if (flo == 0.0) {
            curve.push_back({x, ylo});
            dy_on_curve.push_back(displacement(map, p, q, x, ylo).y);
            continue;
        }
        if (flo * fhi > 0.0) continue;  // no sign change in this column
        for (int it = 0; it < 60; ++it) {
            double ym = 0.5 * (ylo + yhi);
            double fm = displacement(map, p, q, x, ym).x;
            if (flo * fm <= 0.0) {
                yhi = ym;
            } else {
                ylo = ym;
                flo = fm;
            }
        }
        double y = 0.5 * (ylo + yhi);
        curve.push_back({x, y});
        dy_on_curve.push_back(displacement(map, p, q, x, y).y);
    }
    // sign changes (or near-zeros) of D.y along the curve seed Newton
    size_t m = curve.size();
    for (size_t i = 0; i < m; ++i) {
        size_t j = (i + 1) % m;
        if (m == 0) break;
        if (dy_on_curve[i] == 0.0 || dy_on_curve[i] * dy_on_curve[j] < 0.0 ||
            std::abs(dy_on_curve[i]) < 10 * sp.tol) {
            out.push_back(curve[i]);
        }
    }
    // fully flat D.y (integrable continuum): every curve point is a root
    if (out.empty() && m > 0) {
        double worst = 0.0;
        for (double v : dy_on_curve) worst = std::max(worst, std::abs(v));
        if (worst < 1e-6) out = curve;
    }
}

void grid_candidates(const LiftedAnnulusMap& map, long p, int q, int nx, int ny,
                     std::vector<RawRoot>& out) {
    std::vector<std::vector<Vec2>> field(nx + 1, std::vector<Vec2>(ny + 1));
    for (int i = 0; i <= nx; ++i)
        for (int j = 0; j <= ny; ++j)
            field[i][j] = displacement(map, p, q, static_cast<double>(i) / nx,
                                       static_cast<double>(j) / ny);
    auto sgn = [](double v) { return v > 0 ? 1 : (v < 0 ? -1 : 0); };
    for (int i = 0; i < nx; ++i) {
        for (int j = 0; j < ny; ++j) {
            const Vec2& a = field[i][j];
            const Vec2& b = field[i + 1][j];
            const Vec2& c = field[i][j + 1];
            const Vec2& d = field[i + 1][j + 1];
            bool sx = sgn(a.x) != sgn(b.x) || sgn(a.x) != sgn(c.x) || sgn(a.x) != sgn(d.x);
            bool sy = sgn(a.y) != sgn(b.y) || sgn(a.y) != sgn(c.y) || sgn(a.y) != sgn(d.y);
            double small = std::min({norm_inf(a), norm_inf(b), norm_inf(c), norm_inf(d)});
            if ((sx && sy) || small < 1e-4)
                out.push_back({(i + 0.5) / nx, (j + 0.5) / ny});
        }
    }
}

FindOrbitsResult find_orbits_once(const LiftedAnnulusMap& map, long p, int q,
                                  const SolverParams& sp, int nx, int ny) {
    FindOrbitsResult result;
    std::vector<RawRoot> seeds;
    if (map.twist_like())
        slice_candidates(map, p, q, sp, seeds);
    else
        grid_candidates(map, p, q, nx, ny, seeds);

    if (seeds.size() > 4096) {
        // keep the scan bounded when the field is near-zero everywhere
        size_t stride = seeds.size() / 4096 + 1;
        std::vector<RawRoot> thinned;
        for (size_t i = 0; i < seeds.size(); i += stride) thinned.push_back(seeds[i]);
        seeds = std::move(thinned);
    }

    std::vector<PeriodicOrbit> orbits;
    for (const auto& seed : seeds) {
        if (static_cast<int>(orbits.size()) > sp.continuum_threshold + 8) break;
        double x = seed.x, y = seed.y;
        if (!newton_refine(map, p, q, sp, x, y)) continue;
        auto pts = orbit_points(map, q, x, y);
        bool dup = false;
        for (const auto& o : orbits)
            if (same_orbit(o.points, pts, sp.dedup_eps)) {
                dup = true;
                break;
            }
        if (dup) continue;
        PeriodicOrbit orb;
        orb.period_q = q;
        orb.translation_p = p;
        orb.points = std::move(pts);
        orb.residual = orbit_residual(map, p, q, orb.points);
        orb.interior = std::all_of(orb.points.begin(), orb.points.end(), [](const AnnulusPoint& z) {
            return z.y > 1e-9 && z.y < 1.0 - 1e-9;
        });
        bool ambiguous = false;
        orb.prime_period = classify_prime_period(orb, map, sp.dedup_eps, &ambiguous);
        orb.ambiguous_period = ambiguous;
        orbits.push_back(std::move(orb));
    }

    if (static_cast<int>(orbits.size()) > sp.continuum_threshold) {
        // continuum of periodic points: keep one representative class
        result.non_isolated_continuum = true;
        // keep the best-converged class: on an exponentially thin resonance
        // the displacement along the circle only dips below tol near the
        // genuine orbits, so the minimum-residual class is the honest pick
        PeriodicOrbit rep = *std::min_element(
            orbits.begin(), orbits.end(),
            [](const PeriodicOrbit& a, const PeriodicOrbit& b) { return a.residual < b.residual; });
        rep.non_isolated = true;
        orbits.clear();
        orbits.push_back(std::move(rep));
        result.diagnostic = "non-isolated continuum collapsed to one orbit class";
    }

    std::sort(orbits.begin(), orbits.end(), [](const PeriodicOrbit& a, const PeriodicOrbit& b) {
        if (a.points.empty() || b.points.empty()) return a.points.size() < b.points.size();
        return a.points.front().x < b.points.front().x;
    });
    result.orbits = std::move(orbits);
    if (result.orbits.empty()) {
        result.not_found = true;
        result.diagnostic = "not-found: no root below tolerance after refinement budget";
    }
    return result;
}

}  // namespace

FindOrbitsResult find_orbits(const LiftedAnnulusMap& map, long p, int q,
                             const SolverParams& params) {
    if (q <= 0) throw std::invalid_argument("find_orbits: q must be positive");
    if (std::gcd(std::abs(p), static_cast<long>(q)) != 1)
        throw std::invalid_argument("find_orbits: p/q must be irreducible");

    FindOrbitsResult result;
    auto bw = boundary_rotation_numbers(map);
    double rho = static_cast<double>(p) / q;
    bool inside = !bw.degenerate && rho > std::min(bw.rho_bottom, bw.rho_top) &&
                  rho < std::max(bw.rho_bottom, bw.rho_top);

    result = find_orbits_once(map, p, q, params, params.grid_nx, params.grid_ny);
    if (result.not_found && params.double_grid_on_not_found) {
        SolverParams doubled = params;
        doubled.grid_nx *= 2;
        doubled.grid_ny *= 2;
        result = find_orbits_once(map, p, q, doubled, doubled.grid_nx, doubled.grid_ny);
    }
    result.outside_window = !inside;
    return result;
}

int classify_prime_period(const PeriodicOrbit& orbit, const LiftedAnnulusMap& map,
                          double dedup_eps, bool* ambiguous) {
    if (orbit.points.empty()) throw std::invalid_argument("classify_prime_period: empty orbit");
    const AnnulusPoint z0 = orbit.points.front();
    int q = orbit.period_q;
    std::vector<int> hits;
    AnnulusPoint z = z0;
    for (int l = 1; l <= q; ++l) {
        z = map.apply(z);
        if (q % l == 0 && annulus_distance(z, z0) < dedup_eps) hits.push_back(l);
    }
    if (ambiguous) *ambiguous = false;
    if (hits.empty()) return q;
    if (hits.size() > 1 && ambiguous) {
        // two divisors both within dedup_eps indicate an unresolvable orbit
        // only when the smaller does not divide the larger pattern cleanly
        int l0 = hits.front();
        for (int l : hits)
            if (l % l0 != 0) *ambiguous = true;
    }
    return hits.front();
}

std::vector<std::pair<long, int>> fractions_in_window(const FractionWindow& w, int q_max) {
    std::vector<std::pair<long, int>> out;
    for (int q = 1; q <= q_max; ++q) {
        auto range = window_integer_range(q, w);
        for (long p = range.lo; p <= range.hi; ++p)
            if (std::gcd(std::abs(p), static_cast<long>(q)) == 1) out.emplace_back(p, q);
    }
    return out;
}

std::uint64_t OrbitCensus::n_eq(int n) const {
    auto it = N_eq.find(n);
    return it == N_eq.end() ? 0 : it->second;
}
std::uint64_t OrbitCensus::n_le(int n) const {
    std::uint64_t best = 0;
    for (const auto& [k, v] : N_le)
        if (k <= n) best = v;
    return best;
}
std::uint64_t OrbitCensus::n_le_coprime(int n) const {
    std::uint64_t best = 0;
    for (const auto& [k, v] : N_le_coprime)
        if (k <= n) best = v;
    return best;
}

namespace {

void fill_cumulative(OrbitCensus& c) {
    std::uint64_t run = 0, run_cop = 0;
    for (int n = 1; n <= c.q_max; ++n) {
        run += c.n_eq(n);
        bool coprime = !c.n0 || (static_cast<std::uint64_t>(n) % *c.n0 != 0);
        if (coprime) run_cop += c.n_eq(n);
        c.N_le[n] = run;
        c.N_le_coprime[n] = run_cop;
    }
}

}  // namespace

OrbitCensus census(const LiftedAnnulusMap& map, int q_max, std::optional<std::uint64_t> n0,
                   const SolverParams& params) {
    if (n0 && !is_prime(*n0)) throw std::invalid_argument("census: n0 must be prime");
    auto bw = boundary_rotation_numbers(map);
    if (bw.degenerate || !bw.window)
        throw std::invalid_argument("census: degenerate rotation window");

    OrbitCensus c;
    c.window = bw.window;
    c.q_max = q_max;
    c.n0 = n0;
    c.dedup_eps = params.dedup_eps;

    auto fractions = fractions_in_window(*bw.window, q_max);
    std::vector<FindOrbitsResult> results(fractions.size());

    unsigned n_threads = params.threads > 0 ? static_cast<unsigned>(params.threads)
                                            : std::max(1u, std::thread::hardware_concurrency());
    n_threads = std::min<unsigned>(n_threads, std::max<size_t>(1, fractions.size()));
    std::atomic<size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= fractions.size()) break;
            results[i] = find_orbits(map, fractions[i].first, fractions[i].second, params);
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    for (size_t i = 0; i < fractions.size(); ++i) {
        const auto& fr = fractions[i];
        auto& res = results[i];
        if (res.non_isolated_continuum) c.has_continua = true;
        std::vector<PeriodicOrbit> kept;
        for (auto& orb : res.orbits) {
            if (!orb.interior || orb.ambiguous_period) continue;
            kept.push_back(std::move(orb));
        }
        if (kept.empty()) {
            c.complete = false;
            c.missing.push_back(fr);
            continue;
        }
        for (const auto& orb : kept) c.N_eq[orb.prime_period] += 1;
        c.orbits[fr] = std::move(kept);
    }
    fill_cumulative(c);
    return c;
}

OrbitCensus fraction_class_census(const FractionWindow& w, int q_max,
                                  std::optional<std::uint64_t> n0) {
    OrbitCensus c;
    c.window = w;
    c.q_max = q_max;
    c.n0 = n0;
    c.analytic_counts = true;
    for (int n = 1; n <= q_max; ++n) c.N_eq[n] = phi_window(n, w);
    fill_cumulative(c);
    return c;
}

GrowthFit growth_fit(const OrbitCensus& c, int n_min) {
    if (!c.complete) throw std::invalid_argument("growth_fit: incomplete census rejected");
    if (c.q_max < 2 * n_min) throw std::invalid_argument("growth_fit: q_max >= 2*n_min required");
    GrowthFit fit;
    fit.n_min = n_min;
    fit.n_max = c.q_max;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int count = 0;
    double cmin = std::numeric_limits<double>::infinity();
    for (int n = n_min; n <= c.q_max; ++n) {
        std::uint64_t v = c.n_le(n);
        cmin = std::min(cmin, static_cast<double>(v) / (static_cast<double>(n) * n));
        if (v == 0) continue;
        double x = std::log(static_cast<double>(n));
        double y = std::log(static_cast<double>(v));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++count;
    }
    if (count < 2) {
        fit.exponent = 0.0;
        fit.prefactor = count == 1 ? std::exp(sy) : 0.0;
        fit.c_liminf = std::isfinite(cmin) ? cmin : 0.0;
        return fit;
    }
    double denom = count * sxx - sx * sx;
    fit.exponent = denom == 0.0 ? 0.0 : (count * sxy - sx * sy) / denom;
    fit.prefactor = std::exp((sy - fit.exponent * sx) / count);
    fit.c_liminf = cmin;
    return fit;
}

}  // namespace annulab
