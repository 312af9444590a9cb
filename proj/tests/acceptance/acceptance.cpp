// Acceptance battery: one numbered check per run (or all), one verdict line
// each, with the tolerances spelled out inline. A red line here means the
// property genuinely failed at the stated tolerance -- nothing is downgraded
// to a warning.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "annulab/annulus.hpp"
#include "annulab/geodesic.hpp"
#include "annulab/numtheory.hpp"
#include "annulab/orbit_search.hpp"
#include "annulab/reporting.hpp"
#include "annulab/so3.hpp"

using namespace annulab;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Verdict {
    bool pass = true;
    std::string details;
};

struct Check {
    int id;
    const char* title;
    std::function<Verdict()> run;
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

// ---------------------------------------------------------------- 1
Verdict totient_asymptotics() {
    Verdict v;
    FractionWindow w(Rational{0, 1}, Rational{1, 1});
    double prev_dev = 1e100;
    double last_ratio = 0.0;
    for (std::int64_t n : {1000, 10000, 100000}) {
        double ratio =
            static_cast<double>(cumulative_phi(n, w)) * kPi * kPi / (3.0 * double(n) * double(n));
        double dev = std::fabs(ratio - 1.0);
        if (dev >= prev_dev) {
            v.pass = false;
            v.details += "deviation not shrinking at n=" + std::to_string(n) + "; ";
        }
        prev_dev = dev;
        last_ratio = ratio;
    }
    if (last_ratio < 0.98 || last_ratio > 1.02) v.pass = false;
    v.details += "ratio(1e5)=" + fmt(last_ratio) + " (need [0.98,1.02], shrinking deviations)";
    return v;
}

// ---------------------------------------------------------------- 2
Verdict window_scaling() {
    Verdict v;
    std::mt19937_64 rng(20260824);
    std::uniform_int_distribution<std::int64_t> num(-60, 60);
    std::uniform_int_distribution<std::int64_t> den(1, 20);
    int done = 0;
    double worst = 0.0;
    while (done < 50) {
        Rational a{num(rng), den(rng)}, b{num(rng), den(rng)};
        if (b.value() - a.value() < 0.2) continue;
        FractionWindow w(a, b);
        ++done;
        double width = w.width();
        double ratio = static_cast<double>(cumulative_phi(10000, w)) * kPi * kPi /
                       (3.0 * width * 1e8);
        worst = std::max(worst, std::fabs(ratio - 1.0));
    }
    v.pass = worst <= 0.05;
    v.details = "worst |ratio-1| over 50 rational windows = " + fmt(worst) + " (need <= 0.05)";
    return v;
}

// ---------------------------------------------------------------- 3
Verdict coprime_filtered_bounds() {
    Verdict v;
    FractionWindow w(Rational{0, 1}, Rational{1, 1});
    const double A = 3.0 / (kPi * kPi);
    struct Case {
        std::uint64_t n0;
        double lo, hi;
    };
    // bounds (3/pi^2)(1-1/n0) and (3/pi^2)(1-1/n0^2), widened by 0.01
    std::vector<Case> cases = {{2, A * 0.5 - 0.01, A * 0.75 + 0.01},
                               {3, A * (2.0 / 3.0) - 0.01, A * (8.0 / 9.0) + 0.01}};
    for (auto c : cases) {
        double val = static_cast<double>(cumulative_psi(100000, w, c.n0)) / 1e10;
        bool ok = val >= c.lo && val <= c.hi;
        if (!ok) v.pass = false;
        v.details += "n0=" + std::to_string(c.n0) + ": " + fmt(val) + " in [" + fmt(c.lo) + "," +
                     fmt(c.hi) + "]" + (ok ? "" : " VIOLATED") + "; ";
    }
    return v;
}

// ---------------------------------------------------------------- 4
Verdict liminf_envelope_bracket() {
    Verdict v;
    auto env = liminf_envelope(1000000);
    v.pass = env.min_value >= 0.45 && env.min_value <= 0.57;
    v.details = "min phi(n) loglog(n)/n over [100,1e6] = " + fmt(env.min_value) + " at n=" +
                std::to_string(env.min_at) + " (need [0.45,0.57], exp(-gamma)=0.5615)";
    if (!v.pass && !env.primorials.empty()) {
        // the literal minimum sits at 7# = 210 where the loglog factor is far
        // from its limit; the primorial subsequence climbs toward exp(-gamma)
        // from below and its last value is the number the bracket describes
        v.details += "; largest-primorial value " + fmt(env.primorials.back().value) + " at n=" +
                     std::to_string(env.primorials.back().n) +
                     " -- the stated bracket holds for the primorial approach, not for the "
                     "minimum over the whole range (measured, not a solver artifact)";
    }
    return v;
}

// ---------------------------------------------------------------- 5
Verdict inclusion_exclusion_bound() {
    Verdict v;
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> lo(-1.0, 1.0);
    std::uniform_real_distribution<double> wd(0.05, 0.4);
    long violations = 0;
    double worst_margin = 1e100;
    for (int t = 0; t < 50; ++t) {
        double a = lo(rng), b = a + wd(rng);
        FractionWindow w(a, b);
        for (std::int64_t n = 1; n <= 10000; ++n) {
            auto e = inclusion_exclusion_error(n, w);
            double margin = static_cast<double>(e.bound) - std::fabs(e.epsilon);
            worst_margin = std::min(worst_margin, margin);
            if (margin < 0) ++violations;
        }
    }
    v.pass = violations == 0;
    v.details = std::to_string(violations) + " violations of |eps(n)| <= 2^omega(n) " +
                "(50 windows, n <= 1e4, tightest margin " + fmt(worst_margin) + ")";
    return v;
}

// ---------------------------------------------------------------- 6
Verdict rotation_identities() {
    Verdict v;
    std::mt19937_64 rng(4242);
    std::uniform_real_distribution<double> ux(0.0, 1.0);
    std::uniform_real_distribution<double> uy(0.1, 0.9);
    std::uniform_int_distribution<int> uk(-2, 3);
    double worst_shift = 0.0, worst_hom = 0.0;
    for (int t = 0; t < 20; ++t) {
        MapPtr f;
        switch (t % 3) {
            case 0: f = make_rigid_rotation(-0.5 + ux(rng)); break;
            case 1: f = make_linear_twist(-0.3, 0.4); break;
            default: f = make_perturbed_twist(-0.3, 0.4, standard_bump_hamiltonian(), 0.05);
        }
        AnnulusPoint seed{ux(rng), uy(rng)};
        auto rf = rotation_number(*f, seed, 40000, 1e-3);

        int k = uk(rng);
        auto g = make_deck_shifted(f, k);
        auto rg = rotation_number(*g, seed, 40000, 1e-3);
        double shift_err = std::fabs(rg.value - rf.value - k);
        double shift_tol = rf.error_bound + rg.error_bound + 1e-9;
        worst_shift = std::max(worst_shift, shift_err - shift_tol);
        if (shift_err > shift_tol) v.pass = false;

        // homogeneity: displacement of f^q averaged along the same trajectory
        const int q = 2 + (t % 2), n = 20000;
        LiftPoint z{seed.x, seed.y}, wz = z;
        for (int i = 0; i < q * n; ++i) wz = f->lift(wz);
        double rho_q = (wz.x_tilde - z.x_tilde) / n;
        double hom_err = std::fabs(rho_q - q * rf.value);
        double hom_tol = q * rf.error_bound + 2.0 / n + 1e-9;
        worst_hom = std::max(worst_hom, hom_err - hom_tol);
        if (hom_err > hom_tol) v.pass = false;
    }
    v.details = "20 family/seed pairs; worst shift excess " + fmt(worst_shift) +
                ", worst homogeneity excess " + fmt(worst_hom) + " (need <= 0)";
    return v;
}

// ---------------------------------------------------------------- 7
Verdict constructive_census() {
    Verdict v;
    auto f = make_perturbed_twist(-0.3, 0.4, standard_bump_hamiltonian(), 0.05);
    SolverParams sp;  // default 512x512 grid
    auto c = census(*f, 8, std::nullopt, sp);
    if (!c.complete) {
        v.pass = false;
        v.details = "census incomplete: " + std::to_string(c.missing.size()) + " fractions missing; ";
    }
    double worst_res = 0.0;  // over the best interior orbit of each fraction
    long interior_fracs = 0;
    for (const auto& [pq, orbits] : c.orbits) {
        double best = 1.0;
        for (const auto& o : orbits)
            if (o.interior) best = std::min(best, o.residual);
        if (best < 1.0) {
            ++interior_fracs;
            worst_res = std::max(worst_res, best);
        } else {
            v.pass = false;
            v.details += "no interior orbit for " + std::to_string(pq.first) + "/" +
                         std::to_string(pq.second) + "; ";
        }
    }
    if (worst_res >= 1e-10) v.pass = false;
    for (int n = 1; n <= 8; ++n) {
        if (c.n_eq(n) < phi_window(n, *c.window)) {
            v.pass = false;
            v.details += "N_eq(" + std::to_string(n) + ") below the fraction-class count; ";
        }
    }
    v.details += std::to_string(interior_fracs) + " fractions covered, worst best-orbit residual " +
                 fmt(worst_res) + " (need < 1e-10)";
    return v;
}

// ---------------------------------------------------------------- 8
Verdict growth_exponents() {
    Verdict v;
    FractionWindow w(Rational{-3, 10}, Rational{2, 5});
    auto exact = fraction_class_census(w, 64);
    auto fit_exact = growth_fit(exact, 8);
    bool ok1 = fit_exact.exponent >= 1.9 && fit_exact.exponent <= 2.1;

    auto f = make_perturbed_twist(-0.3, 0.4, standard_bump_hamiltonian(), 0.05);
    auto c = census(*f, 12, std::nullopt, SolverParams{});
    auto fit_num = growth_fit(c, 3);
    bool ok2 = fit_num.exponent >= 1.7 && fit_num.exponent <= 2.3 && fit_num.c_liminf > 0.0;

    v.pass = ok1 && ok2 && c.complete;
    v.details = "exact q<=64: " + fmt(fit_exact.exponent) + " (need [1.9,2.1]); numerical q<=12: " +
                fmt(fit_num.exponent) + " (need [1.7,2.3]), c_liminf=" + fmt(fit_num.c_liminf) +
                " (need > 0)";
    return v;
}

// ---------------------------------------------------------------- 9
Verdict period_arithmetic_oracle() {
    Verdict v;
    long mismatches = 0;
    for (std::uint64_t n = 1; n <= 30; ++n) {
        for (std::uint64_t k = 2; k <= 12; ++k) {
            // brute force on the cyclic rotation x -> x+1 mod k*n: every f
            // period is divisible by k after quotienting, and any point is an
            // n prime-periodic point of f^k
            std::uint64_t m = k * n;
            std::uint64_t x = 0, steps = 0;
            do {
                x = (x + k) % m;
                ++steps;
            } while (x != 0);
            if (steps != n) ++mismatches;  // sanity on the model itself
            std::uint64_t fx = 0, fsteps = 0;
            do {
                fx = (fx + 1) % m;
                ++fsteps;
            } while (fx != 0);
            if (prime_period_of_power(n, k) != fsteps) ++mismatches;
        }
    }
    v.pass = mismatches == 0;
    v.details = std::to_string(mismatches) + " mismatches over n<=30, k<=12 (need 0)";
    return v;
}

GeodesicLab make_lab(double a, double b, double c) {
    FlowOptions fo;
    fo.rtol = 1e-11;
    fo.atol = 1e-13;
    return GeodesicLab(EllipsoidMetric(a, b, c), 256, 1e-10, fo);
}

// ---------------------------------------------------------------- 10
Verdict geodesic_conservation() {
    Verdict v;
    GeodesicLab lab = make_lab(1.0, 1.05, 1.1);
    const double half = lab.delta() / 2.0;
    std::mt19937_64 rng(20260824);
    std::uniform_real_distribution<double> us(0.0, lab.delta());
    std::uniform_real_distribution<double> ut(0.05, kPi - 0.05);
    double worst_drift = 0.0, worst_flow_eq = 0.0, worst_half_eq = 0.0;
    for (int i = 0; i < 100; ++i) {
        SectionPoint x{us(rng), ut(rng)};
        TangentState st = lab.section_to_state(x);
        auto rec = lab.half_return(x);
        worst_drift = std::max(worst_drift, std::fabs(lab.metric().energy(rec.end_state.q,
                                                                          rec.end_state.v) -
                                                      lab.metric().energy(st.q, st.v)));
        // flow equivariance over the same flight
        TangentState a = geodesic_flow(lab.metric(), antipodal_pushforward(st), rec.flight_time);
        TangentState b = antipodal_pushforward(rec.end_state);
        double d = 0.0;
        for (int j = 0; j < 3; ++j)
            d = std::max({d, std::fabs(a.q[j] - b.q[j]), std::fabs(a.v[j] - b.v[j])});
        worst_flow_eq = std::max(worst_flow_eq, d);
        // the half-return commutes with the deck involution s -> s + delta/2
        SectionPoint xs{lab.curve().wrap(x.s + half), x.theta};
        auto rec2 = lab.half_return(xs);
        double ds = std::fabs(lab.curve().wrap(rec2.end.s - half) - lab.curve().wrap(rec.end.s));
        ds = std::min(ds, lab.delta() - ds);
        double dth = std::fabs(rec2.end.theta - rec.end.theta);
        worst_half_eq = std::max({worst_half_eq, ds, dth});
    }
    v.pass = worst_drift <= 1e-9 && worst_flow_eq <= 1e-8 && worst_half_eq <= 1e-8;
    v.details = "energy drift " + fmt(worst_drift) + " (<=1e-9), flow equivariance " +
                fmt(worst_flow_eq) + " (<=1e-8), half-return equivariance " + fmt(worst_half_eq) +
                " (<=1e-8) on 100 points";
    return v;
}

// ---------------------------------------------------------------- 11
Verdict section_validity() {
    Verdict v;
    GeodesicLab lab = make_lab(1.0, 1.05, 1.1);
    std::mt19937_64 rng(991);
    std::uniform_real_distribution<double> us(0.0, lab.delta());
    std::uniform_real_distribution<double> ut(0.02, kPi - 0.02);
    long returned = 0;
    bool band_ok = true;
    for (int i = 0; i < 1000; ++i) {
        SectionPoint x{us(rng), ut(rng)};
        try {
            auto rec = lab.half_return(x);
            ++returned;
            if (rec.flight_time < lab.flight_time_lower() - 1e-9 ||
                rec.flight_time > lab.flight_time_upper() + 1e-9)
                band_ok = false;
        } catch (const std::exception&) {
        }
    }
    double worst_area = 0.0;
    std::mt19937_64 rng2(992);
    std::uniform_real_distribution<double> s1(0.0, lab.delta() - 1.0);
    std::uniform_real_distribution<double> t1(0.2, kPi - 0.8);
    for (int r = 0; r < 10; ++r) {
        double a = s1(rng2), b = a + 0.3 + 0.6 * us(rng2) / lab.delta();
        double c = t1(rng2), d = c + 0.3 + 0.2 * ut(rng2) / kPi;
        auto res = area_preservation_check(lab, a, b, c, d, 256, 1000000, 1000 + r);
        worst_area = std::max(worst_area, std::fabs(res.rel_error));
    }
    v.pass = returned == 1000 && band_ok && worst_area <= 0.01;
    v.details = std::to_string(returned) + "/1000 points returned, flight band " +
                std::string(band_ok ? "respected" : "VIOLATED") + ", worst rectangle area error " +
                fmt(worst_area) + " (need <= 0.01)";
    return v;
}

// ---------------------------------------------------------------- 12
Verdict conjugate_point_claim() {
    Verdict v;
    GeodesicLab tri = make_lab(1.0, 1.05, 1.1);
    double worst_gap = 0.0;
    for (double s0 : {0.0, 1.0, 2.5, 4.0}) {
        auto rec = tri.boundary_extension(s0);
        worst_gap = std::max(worst_gap, std::fabs(rec.half_period_gap));
    }
    bool tri_ok = worst_gap <= 1e-6;

    GeodesicLab round = make_lab(1.0, 1.0, 1.0);
    auto rec = round.boundary_extension(0.7);
    double round_err = std::fabs(rec.conjugate_distance - kPi);
    bool round_ok = round_err <= 1e-8;

    v.pass = tri_ok && round_ok;
    v.details = "triaxial (1,1.05,1.1) worst |first zero - half period| = " + fmt(worst_gap) +
                " (need <= 1e-6" + std::string(tri_ok ? "" : "; the first Jacobi zero genuinely "
                "sits past the half period on a triaxial ellipsoid -- measured, not a solver "
                "artifact") + "), round-sphere zero at pi within " + fmt(round_err) + " (<= 1e-8)";
    return v;
}

// ---------------------------------------------------------------- 13
Verdict odd_orbit_correspondence() {
    Verdict v;
    // spheroid with boundary twist (c-1)/2 = 0.46: a window wide enough to
    // admit fractions up to denominator 9 while the interior lift stays on
    // the principal branch
    FlowOptions fo;
    fo.rtol = 1e-10;
    fo.atol = 1e-12;
    GeodesicLab lab(EllipsoidMetric(1.0, 1.0, 1.92), 256, 1e-10, fo);
    SolverParams sp;
    sp.grid_nx = 48;
    sp.grid_ny = 24;
    sp.tol = 1e-8;
    auto c = geodesic_census(lab, 9, sp, 1e-6, 20.0);

    bool reconstructed = c.complete && c.missing.empty() && c.non_closing.empty();
    if (!reconstructed) {
        v.pass = false;
        v.details += std::to_string(c.missing.size()) + " fractions missing, " +
                     std::to_string(c.non_closing.size()) + " reconstructions above 1e-6; ";
    }
    double worst_closure = 0.0;
    for (const auto& e : c.entries) worst_closure = std::max(worst_closure, e.closure_error);

    bool monotone = true;
    for (std::size_t i = 1; i < c.N_of_l.size(); ++i)
        if (c.N_of_l[i].second < c.N_of_l[i - 1].second) monotone = false;

    bool fit_ok = c.fit.exponent >= 1.5;
    v.pass = v.pass && monotone && fit_ok && !c.entries.empty();
    v.details += std::to_string(c.entries.size()) + " geodesics (q odd <= 9), worst closure " +
                 fmt(worst_closure) + " (<= 1e-6), N(l) " +
                 (monotone ? "non-decreasing" : "NOT MONOTONE") + ", log-log exponent " +
                 fmt(c.fit.exponent) + " for l >= 20 (need >= 1.5)";
    return v;
}

// ---------------------------------------------------------------- 14
Verdict covering_battery() {
    Verdict v;
    auto rep = so3_check(1000, 20260824);
    v.pass = rep.identity_residual == 0.0 && rep.pass(1e-12);
    double worst = std::max({rep.orthogonality_worst, rep.det_worst, rep.two_to_one_worst,
                             rep.homomorphism_worst, rep.isometry_worst,
                             rep.conjugation_consistency_worst, rep.z4_equivariance_worst});
    v.details = "identity residual " + fmt(rep.identity_residual) + " (exact), worst residual " +
                fmt(worst) + " over 1000 samples (need <= 1e-12)";
    return v;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<Check> checks = {
        {1, "totient asymptotics", totient_asymptotics},
        {2, "window scaling", window_scaling},
        {3, "coprime-filtered bounds", coprime_filtered_bounds},
        {4, "liminf envelope", liminf_envelope_bracket},
        {5, "inclusion-exclusion bound", inclusion_exclusion_bound},
        {6, "rotation-number identities", rotation_identities},
        {7, "constructive census", constructive_census},
        {8, "growth exponents", growth_exponents},
        {9, "period arithmetic oracle", period_arithmetic_oracle},
        {10, "geodesic conservation and symmetry", geodesic_conservation},
        {11, "section validity", section_validity},
        {12, "conjugate-point claim", conjugate_point_claim},
        {13, "odd-orbit correspondence", odd_orbit_correspondence},
        {14, "covering map battery", covering_battery},
    };

    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) only = std::atoi(argv[++i]);
    }

    int failures = 0;
    for (const auto& c : checks) {
        if (only != 0 && c.id != only) continue;
        auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v.pass = false;
            v.details = std::string("exception: ") + e.what();
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("[%s] criterion %2d (%s): %s  [%.1fs]\n", v.pass ? "PASS" : "FAIL", c.id,
                    c.title, v.details.c_str(), secs);
        if (!v.pass) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
