#include <cmath>
#include <filesystem>

#include "annulab/orbit_search.hpp"
#include "annulab/reporting.hpp"
#include "doctest.h"

using namespace annulab;

namespace {

SolverParams quick_params() {
    SolverParams sp;
    sp.grid_nx = 128;
    sp.grid_ny = 128;
    return sp;
}

}  // namespace

TEST_CASE("fractions_in_window enumerates irreducible fractions sorted by (q,p)") {
    FractionWindow w(Rational{-3, 10}, Rational{2, 5});
    auto fr = fractions_in_window(w, 5);
    std::vector<std::pair<long, int>> expected = {
        {0, 1}, {1, 3}, {-1, 4}, {1, 4}, {-1, 5}, {1, 5}};
    CHECK(fr == expected);
}

TEST_CASE("integrable twist: invariant circle at the exact rational height") {
    // omega(y) = -0.3 + 0.7 y crosses 1/3 at y = 19/21
    auto f = make_linear_twist(-0.3, 0.4);
    auto r = find_orbits(*f, 1, 3, quick_params());
    REQUIRE(!r.orbits.empty());
    CHECK(r.non_isolated_continuum);  // a full circle of period-3 points
    const auto& orb = r.orbits.front();
    REQUIRE(orb.points.size() == 3);
    for (const auto& z : orb.points) CHECK(z.y == doctest::Approx(19.0 / 21.0).epsilon(1e-8));
    CHECK(orb.residual < 1e-10);
    CHECK(orb.prime_period == 3);
}

TEST_CASE("fraction outside the window is reported as such") {
    auto f = make_linear_twist(-0.3, 0.4);
    auto r = find_orbits(*f, 1, 2, quick_params());  // 1/2 > 0.4
    CHECK(r.outside_window);
    CHECK(r.orbits.empty());
}

TEST_CASE("perturbed twist: at least one interior orbit per small fraction") {
    auto f = make_perturbed_twist(-0.3, 0.4, standard_bump_hamiltonian(), 0.05);
    for (auto [p, q] : std::vector<std::pair<long, int>>{{0, 1}, {1, 3}, {-1, 4}}) {
        auto r = find_orbits(*f, p, q, SolverParams{});
        REQUIRE_MESSAGE(!r.orbits.empty(), "no orbit for ", p, "/", q);
        double best_interior = 1.0;
        for (const auto& o : r.orbits) {
            CHECK(o.residual < 1e-9);
            CHECK(o.period_q == q);
            CHECK(o.translation_p == p);
            if (o.interior) best_interior = std::min(best_interior, o.residual);
        }
        // at least one interior orbit refined below the solver tolerance
        CHECK(best_interior < 1e-10);
    }
}

TEST_CASE("re-filing: reducible fractions are rejected, doubled orbits re-filed") {
    auto f = make_perturbed_twist(-0.3, 0.4, standard_bump_hamiltonian(), 0.05);
    // 2/6 is the same rotation class as 1/3; the search only accepts the
    // irreducible representative
    CHECK_THROWS(find_orbits(*f, 2, 6, SolverParams{}));
    // a genuine period-3 orbit written out with period 6 classifies back to 3
    auto r = find_orbits(*f, 1, 3, SolverParams{});
    REQUIRE(!r.orbits.empty());
    PeriodicOrbit doubled = r.orbits.front();
    doubled.period_q = 6;
    doubled.translation_p = 2;
    doubled.points.insert(doubled.points.end(), r.orbits.front().points.begin(),
                          r.orbits.front().points.end());
    bool ambiguous = false;
    CHECK(classify_prime_period(doubled, *f, 1e-7, &ambiguous) == 3);
    CHECK_FALSE(ambiguous);
}

TEST_CASE("census counts satisfy the fraction-class lower bound") {
    auto f = make_perturbed_twist(-0.3, 0.4, standard_bump_hamiltonian(), 0.05);
    auto c = census(*f, 5, 2, SolverParams{});
    REQUIRE(c.complete);
    REQUIRE(c.window.has_value());
    for (int n = 1; n <= 5; ++n) CHECK(c.n_eq(n) >= phi_window(n, *c.window));
    // cumulative columns are consistent
    std::uint64_t run = 0, run_cop = 0;
    for (int n = 1; n <= 5; ++n) {
        run += c.n_eq(n);
        if (n % 2 == 1) run_cop += c.n_eq(n);
        CHECK(c.n_le(n) == run);
        CHECK(c.n_le_coprime(n) == run_cop);
    }
}

TEST_CASE("fraction_class_census reproduces phi_window exactly") {
    FractionWindow w(Rational{-3, 10}, Rational{2, 5});
    auto c = fraction_class_census(w, 32);
    CHECK(c.analytic_counts);
    for (int n = 1; n <= 32; ++n) CHECK(c.n_eq(n) == phi_window(n, w));
}

TEST_CASE("growth_fit on exact counts approaches the quadratic law") {
    FractionWindow w(Rational{-3, 10}, Rational{2, 5});
    auto c = fraction_class_census(w, 64);
    auto fit = growth_fit(c, 8);
    CHECK(fit.exponent > 1.9);
    CHECK(fit.exponent < 2.1);
    CHECK(fit.c_liminf > 0.0);
}

TEST_CASE("golden census table is reproduced") {
    // regenerate the default perturbed-twist census and diff against the
    // checked-in table; counts are integers and must match exactly
    auto f = make_perturbed_twist(-0.3, 0.4, standard_bump_hamiltonian(), 0.05);
    SolverParams sp;  // default 512x512 grid, matching the recorded run
    auto c = census(*f, 8, 2, sp);
    REQUIRE(c.complete);
    GoldenTable actual;
    actual.header = {"n", "N_eq", "N_le", "N_le_coprime"};
    for (int n = 1; n <= 8; ++n)
        actual.rows.push_back({std::to_string(n), std::to_string(c.n_eq(n)),
                               std::to_string(c.n_le(n)), std::to_string(c.n_le_coprime(n))});
    auto golden = GoldenTable::load(std::filesystem::path(ANNULAB_GOLDEN_DIR) / "census_q8.csv");
    auto diff = diff_golden(golden, actual, {});
    CHECK_MESSAGE(diff.match(), diff.summary());
}
