#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>

#include "annulab/numtheory.hpp"
#include "doctest.h"

using namespace annulab;

namespace {

// Straightforward gcd-counting version of phi_window, used as an oracle.
std::uint64_t phi_window_naive(std::int64_t n, double lo, double hi) {
    std::uint64_t count = 0;
    for (std::int64_t m = static_cast<std::int64_t>(std::floor(n * lo)) - 1;
         m <= static_cast<std::int64_t>(std::ceil(n * hi)) + 1; ++m) {
        double v = static_cast<double>(m) / static_cast<double>(n);
        if (v <= lo || v >= hi) continue;
        if (std::gcd(std::abs(m), n) == 1) ++count;
    }
    return count;
}

}  // namespace

TEST_CASE("euler_phi on hand-checked values") {
    CHECK(euler_phi(1) == 1);
    CHECK(euler_phi(2) == 1);
    CHECK(euler_phi(12) == 4);
    CHECK(euler_phi(97) == 96);
    CHECK(euler_phi(360) == 96);
    CHECK(euler_phi(1000000) == 400000);
}

TEST_CASE("totient sieve agrees with the direct factorization") {
    auto phi = totient_sieve(2000);
    REQUIRE(phi.size() == 2001);
    CHECK(phi[0] == 0);
    for (std::uint32_t n = 1; n <= 2000; ++n) CHECK(phi[n] == euler_phi(n));
}

TEST_CASE("distinct_prime_factors and is_prime") {
    CHECK(distinct_prime_factors(1).empty());
    CHECK(distinct_prime_factors(360) == std::vector<std::uint64_t>{2, 3, 5});
    CHECK(distinct_prime_factors(97) == std::vector<std::uint64_t>{97});
    CHECK(is_prime(2));
    CHECK(is_prime(97));
    CHECK_FALSE(is_prime(1));
    CHECK_FALSE(is_prime(91));
}

TEST_CASE("phi_window on the unit window equals phi for n >= 2") {
    FractionWindow w(Rational{0, 1}, Rational{1, 1});
    CHECK(phi_window(1, w) == 0);  // open interval: 0/1 and 1/1 excluded
    for (std::int64_t n = 2; n <= 200; ++n) CHECK(phi_window(n, w) == euler_phi(n));
}

TEST_CASE("frozen small-window values") {
    FractionWindow w(Rational{0, 1}, Rational{1, 1});
    CHECK(phi_window(5, w) == 4);
    CHECK(cumulative_phi(5, w) == 9);
    CHECK(cumulative_psi(5, w, 2) == 6);
    CHECK(cumulative_psi(5, w, 3) == 7);  // drops only q = 3
}

TEST_CASE("phi_window matches the naive count on random rational windows") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<std::int64_t> num(-40, 40);
    std::uniform_int_distribution<std::int64_t> den(1, 23);
    for (int t = 0; t < 60; ++t) {
        Rational a{num(rng), den(rng)};
        Rational b{num(rng), den(rng)};
        if (a.value() >= b.value()) continue;
        FractionWindow w(a, b);
        for (std::int64_t n = 1; n <= 40; ++n)
            CHECK(phi_window(n, w) == phi_window_naive(n, a.value(), b.value()));
    }
}

TEST_CASE("exact endpoints decide boundary fractions in integer arithmetic") {
    // 1/3 sits exactly on the upper endpoint; open window must exclude it.
    FractionWindow w(Rational{0, 1}, Rational{1, 3});
    CHECK_FALSE(w.contains(1, 3));
    CHECK(w.contains(1, 4));
    CHECK(phi_window(3, w) == 0);
    CHECK(phi_window(6, w) == 1);  // only 1/6
}

TEST_CASE("window translation shifts admitted numerators") {
    FractionWindow w(Rational{-3, 10}, Rational{2, 5});
    FractionWindow w1 = w.translated(2);
    for (std::int64_t n = 1; n <= 30; ++n) CHECK(phi_window(n, w) == phi_window(n, w1));
    CHECK(w1.contains(2 * 7 + 1, 7));
    CHECK_FALSE(w.contains(2 * 7 + 1, 7));
}

TEST_CASE("cumulative_Phi follows the 3 n^2 / pi^2 law on the unit window") {
    FractionWindow w(Rational{0, 1}, Rational{1, 1});
    const double pi2 = M_PI * M_PI;
    double prev = 1e9;
    for (std::int64_t n : {1000, 10000, 100000}) {
        double ratio = static_cast<double>(cumulative_phi(n, w)) * pi2 / (3.0 * n * double(n));
        CHECK(std::fabs(ratio - 1.0) < 0.02);
        // deviation shrinks as n grows
        CHECK(std::fabs(ratio - 1.0) < prev);
        prev = std::fabs(ratio - 1.0);
    }
}

TEST_CASE("inclusion-exclusion error keeps within 2^omega(n)") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int t = 0; t < 25; ++t) {
        double a = u(rng), b = u(rng);
        if (a >= b) std::swap(a, b);
        if (b - a < 1e-3) continue;
        FractionWindow w(a, b);
        for (std::int64_t n = 1; n <= 400; ++n) {
            auto e = inclusion_exclusion_error(n, w);
            CHECK(std::fabs(e.epsilon) <= static_cast<double>(e.bound) + 1e-9);
        }
    }
}

TEST_CASE("liminf envelope: minimum at 7# and primorial approach from below") {
    auto env = liminf_envelope(1000000);
    // the running minimum sits at 210 = 7#, where the loglog factor is still
    // small; the primorial subsequence then climbs toward exp(-gamma)
    CHECK(env.min_at == 210);
    CHECK(env.min_value == doctest::Approx(0.3832127).epsilon(1e-5));
    for (std::size_t i = 1; i < env.running_min.size(); ++i)
        CHECK(env.running_min[i].value < env.running_min[i - 1].value);
    REQUIRE(!env.primorials.empty());
    CHECK(env.primorials.back().n == 510510);  // 17#, largest below 10^6
    CHECK(env.primorials.back().value == doctest::Approx(0.46502).epsilon(1e-3));
    double prev = 0.0;
    for (const auto& rec : env.primorials) {
        CHECK(rec.value > prev);        // monotone approach
        CHECK(rec.value < 0.5614595);   // always from below
        prev = rec.value;
    }
}

TEST_CASE("primorial table") {
    const auto& ps = primorials_u31();
    REQUIRE(ps.size() >= 9);
    CHECK(ps[0] == 2);
    CHECK(ps[4] == 2310);
    CHECK(ps.back() == 223092870);
}

TEST_CASE("prime_period_of_power multiplies the period") {
    CHECK(prime_period_of_power(1, 2) == 2);
    CHECK(prime_period_of_power(5, 3) == 15);
    CHECK_THROWS(prime_period_of_power(0, 2));
    CHECK_THROWS(prime_period_of_power(2, 0));
}

TEST_CASE("counting_report wires the columns together") {
    FractionWindow w(Rational{0, 1}, Rational{1, 1});
    auto rep = counting_report(50, w, 2);
    REQUIRE(rep.per_n.size() == 50);
    std::uint64_t phi_sum = 0, psi_sum = 0;
    for (const auto& row : rep.per_n) {
        CHECK(row.phi == euler_phi(row.n));
        CHECK(row.phi_window == phi_window(row.n, w));
        phi_sum += row.phi_window;
        if (row.n % 2 == 1) psi_sum += row.phi_window;
    }
    CHECK(rep.cumulative_Phi == phi_sum);
    CHECK(rep.cumulative_Psi == psi_sum);
}

TEST_CASE("parse_rational accepts fractions and short decimals") {
    auto r = parse_rational("-3/10");
    REQUIRE(r);
    CHECK(r->num == -3);
    CHECK(r->den == 10);
    auto d = parse_rational("0.4");
    REQUIRE(d);
    CHECK(d->num * 5 == d->den * 2);
    CHECK_FALSE(parse_rational("abc"));
}
