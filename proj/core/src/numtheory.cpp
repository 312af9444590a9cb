#include "annulab/numtheory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace annulab {

namespace {

using i64 = std::int64_t;
using u64 = std::uint64_t;
using i128 = __int128;

// floor(a/b) for b > 0
i64 floor_div(i128 a, i64 b) {
    i128 q = a / b;
    if (a % b != 0 && a < 0) --q;
    return static_cast<i64>(q);
}

}  // namespace

std::optional<Rational> parse_rational(const std::string& text) {
    if (text.empty()) return std::nullopt;
    auto slash = text.find('/');
    try {
        if (slash != std::string::npos) {
            i64 num = std::stoll(text.substr(0, slash));
            i64 den = std::stoll(text.substr(slash + 1));
            if (den == 0) return std::nullopt;
            if (den < 0) { num = -num; den = -den; }
            i64 g = std::gcd(std::abs(num), den);
            if (g > 1) { num /= g; den /= g; }
            return Rational{num, den};
        }
        auto dot = text.find('.');
        if (dot == std::string::npos) {
            return Rational{std::stoll(text), 1};
        }
        std::string frac = text.substr(dot + 1);
        if (frac.size() > 12) return std::nullopt;  // treat as irrational input
        std::string digits = text.substr(0, dot) + frac;
        i64 den = 1;
        for (size_t i = 0; i < frac.size(); ++i) den *= 10;
        // handle "-0.3": sign lives in the integer part string
        i64 num = std::stoll(digits.empty() ? "0" : digits);
        if (text[0] == '-' && text.substr(0, dot) == "-0") num = -num;
        i64 g = std::gcd(std::abs(num), den);
        if (g > 1) { num /= g; den /= g; }
        return Rational{num, den};
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

FractionWindow::FractionWindow(double rho_minus, double rho_plus)
    : lo_(rho_minus), hi_(rho_plus) {
    if (!(lo_ < hi_)) throw std::invalid_argument("FractionWindow: rho_minus < rho_plus required");
    if (!std::isfinite(lo_) || !std::isfinite(hi_))
        throw std::invalid_argument("FractionWindow: endpoints must be finite");
}

FractionWindow::FractionWindow(Rational rho_minus, Rational rho_plus)
    : FractionWindow(rho_minus.value(), rho_plus.value()) {
    lo_exact_ = rho_minus;
    hi_exact_ = rho_plus;
}

bool FractionWindow::contains(i64 p, i64 q) const {
    if (q <= 0) throw std::invalid_argument("contains: q must be positive");
    auto r = window_integer_range(q, *this);
    return p >= r.lo && p <= r.hi;
}

FractionWindow FractionWindow::translated(i64 k) const {
    if (exact()) {
        return FractionWindow(Rational{lo_exact_->num + k * lo_exact_->den, lo_exact_->den},
                              Rational{hi_exact_->num + k * hi_exact_->den, hi_exact_->den});
    }
    return FractionWindow(lo_ + k, hi_ + k);
}

WindowIntegerRange window_integer_range(i64 n, const FractionWindow& w) {
    if (n <= 0) throw std::invalid_argument("window_integer_range: n must be positive");
    WindowIntegerRange r;
    if (w.lo_exact()) {
        // smallest m with m * den > n * num
        i128 prod = static_cast<i128>(n) * w.lo_exact()->num;
        r.lo = floor_div(prod, w.lo_exact()->den) + 1;
    } else {
        double t = n * w.lo();
        double f = std::floor(t);
        r.lo = static_cast<i64>(f) + 1;
        if (t - f > 1.0 - FractionWindow::kEndpointTol) {  // t within tol below an integer
            ++r.lo;
            ++r.boundary_ambiguous;
        } else if (t - f < FractionWindow::kEndpointTol && t >= f) {
            ++r.boundary_ambiguous;  // t within tol above floor; m=f excluded anyway
        }
    }
    if (w.hi_exact()) {
        i128 prod = static_cast<i128>(n) * w.hi_exact()->num;
        i64 fd = floor_div(prod, w.hi_exact()->den);
        // largest m with m * den < n * num
        r.hi = (static_cast<i128>(fd) * w.hi_exact()->den == prod) ? fd - 1 : fd;
    } else {
        double t = n * w.hi();
        double c = std::ceil(t);
        r.hi = static_cast<i64>(c) - 1;
        if (c - t > 1.0 - FractionWindow::kEndpointTol) {
            --r.hi;
            ++r.boundary_ambiguous;
        } else if (c - t < FractionWindow::kEndpointTol && t <= c) {
            ++r.boundary_ambiguous;
        }
    }
    return r;
}

u64 euler_phi(u64 n) {
    if (n == 0) throw std::domain_error("euler_phi: n must be >= 1");
    u64 result = n;
    u64 m = n;
    for (u64 p = 2; p * p <= m; p += (p == 2 ? 1 : 2)) {
        if (m % p == 0) {
            result -= result / p;
            while (m % p == 0) m /= p;
        }
    }
    if (m > 1) result -= result / m;
    return result;
}

std::vector<u64> distinct_prime_factors(u64 n) {
    std::vector<u64> primes;
    u64 m = n;
    for (u64 p = 2; p * p <= m; p += (p == 2 ? 1 : 2)) {
        if (m % p == 0) {
            primes.push_back(p);
            while (m % p == 0) m /= p;
        }
    }
    if (m > 1) primes.push_back(m);
    return primes;
}

bool is_prime(u64 n) {
    if (n < 2) return false;
    for (u64 p = 2; p * p <= n; p += (p == 2 ? 1 : 2))
        if (n % p == 0) return false;
    return true;
}

std::vector<std::uint32_t> totient_sieve(std::uint32_t n_max) {
    std::vector<std::uint32_t> phi(n_max + 1);
    for (std::uint32_t i = 0; i <= n_max; ++i) phi[i] = i;
    for (std::uint32_t i = 2; i <= n_max; ++i) {
        if (phi[i] == i) {  // i prime
            for (std::uint32_t j = i; j <= n_max; j += i) phi[j] -= phi[j] / i;
        }
    }
    phi[0] = 0;
    return phi;
}

namespace {

// Count of integers in [1-ish..x] coprime to n, Mobius-style over the
// squarefree divisors built from n's distinct primes; valid for negative x.
i64 coprime_count_upto(i64 x, const std::vector<u64>& primes) {
    i64 total = 0;
    size_t s = primes.size();
    for (u64 mask = 0; mask < (1ull << s); ++mask) {
        i64 d = 1;
        int bits = 0;
        for (size_t i = 0; i < s; ++i)
            if (mask & (1ull << i)) { d *= static_cast<i64>(primes[i]); ++bits; }
        i64 term = floor_div(x, d);
        total += (bits % 2 == 0) ? term : -term;
    }
    return total;
}

u64 phi_window_impl(i64 n, const FractionWindow& w, const std::vector<u64>& primes) {
    auto r = window_integer_range(n, w);
    if (r.hi < r.lo) return 0;
    return static_cast<u64>(coprime_count_upto(r.hi, primes) - coprime_count_upto(r.lo - 1, primes));
}

}  // namespace

u64 phi_window(i64 n, const FractionWindow& w) {
    if (n <= 0) throw std::domain_error("phi_window: n must be >= 1");
    return phi_window_impl(n, w, distinct_prime_factors(static_cast<u64>(n)));
}

u64 cumulative_phi(i64 n, const FractionWindow& w) {
    if (n <= 0) throw std::domain_error("cumulative_phi: n must be >= 1");
    u64 total = 0;
    // smallest-prime-factor sieve for fast distinct-prime extraction
    std::vector<std::uint32_t> spf(static_cast<size_t>(n) + 1, 0);
    for (i64 i = 2; i <= n; ++i) {
        if (spf[i] == 0)
            for (i64 j = i; j <= n; j += i)
                if (spf[j] == 0) spf[j] = static_cast<std::uint32_t>(i);
    }
    std::vector<u64> primes;
    for (i64 q = 1; q <= n; ++q) {
        primes.clear();
        i64 m = q;
        while (m > 1) {
            u64 p = spf[m];
            primes.push_back(p);
            while (m % static_cast<i64>(p) == 0) m /= static_cast<i64>(p);
        }
        total += phi_window_impl(q, w, primes);
    }
    return total;
}

u64 cumulative_psi(i64 n, const FractionWindow& w, u64 n0) {
    if (n <= 0) throw std::domain_error("cumulative_psi: n must be >= 1");
    if (!is_prime(n0)) throw std::invalid_argument("cumulative_psi: n0 must be prime");
    u64 total = 0;
    for (i64 q = 1; q <= n; ++q) {
        if (static_cast<u64>(q) % n0 == 0) continue;
        total += phi_window(q, w);
    }
    return total;
}

InclusionExclusionError inclusion_exclusion_error(i64 n, const FractionWindow& w) {
    if (n <= 0) throw std::domain_error("inclusion_exclusion_error: n must be >= 1");
    auto primes = distinct_prime_factors(static_cast<u64>(n));
    double counted = static_cast<double>(phi_window_impl(n, w, primes));
    double expected = w.width() * static_cast<double>(euler_phi(static_cast<u64>(n)));
    InclusionExclusionError e;
    e.epsilon = counted - expected;
    e.bound = 1ull << primes.size();
    return e;
}

const std::vector<u64>& primorials_u31() {
    static const std::vector<u64> table = {2,       6,        30,        210,      2310,
                                           30030,   510510,   9699690,   223092870};
    return table;
}

LiminfEnvelope liminf_envelope(std::uint32_t n_max) {
    if (n_max < 100) throw std::invalid_argument("liminf_envelope: n_max >= 100 required");
    auto phi = totient_sieve(n_max);
    LiminfEnvelope env;
    double best = std::numeric_limits<double>::infinity();
    for (std::uint32_t n = 100; n <= n_max; ++n) {
        double v = static_cast<double>(phi[n]) * std::log(std::log(static_cast<double>(n))) / n;
        if (v < best) {
            best = v;
            env.running_min.push_back({n, v});
        }
    }
    env.min_value = best;
    env.min_at = env.running_min.empty() ? 0 : env.running_min.back().n;
    for (u64 pr : primorials_u31()) {
        if (pr < 100 || pr > n_max) continue;
        double v = static_cast<double>(phi[static_cast<std::uint32_t>(pr)]) *
                   std::log(std::log(static_cast<double>(pr))) / static_cast<double>(pr);
        env.primorials.push_back({pr, v});
    }
    return env;
}

u64 prime_period_of_power(u64 n, u64 k) {
    if (n == 0 || k == 0) throw std::domain_error("prime_period_of_power: n, k must be >= 1");
    return k * n;
}

CountingReport counting_report(std::uint32_t n_max, const FractionWindow& w,
                               std::optional<u64> n0) {
    if (n_max == 0) throw std::domain_error("counting_report: n_max must be >= 1");
    if (n0 && !is_prime(*n0)) throw std::invalid_argument("counting_report: n0 must be prime");
    CountingReport rep;
    rep.n_max = n_max;
    rep.n0 = n0;
    rep.window_lo = w.lo();
    rep.window_hi = w.hi();
    auto phi = totient_sieve(n_max);
    rep.per_n.reserve(n_max);
    for (std::uint32_t q = 1; q <= n_max; ++q) {
        auto primes = distinct_prime_factors(q);
        auto range = window_integer_range(q, w);
        rep.boundary_ambiguous_total += range.boundary_ambiguous;
        u64 pw = phi_window_impl(q, w, primes);
        rep.per_n.push_back({q, phi[q], pw});
        rep.cumulative_Phi += pw;
        if (n0 && q % *n0 != 0) rep.cumulative_Psi += pw;
    }
    return rep;
}

}  // namespace annulab
