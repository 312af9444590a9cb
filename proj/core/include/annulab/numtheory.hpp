#ifndef ANNULAB_NUMTHEORY_HPP
#define ANNULAB_NUMTHEORY_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace annulab {

/// Exact rational endpoint, num/den with den > 0.
struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1;

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

/// Parses "p/q" or a plain decimal. Decimals with a short fractional part
/// are promoted to exact rationals (e.g. "-0.3" -> -3/10).
std::optional<Rational> parse_rational(const std::string& text);

/// Open interval (rho_minus, rho_plus) of rotation numbers.
///
/// When an endpoint carries an exact rational, membership tests for
/// integers m against n*rho are decided in integer arithmetic. Otherwise a
/// documented absolute tolerance on n*rho applies and near-endpoint hits
/// are tallied as boundary-ambiguous (excluded from the count).
class FractionWindow {
public:
    FractionWindow(double rho_minus, double rho_plus);
    FractionWindow(Rational rho_minus, Rational rho_plus);

    double lo() const { return lo_; }
    double hi() const { return hi_; }
    double width() const { return hi_ - lo_; }
    const std::optional<Rational>& lo_exact() const { return lo_exact_; }
    const std::optional<Rational>& hi_exact() const { return hi_exact_; }
    bool exact() const { return lo_exact_ && hi_exact_; }

    /// Endpoint comparison tolerance on n*rho for inexact endpoints.
    static constexpr double kEndpointTol = 1e-12;

    /// Strict containment of the irreducible fraction p/q.
    bool contains(std::int64_t p, std::int64_t q) const;

    FractionWindow translated(std::int64_t k) const;

private:
    double lo_, hi_;
    std::optional<Rational> lo_exact_, hi_exact_;
};

/// Inclusive integer range [lo, hi] of the m admitted by a window at
/// denominator n, before the coprimality filter. Empty when hi < lo.
struct WindowIntegerRange {
    std::int64_t lo = 0;
    std::int64_t hi = -1;
    int boundary_ambiguous = 0;
};

WindowIntegerRange window_integer_range(std::int64_t n, const FractionWindow& w);

std::uint64_t euler_phi(std::uint64_t n);

/// Distinct prime factors of n, ascending.
std::vector<std::uint64_t> distinct_prime_factors(std::uint64_t n);

bool is_prime(std::uint64_t n);

/// phi(q) for q = 0..n_max via a linear sieve; index 0 holds 0.
std::vector<std::uint32_t> totient_sieve(std::uint32_t n_max);

/// Count of integers m strictly inside (n*rho-, n*rho+) with gcd(m,n)=1.
std::uint64_t phi_window(std::int64_t n, const FractionWindow& w);

/// Sum of phi_window(q, w) for q = 1..n.
std::uint64_t cumulative_phi(std::int64_t n, const FractionWindow& w);

/// Sum of phi_window(q, w) over q <= n with gcd(q, n0) = 1; n0 must be prime.
std::uint64_t cumulative_psi(std::int64_t n, const FractionWindow& w, std::uint64_t n0);

struct InclusionExclusionError {
    double epsilon;        // phi_window(n,w) - (rho+ - rho-) * phi(n)
    std::uint64_t bound;   // 2^s, s = number of distinct prime factors of n
};

InclusionExclusionError inclusion_exclusion_error(std::int64_t n, const FractionWindow& w);

struct LiminfEnvelope {
    struct Record {
        std::uint64_t n;
        double value;  // phi(n) * log(log(n)) / n
    };
    std::vector<Record> running_min;     // strictly decreasing records, n >= 100
    std::vector<Record> primorials;      // primorial subsequence values <= n_max
    double min_value = 0.0;
    std::uint64_t min_at = 0;
};

/// Running-minimum envelope of phi(n) loglog(n)/n over 100 <= n <= n_max.
LiminfEnvelope liminf_envelope(std::uint32_t n_max);

/// Primorials below 2^31: 2, 6, 30, ..., 223092870.
const std::vector<std::uint64_t>& primorials_u31();

/// Period arithmetic of iterated maps: an n prime-periodic point of f^k is
/// a k*n prime-periodic point of f, provided every period of f is divisible
/// by k. Inputs must be positive.
std::uint64_t prime_period_of_power(std::uint64_t n, std::uint64_t k);

struct CountingReport {
    struct Row {
        std::uint32_t n;
        std::uint64_t phi;
        std::uint64_t phi_window;
    };
    std::uint32_t n_max = 0;
    std::vector<Row> per_n;
    std::uint64_t cumulative_Phi = 0;
    std::uint64_t cumulative_Psi = 0;  // populated when n0 is set
    std::optional<std::uint64_t> n0;
    double window_lo = 0.0, window_hi = 0.0;
    int boundary_ambiguous_total = 0;
    double endpoint_tolerance = FractionWindow::kEndpointTol;
};

CountingReport counting_report(std::uint32_t n_max, const FractionWindow& w,
                               std::optional<std::uint64_t> n0);

}  // namespace annulab

#endif
