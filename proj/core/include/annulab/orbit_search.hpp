#ifndef ANNULAB_ORBIT_SEARCH_HPP
#define ANNULAB_ORBIT_SEARCH_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "annulab/annulus.hpp"
#include "annulab/numtheory.hpp"

namespace annulab {

struct PeriodicOrbit {
    int period_q = 0;
    long translation_p = 0;
    std::vector<AnnulusPoint> points;  // length period_q
    double residual = 0.0;             // max |f~^q(z~) - z~ - (p,0)| over the orbit
    int prime_period = 0;
    bool interior = true;
    bool non_isolated = false;  // representative of a continuum of periodic points
    bool ambiguous_period = false;
};

struct SolverParams {
    int grid_nx = 512;
    int grid_ny = 512;
    double tol = 1e-10;
    double dedup_eps = 1e-7;
    double fd_step = 1e-6;
    int newton_max_steps = 40;
    int continuum_threshold = 24;  // distinct orbit classes beyond this flag a continuum
    bool double_grid_on_not_found = true;
    int threads = 0;  // 0: hardware concurrency
};

struct FindOrbitsResult {
    std::vector<PeriodicOrbit> orbits;
    bool outside_window = false;
    bool not_found = false;
    bool non_isolated_continuum = false;
    std::string diagnostic;
};

/// Roots of the displacement field f~^q(z~) - z~ - (p, 0) over a fundamental
/// domain, refined by damped Newton (finite-difference Jacobian) with a
/// bisection fallback on y-slices for twist-like maps.
FindOrbitsResult find_orbits(const LiftedAnnulusMap& map, long p, int q,
                             const SolverParams& params);

/// Smallest divisor l of orbit.period_q with f^l within dedup_eps of the
/// identity on the orbit; flags ambiguity when two candidates collide.
int classify_prime_period(const PeriodicOrbit& orbit, const LiftedAnnulusMap& map,
                          double dedup_eps, bool* ambiguous = nullptr);

struct OrbitCensus {
    std::optional<FractionWindow> window;
    int q_max = 0;
    std::optional<std::uint64_t> n0;
    // orbits keyed by irreducible (p, q)
    std::map<std::pair<long, int>, std::vector<PeriodicOrbit>> orbits;
    std::map<int, std::uint64_t> N_eq;
    std::map<int, std::uint64_t> N_le;
    std::map<int, std::uint64_t> N_le_coprime;
    double dedup_eps = 1e-7;
    bool complete = true;
    bool analytic_counts = false;  // counts came from exact fraction classes
    bool has_continua = false;
    std::vector<std::pair<long, int>> missing;  // fractions with no orbit found

    std::uint64_t n_eq(int n) const;
    std::uint64_t n_le(int n) const;
    std::uint64_t n_le_coprime(int n) const;
};

/// Runs find_orbits for every irreducible p/q in the boundary window with
/// q <= q_max; requires a non-degenerate window. Fraction jobs run on a work
/// pool; the merge is deterministic.
OrbitCensus census(const LiftedAnnulusMap& map, int q_max, std::optional<std::uint64_t> n0,
                   const SolverParams& params);

/// Exact fraction-class counts N_eq(n) = phi_window(n, w) without any orbit
/// search (integrable families, one class per invariant circle).
OrbitCensus fraction_class_census(const FractionWindow& w, int q_max,
                                  std::optional<std::uint64_t> n0 = std::nullopt);

struct GrowthFit {
    double exponent = 0.0;
    double prefactor = 0.0;
    double c_liminf = 0.0;
    int n_min = 0;
    int n_max = 0;
};

/// Least-squares slope of log N_le(n) against log n over [n_min, q_max].
GrowthFit growth_fit(const OrbitCensus& c, int n_min);

/// Irreducible fractions p/q with q <= q_max strictly inside w, sorted by (q, p).
std::vector<std::pair<long, int>> fractions_in_window(const FractionWindow& w, int q_max);

}  // namespace annulab

#endif
