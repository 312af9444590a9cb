#ifndef ANNULAB_ANNULUS_HPP
#define ANNULAB_ANNULUS_HPP

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "annulab/numtheory.hpp"

namespace annulab {

/// Point of the closed annulus R/Z x [0,1], x kept in [0,1).
struct AnnulusPoint {
    double x = 0.0;
    double y = 0.0;
};

/// Point of the covering space R x [0,1].
struct LiftPoint {
    double x_tilde = 0.0;
    double y = 0.0;
};

double wrap_unit(double x);  // representative in [0,1)

/// Distance on the annulus: circle distance in x, absolute in y.
double annulus_distance(const AnnulusPoint& a, const AnnulusPoint& b);

/// An annulus homeomorphism isotopic to the identity, carried by a
/// distinguished lift. The deck transformation T shifts x_tilde by 1;
/// lifts commute with T by construction of every built-in family.
class LiftedAnnulusMap {
public:
    virtual ~LiftedAnnulusMap() = default;

    virtual LiftPoint lift(const LiftPoint& z) const = 0;
    AnnulusPoint apply(const AnnulusPoint& z) const;

    virtual bool has_inverse() const { return false; }
    virtual LiftPoint lift_inverse(const LiftPoint& z) const;

    virtual bool closed_annulus() const { return true; }
    /// Displacement monotone across the annulus; enables slice root finding.
    virtual bool twist_like() const { return false; }
    virtual bool area_preserving() const { return true; }
    /// Analytic boundary rotation numbers (rho at y=0, rho at y=1) if known.
    virtual std::optional<std::pair<double, double>> analytic_boundary_rotations() const {
        return std::nullopt;
    }
    virtual std::string describe() const = 0;

    LiftPoint lift_iterate(LiftPoint z, int n) const;  // n may be negative if invertible
};

using MapPtr = std::shared_ptr<const LiftedAnnulusMap>;

/// (x, y) -> (x + alpha, y).
MapPtr make_rigid_rotation(double alpha);

/// Pure shear (x, y) -> (x + omega(y), y) with omega strictly monotone.
/// Monotonicity is checked on a sample grid; constants are rejected.
MapPtr make_integrable_twist(std::function<double(double)> omega);
MapPtr make_linear_twist(double omega0, double omega1);  // omega(y) = omega0 + (omega1-omega0) y

/// Hamiltonian on the annulus with analytic gradient. H must be 1-periodic
/// in x and vanish to second order at y in {0,1}.
struct AnnulusHamiltonian {
    std::function<double(double, double)> H;
    std::function<double(double, double)> dHdx;
    std::function<double(double, double)> dHdy;
    std::string name;
};

/// H(x,y) = amplitude * sin(2 pi x) * y^2 (1-y)^2.
AnnulusHamiltonian standard_bump_hamiltonian(double amplitude = 1.0);

/// Time-epsilon Hamiltonian flow (implicit midpoint, `substeps` steps)
/// composed with the linear shear. Area preservation is structural up to the
/// fixed-point tolerance of the midpoint solve. Construction probes a grid
/// of points and rejects epsilon values whose flow leaves the annulus.
MapPtr make_perturbed_twist(double omega0, double omega1, const AnnulusHamiltonian& h,
                            double epsilon, int substeps = 6);

/// T^k compose f: lift gains +k.
MapPtr make_deck_shifted(MapPtr base, int k);

/// c o f o c^-1 for an invertible conjugating map c.
MapPtr make_conjugated(MapPtr conjugator, MapPtr base);

/// Standalone time-1 Hamiltonian flow map (for conjugacy tests).
MapPtr make_hamiltonian_flow_map(const AnnulusHamiltonian& h, double time, int substeps = 16);

struct RotationEstimate {
    double value = 0.0;
    long iterates_used = 0;
    double error_bound = 0.0;
    std::optional<std::pair<long, long>> exact_rational;  // (p, q) for a detected periodic seed
    bool recurrent = false;
    bool periodic = false;
};

/// Birkhoff average of lift displacement sampled at recurrence times, with
/// plain-average fallback flagged non-recurrent.
RotationEstimate rotation_number(const LiftedAnnulusMap& map, const AnnulusPoint& seed,
                                 long max_iter, double recurrence_eps,
                                 long period_cap = 4096, double periodic_tol = 1e-9);

struct BoundaryWindow {
    std::optional<FractionWindow> window;  // absent when degenerate
    bool degenerate = false;
    double rho_bottom = 0.0;  // rotation number at y = 0
    double rho_top = 0.0;     // rotation number at y = 1
};

/// Rotation numbers of the two boundary circles, as an ordered window.
/// Throws for open-annulus families.
BoundaryWindow boundary_rotation_numbers(const LiftedAnnulusMap& map);

}  // namespace annulab

#endif
