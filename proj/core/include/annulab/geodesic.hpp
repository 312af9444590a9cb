#ifndef ANNULAB_GEODESIC_HPP
#define ANNULAB_GEODESIC_HPP

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "annulab/annulus.hpp"
#include "annulab/orbit_search.hpp"

namespace annulab {

using Vec3 = std::array<double, 3>;

Vec3 operator+(const Vec3& a, const Vec3& b);
Vec3 operator-(const Vec3& a, const Vec3& b);
Vec3 operator*(double s, const Vec3& a);
double dot(const Vec3& a, const Vec3& b);
Vec3 cross(const Vec3& a, const Vec3& b);
double norm(const Vec3& a);
Vec3 normalized(const Vec3& a);

/// Antipodally symmetric conformal factor e^{2u} sampled on a spherical
/// (longitude x colatitude) grid; evaluated by Catmull-Rom interpolation,
/// symmetrized so that u(q) = u(-q) exactly.
class ConformalFactor {
public:
    ConformalFactor(int n_phi, int n_theta, std::vector<double> samples);
    static ConformalFactor from_file(const std::string& path);

    double u(const Vec3& direction) const;
    Vec3 grad_u(const Vec3& q) const;  // ambient gradient by central differences

private:
    int n_phi_, n_theta_;
    std::vector<double> grid_;  // row-major, theta rows of n_phi values
    double at(int ip, int it) const;
};

/// Triaxial ellipsoid x^2/a^2 + y^2/b^2 + z^2/c^2 = 1 with 0 < a <= b <= c,
/// optionally rescaled by an antipodally symmetric conformal factor.
/// Gaussian curvature is positive and q -> -q is an isometry.
class EllipsoidMetric {
public:
    EllipsoidMetric(double a, double b, double c,
                    std::shared_ptr<const ConformalFactor> conformal = nullptr);

    double a() const { return a_; }
    double b() const { return b_; }
    double c() const { return c_; }
    bool conformal() const { return static_cast<bool>(conformal_); }

    double constraint(const Vec3& q) const;       // G(q)
    Vec3 constraint_grad(const Vec3& q) const;    // grad G
    double constraint_hess_quad(const Vec3& v) const;  // v^T Hess(G) v

    double u(const Vec3& q) const;       // conformal exponent (0 if none)
    Vec3 grad_u(const Vec3& q) const;

    /// Gaussian curvature of the plain embedded ellipsoid. Throws for
    /// conformal metrics (the census path does not need it there).
    double gaussian_curvature(const Vec3& q) const;

    /// Project q onto the surface along grad G and v onto the tangent plane.
    void project(Vec3& q, Vec3& v) const;

    double speed(const Vec3& q, const Vec3& v) const;  // |v|_g = e^u |v|
    double energy(const Vec3& q, const Vec3& v) const; // H = 1/2 |v|_g^2

    Vec3 surface_point(double phi, double theta_colat) const;

private:
    double a_, b_, c_;
    std::shared_ptr<const ConformalFactor> conformal_;
};

/// Point of the unit tangent bundle over the constraint surface.
struct TangentState {
    Vec3 q{};
    Vec3 v{};
};

TangentState antipodal_pushforward(const TangentState& x);

struct FlowOptions {
    double rtol = 1e-12;
    double atol = 1e-13;
    double max_step = 0.05;
    double initial_step = 1e-3;
};

/// Constrained geodesic flow for time t (adaptive Dormand-Prince with
/// per-step constraint projection). Throws on step-size underflow.
TangentState geodesic_flow(const EllipsoidMetric& metric, const TangentState& state, double t,
                           const FlowOptions& opts = {});

/// Arclength-parameterized closed geodesic, periodic cubic splines through
/// dense flow samples.
class ClosedGeodesic {
public:
    ClosedGeodesic(std::vector<double> s, std::vector<Vec3> q, std::vector<Vec3> v,
                   double length);

    double length() const { return length_; }
    Vec3 point(double s) const;
    Vec3 velocity(double s) const;       // g-unit tangent
    Vec3 unit_tangent(double s) const;   // Euclidean-unit tangent
    /// Euclidean-unit vector to the left of the tangent in the surface.
    Vec3 left_normal(const EllipsoidMetric& metric, double s) const;

    /// Parameter of the sample nearest to q, refined by golden-section.
    double nearest_parameter(const Vec3& q) const;

    double wrap(double s) const;
    int sample_count() const { return static_cast<int>(s_.size()); }
    const std::vector<double>& sample_parameters() const { return s_; }

private:
    std::vector<double> s_;
    std::vector<Vec3> q_, v_;
    std::array<std::vector<double>, 3> q_c_, v_c_;  // per-coordinate sample columns
    std::array<std::vector<double>, 3> q_m_, v_m_;  // periodic spline moments
    double length_;
    Vec3 eval(const std::array<std::vector<double>, 3>& cols,
              const std::array<std::vector<double>, 3>& moms, double s) const;
};

struct ShortestGeodesicReport {
    ClosedGeodesic curve;
    double length;
    double shooting_residual;  // closure defect of the refined half orbit
    bool simple;               // discrete self-intersection test
    int initialization;        // index of the winning principal-ellipse start
};

/// Shortest antipodally-equivariant closed geodesic: discrete equivariant
/// loop shortening from the three principal-ellipse initializations,
/// polished by a Gauss-Newton shooting solve of q(T) = -q(0), v(T) = -v(0).
ShortestGeodesicReport shortest_noncontractible(const EllipsoidMetric& metric,
                                                int loop_resolution = 256, double tol = 1e-10);

/// Point of the Birkhoff section: arclength s along the curve (mod delta)
/// and angle theta in [0, pi] from the curve tangent.
struct SectionPoint {
    double s = 0.0;
    double theta = 0.0;
};

struct ReturnRecord {
    SectionPoint start;
    SectionPoint end;        // f(start) = pullback of psi(start) by the involution
    SectionPoint psi_raw;    // psi(start) in the h*(Sigma) chart (angle in (-pi,0))
    TangentState end_state;  // state at the crossing, before pullback
    double flight_time = 0.0;
    double geodesic_length = 0.0;
    int crossings = 1;
};

struct ConjugatePointRecord {
    double s0 = 0.0;
    double conjugate_distance = 0.0;  // arclength to the first Jacobi zero
    double half_period_gap = 0.0;     // conjugate_distance - delta/2
    SectionPoint f_image;             // boundary image of f at theta = 0
};

/// Everything derived from one metric: the section curve, flight-time
/// bounds, and the boundary twist of the half-return map.
class GeodesicLab {
public:
    GeodesicLab(EllipsoidMetric metric, int loop_resolution = 256, double curve_tol = 1e-10,
                FlowOptions flow = {});

    const EllipsoidMetric& metric() const { return metric_; }
    const ClosedGeodesic& curve() const { return *curve_; }
    double delta() const { return curve_->length(); }
    const ShortestGeodesicReport& curve_report() const { return *curve_report_; }

    TangentState section_to_state(const SectionPoint& x) const;
    /// Inverse chart; throws if the state is not based on the curve within tol.
    SectionPoint state_to_section(const TangentState& x, double base_tol = 1e-6) const;
    /// Signed side of the curve the base point lies on (+1 left, -1 right).
    double signed_side(const Vec3& q) const;

    /// First arrival in h*(Sigma \ boundary); throws if no crossing occurs
    /// before the global time bound (would contradict the global surface of
    /// section property).
    ReturnRecord half_return(const SectionPoint& x) const;
    /// Backward variant: previous crossing arriving from Sigma.
    ReturnRecord half_return_backward(const SectionPoint& x) const;

    SectionPoint section_map(const SectionPoint& x) const;          // f = h*^-1 o psi
    SectionPoint section_map_inverse(const SectionPoint& x) const;  // f^-1

    /// Jacobi equation J'' + K J = 0 along the curve from s0; first zero and
    /// its offset from the half period. Plain ellipsoid metrics only.
    ConjugatePointRecord boundary_extension(double s0) const;

    /// Boundary rotation numbers of f in annulus units; at theta = 0 this is
    /// the rotation number of s -> s + (conjugate distance) - delta/2.
    double boundary_twist() const { return boundary_twist_; }
    double boundary_twist_top() const { return rho_top_; }

    double flight_time_lower() const { return t_lo_; }
    double flight_time_upper() const { return t_hi_; }
    double max_flight_time_bound() const { return t_guard_; }

    /// f as a lifted annulus map, x = s/delta, y = theta/pi. The lift picks
    /// the displacement branch nearest to zero; valid while the boundary
    /// twist stays below 1/2. The returned map views this lab: keep the lab
    /// alive while the map is in use.
    MapPtr annulus_map() const;

private:
    struct BoundaryModel;

    EllipsoidMetric metric_;
    std::shared_ptr<const ClosedGeodesic> curve_;
    std::shared_ptr<const ShortestGeodesicReport> curve_report_;
    FlowOptions flow_;
    std::shared_ptr<const BoundaryModel> boundary_;
    double boundary_twist_ = 0.0;
    double rho_top_ = 0.0;
    double t_lo_ = 0.0, t_hi_ = 0.0, t_guard_ = 0.0;

    void estimate_flight_band();
    TangentState cross_curve(const TangentState& start, int direction, double* time_out) const;
    friend class SectionAnnulusMap;
};

/// omega-induced measure of a chart rectangle: (s2-s1)(cos t1 - cos t2).
double section_rectangle_measure(double s1, double s2, double theta1, double theta2);

struct AreaCheckResult {
    double measure_in = 0.0;
    double measure_out = 0.0;
    double rel_error = 0.0;
    double mc_std_error = 0.0;
};

/// Monte Carlo check that f preserves the sin(theta) ds dtheta measure of a
/// rectangle: the boundary is mapped forward and the image measure sampled.
AreaCheckResult area_preservation_check(const GeodesicLab& lab, double s1, double s2,
                                        double theta1, double theta2, int boundary_points,
                                        int mc_samples, unsigned long long seed);

struct GeodesicCensusEntry {
    long p = 0;
    int q = 0;  // odd prime period
    double length = 0.0;
    double closure_error = 0.0;
    bool non_isolated = false;
    SectionPoint representative;
};

struct GeodesicCensus {
    std::vector<GeodesicCensusEntry> entries;  // sorted by length
    std::vector<std::pair<double, std::uint64_t>> N_of_l;  // step function
    GrowthFit fit;
    double l_fit_min = 0.0;
    bool complete = true;
    std::vector<std::pair<long, int>> missing;
    std::vector<std::pair<long, int>> non_closing;
};

/// Census of odd prime-period orbits of f with period <= q_max_odd; each
/// orbit is reconstructed as a closed geodesic on the projective plane and
/// kept only if the reconstruction closes within closure_tol.
GeodesicCensus geodesic_census(const GeodesicLab& lab, int q_max_odd,
                               const SolverParams& params, double closure_tol = 1e-6,
                               double l_fit_min = 0.0);

}  // namespace annulab

#endif
