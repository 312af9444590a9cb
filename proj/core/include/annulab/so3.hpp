#ifndef ANNULAB_SO3_HPP
#define ANNULAB_SO3_HPP

#include <array>
#include <complex>

namespace annulab {

/// Point of the unit 3-sphere, |z1|^2 + |z2|^2 = 1 (renormalized on
/// construction). Identified with SU(2) via [[z1, z2], [-conj(z2), conj(z1)]].
struct SpherePoint3 {
    std::complex<double> z1{1.0, 0.0};
    std::complex<double> z2{0.0, 0.0};

    SpherePoint3() = default;
    SpherePoint3(std::complex<double> a, std::complex<double> b);

    SpherePoint3 antipode() const { return SpherePoint3(-z1, -z2); }
};

/// 3x3 rotation matrix, row-major.
struct Rotation3 {
    std::array<std::array<double, 3>, 3> m{};

    static Rotation3 identity();
    Rotation3 operator*(const Rotation3& other) const;
    std::array<double, 3> operator*(const std::array<double, 3>& v) const;

    double orthogonality_residual() const;  // max-norm of R^T R - I
    double det() const;
};

/// Traceless Hermitian 2x2 matrix in Pauli coordinates (a, b, c);
/// M = a*sigma1 + b*sigma2 + c*sigma3, norm sqrt(-det M) = |(a,b,c)|.
struct TracelessHermitian {
    double a = 0.0, b = 0.0, c = 0.0;

    double norm() const;
    double neg_det() const;  // -det M = a^2 + b^2 + c^2
};

/// The 2-to-1 covering S^3 -> SO(3): the explicit matrix of Re/Im
/// combinations of z1, z2. Satisfies cover_pi(-x) == cover_pi(x).
Rotation3 cover_pi(const SpherePoint3& x);

/// Pauli coordinates of U* M U for U the SU(2) element of x.
/// Equals cover_pi(x) applied to (a, b, c).
TracelessHermitian conjugation_action(const SpherePoint3& x, const TracelessHermitian& m);

/// SU(2) matrix product of the two points' matrices.
SpherePoint3 su2_product(const SpherePoint3& x, const SpherePoint3& y);

/// (z1, z2) -> (i z1, i z2); order-4, fixed-point free, a lift of the
/// antipodal pushforward on SO(3) frames.
SpherePoint3 z4_lift(const SpherePoint3& x);

/// Frame map [q, u, q x u] -> [-q, -u, q x u]: negates the first two columns.
Rotation3 frame_antipodal(const Rotation3& r);

/// One of the two preimages {z, -z} of a rotation under cover_pi, extracted
/// algebraically with the branch chosen by the larger of |z1|, |z2|.
SpherePoint3 cover_preimage(const Rotation3& r);

/// Rotation by `angle` about a (not necessarily unit) axis.
Rotation3 axis_angle_rotation(const std::array<double, 3>& axis, double angle);

struct So3CheckReport {
    double identity_residual = 0.0;
    double orthogonality_worst = 0.0;
    double det_worst = 0.0;
    double two_to_one_worst = 0.0;
    double homomorphism_worst = 0.0;
    double isometry_worst = 0.0;
    double conjugation_consistency_worst = 0.0;
    double z4_equivariance_worst = 0.0;
    double preimage_roundtrip_worst = 0.0;
    int samples = 0;
    bool pass(double tol_main = 1e-12, double tol_preimage = 1e-10) const;
};

/// Full randomized property battery over `samples` draws.
So3CheckReport so3_check(int samples, unsigned long long seed);

}  // namespace annulab

#endif
