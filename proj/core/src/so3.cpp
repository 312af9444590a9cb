#include "annulab/so3.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace annulab {

namespace {
using cplx = std::complex<double>;
}

SpherePoint3::SpherePoint3(cplx a, cplx b) : z1(a), z2(b) {
    double n = std::sqrt(std::norm(z1) + std::norm(z2));
    if (n == 0.0) throw std::invalid_argument("SpherePoint3: zero vector");
    z1 /= n;
    z2 /= n;
}

Rotation3 Rotation3::identity() {
    Rotation3 r;
    for (int i = 0; i < 3; ++i) r.m[i][i] = 1.0;
    return r;
}

Rotation3 Rotation3::operator*(const Rotation3& o) const {
    Rotation3 r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k) s += m[i][k] * o.m[k][j];
            r.m[i][j] = s;
        }
    return r;
}

std::array<double, 3> Rotation3::operator*(const std::array<double, 3>& v) const {
    std::array<double, 3> r{};
    for (int i = 0; i < 3; ++i)
        r[i] = m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2];
    return r;
}

double Rotation3::orthogonality_residual() const {
    double worst = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k) s += m[k][i] * m[k][j];
            worst = std::max(worst, std::abs(s - (i == j ? 1.0 : 0.0)));
        }
    return worst;
}

double Rotation3::det() const {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

double TracelessHermitian::neg_det() const { return a * a + b * b + c * c; }
double TracelessHermitian::norm() const { return std::sqrt(neg_det()); }

Rotation3 cover_pi(const SpherePoint3& x) {
    const cplx z1 = x.z1, z2 = x.z2;
    const cplx z1sq = z1 * z1;
    const cplx z2csq = std::conj(z2) * std::conj(z2);
    const cplx z1z2c = z1 * std::conj(z2);
    const cplx z1z2 = z1 * z2;
    Rotation3 r;
    r.m[0][0] = std::real(z1sq - z2csq);
    r.m[0][1] = -std::imag(z1sq + z2csq);
    r.m[0][2] = 2.0 * std::real(z1z2c);
    r.m[1][0] = std::imag(z1sq - z2csq);
    r.m[1][1] = std::real(z1sq + z2csq);
    r.m[1][2] = 2.0 * std::imag(z1z2c);
    r.m[2][0] = -2.0 * std::real(z1z2);
    r.m[2][1] = 2.0 * std::imag(z1z2);
    r.m[2][2] = std::norm(z1) - std::norm(z2);
    return r;
}

TracelessHermitian conjugation_action(const SpherePoint3& x, const TracelessHermitian& mh) {
    // M = [[c, a - ib], [a + ib, -c]], U = [[z1, z2], [-conj(z2), conj(z1)]]
    const cplx z1 = x.z1, z2 = x.z2;
    const cplx u00 = z1, u01 = z2, u10 = -std::conj(z2), u11 = std::conj(z1);
    const cplx m00(mh.c, 0.0), m01(mh.a, -mh.b), m10(mh.a, mh.b), m11(-mh.c, 0.0);
    // T = M U
    const cplx t00 = m00 * u00 + m01 * u10;
    const cplx t01 = m00 * u01 + m01 * u11;
    const cplx t10 = m10 * u00 + m11 * u10;
    const cplx t11 = m10 * u01 + m11 * u11;
    // R = U* T
    const cplx r00 = std::conj(u00) * t00 + std::conj(u10) * t10;
    const cplx r01 = std::conj(u00) * t01 + std::conj(u10) * t11;
    TracelessHermitian out;
    out.c = std::real(r00);
    out.a = std::real(r01);
    out.b = -std::imag(r01);
    return out;
}

SpherePoint3 su2_product(const SpherePoint3& x, const SpherePoint3& y) {
    // matrix product U_x * U_y in the [[z1, z2], [-conj(z2), conj(z1)]] form
    cplx p1 = x.z1 * y.z1 - x.z2 * std::conj(y.z2);
    cplx p2 = x.z1 * y.z2 + x.z2 * std::conj(y.z1);
    return SpherePoint3(p1, p2);
}

SpherePoint3 z4_lift(const SpherePoint3& x) {
    const cplx i(0.0, 1.0);
    SpherePoint3 y;
    y.z1 = i * x.z1;
    y.z2 = i * x.z2;
    return y;
}

Rotation3 frame_antipodal(const Rotation3& r) {
    Rotation3 out = r;
    for (int i = 0; i < 3; ++i) {
        out.m[i][0] = -r.m[i][0];
        out.m[i][1] = -r.m[i][1];
    }
    return out;
}

SpherePoint3 cover_preimage(const Rotation3& r) {
    // From the covering matrix: z1^2, conj(z2)^2 and the cross products are
    // linear in the entries; pick the square root branch on the larger
    // magnitude coordinate (decided by the [2][2] entry).
    const cplx z1sq(0.5 * (r.m[0][0] + r.m[1][1]), 0.5 * (r.m[1][0] - r.m[0][1]));
    const cplx z2csq(0.5 * (r.m[1][1] - r.m[0][0]), -0.5 * (r.m[0][1] + r.m[1][0]));
    const cplx z1z2c(0.5 * r.m[0][2], 0.5 * r.m[1][2]);
    const cplx z1z2(-0.5 * r.m[2][0], 0.5 * r.m[2][1]);
    SpherePoint3 out;
    if (r.m[2][2] >= 0.0) {  // |z1| >= |z2|
        cplx z1 = std::sqrt(z1sq);
        cplx z2 = (std::abs(z1) > 0.0) ? std::conj(z1z2c / z1) : cplx(0.0, 0.0);
        out = SpherePoint3(z1, z2);
    } else {
        cplx z2 = std::conj(std::sqrt(z2csq));
        cplx z1 = (std::abs(z2) > 0.0) ? z1z2 / z2 : cplx(0.0, 0.0);
        out = SpherePoint3(z1, z2);
    }
    return out;
}

Rotation3 axis_angle_rotation(const std::array<double, 3>& axis, double angle) {
    double n = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
    if (n == 0.0) throw std::invalid_argument("axis_angle_rotation: zero axis");
    double x = axis[0] / n, y = axis[1] / n, z = axis[2] / n;
    double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
    Rotation3 r;
    r.m = {{{t * x * x + c, t * x * y - s * z, t * x * z + s * y},
            {t * x * y + s * z, t * y * y + c, t * y * z - s * x},
            {t * x * z - s * y, t * y * z + s * x, t * z * z + c}}};
    return r;
}

namespace {

double mat_dist(const Rotation3& a, const Rotation3& b) {
    double worst = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            worst = std::max(worst, std::abs(a.m[i][j] - b.m[i][j]));
    return worst;
}

SpherePoint3 random_sphere_point(std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    return SpherePoint3(cplx(g(rng), g(rng)), cplx(g(rng), g(rng)));
}

}  // namespace

bool So3CheckReport::pass(double tol_main, double tol_preimage) const {
    return identity_residual <= tol_main && orthogonality_worst <= tol_main &&
           det_worst <= tol_main && two_to_one_worst <= tol_main &&
           homomorphism_worst <= tol_main && isometry_worst <= tol_main &&
           conjugation_consistency_worst <= tol_main && z4_equivariance_worst <= tol_main &&
           preimage_roundtrip_worst <= tol_preimage;
}

So3CheckReport so3_check(int samples, unsigned long long seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> ang(-3.1, 3.1);
    So3CheckReport rep;
    rep.samples = samples;
    rep.identity_residual = mat_dist(cover_pi(SpherePoint3(cplx(1, 0), cplx(0, 0))),
                                     Rotation3::identity());
    for (int i = 0; i < samples; ++i) {
        SpherePoint3 x = random_sphere_point(rng);
        SpherePoint3 y = random_sphere_point(rng);
        Rotation3 rx = cover_pi(x);
        rep.orthogonality_worst = std::max(rep.orthogonality_worst, rx.orthogonality_residual());
        rep.det_worst = std::max(rep.det_worst, std::abs(rx.det() - 1.0));
        rep.two_to_one_worst = std::max(rep.two_to_one_worst, mat_dist(rx, cover_pi(x.antipode())));

        // homomorphism up to the conjugation convention: M -> U* M U acts on
        // the right, so cover_pi(U_x U_y) = cover_pi(y) * cover_pi(x)
        SpherePoint3 xy = su2_product(x, y);
        rep.homomorphism_worst = std::max(
            rep.homomorphism_worst, mat_dist(cover_pi(xy), cover_pi(y) * rx));

        TracelessHermitian mh{g(rng), g(rng), g(rng)};
        TracelessHermitian conj = conjugation_action(x, mh);
        rep.isometry_worst = std::max(rep.isometry_worst, std::abs(conj.norm() - mh.norm()));
        auto rotated = rx * std::array<double, 3>{mh.a, mh.b, mh.c};
        double cc = std::max({std::abs(rotated[0] - conj.a), std::abs(rotated[1] - conj.b),
                              std::abs(rotated[2] - conj.c)});
        rep.conjugation_consistency_worst = std::max(rep.conjugation_consistency_worst, cc);

        rep.z4_equivariance_worst = std::max(
            rep.z4_equivariance_worst, mat_dist(cover_pi(z4_lift(x)), frame_antipodal(rx)));

        Rotation3 rr = axis_angle_rotation({g(rng), g(rng), g(rng)}, ang(rng));
        rep.preimage_roundtrip_worst =
            std::max(rep.preimage_roundtrip_worst, mat_dist(cover_pi(cover_preimage(rr)), rr));
    }
    return rep;
}

}  // namespace annulab
