#include <cmath>
#include <random>

#include "annulab/so3.hpp"
#include "doctest.h"

using namespace annulab;

namespace {

double mat_diff(const Rotation3& a, const Rotation3& b) {
    double worst = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) worst = std::max(worst, std::fabs(a.m[i][j] - b.m[i][j]));
    return worst;
}

SpherePoint3 random_point(std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    return SpherePoint3({g(rng), g(rng)}, {g(rng), g(rng)});
}

}  // namespace

TEST_CASE("the identity of SU(2) covers the identity rotation exactly") {
    Rotation3 r = cover_pi(SpherePoint3());
    CHECK(mat_diff(r, Rotation3::identity()) == 0.0);
}

TEST_CASE("quarter turn: (i, 0) covers diag(-1,-1,1)") {
    SpherePoint3 x({0.0, 1.0}, {0.0, 0.0});
    Rotation3 r = cover_pi(x);
    Rotation3 expect;
    expect.m = {{{-1, 0, 0}, {0, -1, 0}, {0, 0, 1}}};
    CHECK(mat_diff(r, expect) < 1e-15);
}

TEST_CASE("antipodal points cover the same rotation") {
    std::mt19937_64 rng(23);
    for (int i = 0; i < 200; ++i) {
        auto x = random_point(rng);
        CHECK(mat_diff(cover_pi(x), cover_pi(x.antipode())) < 1e-14);
    }
}

TEST_CASE("covering map is a homomorphism onto rotations") {
    std::mt19937_64 rng(29);
    for (int i = 0; i < 200; ++i) {
        auto x = random_point(rng), y = random_point(rng);
        // matrix order: pi(U_x U_y) = pi(y) pi(x) under the chosen action
        Rotation3 lhs = cover_pi(su2_product(x, y));
        Rotation3 rhs = cover_pi(y) * cover_pi(x);
        CHECK(mat_diff(lhs, rhs) < 1e-13);
    }
}

TEST_CASE("conjugation action agrees with the covering rotation") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        auto x = random_point(rng);
        TracelessHermitian m{g(rng), g(rng), g(rng)};
        TracelessHermitian via_su2 = conjugation_action(x, m);
        auto via_rot = cover_pi(x) * std::array<double, 3>{m.a, m.b, m.c};
        CHECK(std::fabs(via_su2.a - via_rot[0]) < 1e-13);
        CHECK(std::fabs(via_su2.b - via_rot[1]) < 1e-13);
        CHECK(std::fabs(via_su2.c - via_rot[2]) < 1e-13);
        // conjugation by a unitary preserves the Pauli norm
        CHECK(via_su2.norm() == doctest::Approx(m.norm()).epsilon(1e-12));
    }
}

TEST_CASE("z4 lift squares to the antipode and covers frame_antipodal") {
    std::mt19937_64 rng(37);
    for (int i = 0; i < 200; ++i) {
        auto x = random_point(rng);
        auto lx = z4_lift(x);
        auto llx = z4_lift(lx);
        CHECK(std::abs(llx.z1 - x.antipode().z1) < 1e-15);
        CHECK(std::abs(llx.z2 - x.antipode().z2) < 1e-15);
        CHECK(mat_diff(cover_pi(lx), frame_antipodal(cover_pi(x))) < 1e-13);
    }
}

TEST_CASE("preimage round trip recovers the rotation") {
    std::mt19937_64 rng(41);
    for (int i = 0; i < 200; ++i) {
        Rotation3 r = cover_pi(random_point(rng));
        SpherePoint3 z = cover_preimage(r);
        CHECK(mat_diff(cover_pi(z), r) < 1e-9);
    }
}

TEST_CASE("axis-angle rotations are orthogonal with determinant one") {
    std::mt19937_64 rng(43);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> ang(-6.4, 6.4);
    for (int i = 0; i < 100; ++i) {
        Rotation3 r = axis_angle_rotation({g(rng), g(rng), g(rng)}, ang(rng));
        CHECK(r.orthogonality_residual() < 1e-14);
        CHECK(r.det() == doctest::Approx(1.0).epsilon(1e-13));
    }
}

TEST_CASE("randomized battery passes at tight tolerance") {
    auto rep = so3_check(500, 12345);
    CHECK(rep.identity_residual == 0.0);
    CHECK(rep.pass(1e-12));
    CHECK(rep.samples == 500);
    // deterministic for a fixed seed
    auto rep2 = so3_check(500, 12345);
    CHECK(rep.homomorphism_worst == rep2.homomorphism_worst);
}
