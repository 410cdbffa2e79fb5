#include <doctest.h>
#include <stdexcept>

#include <cmath>

#include "bindelta/rng.hpp"
#include "bindelta/so3.hpp"
#include "oracles.hpp"

using namespace bindelta;
using oracles::max_abs_diff;

namespace {
const double kPi = so3::kPi;
}

TEST_SUITE_BEGIN("so3");

TEST_CASE("exp_map identity and quarter turn") {
    CHECK(max_abs_diff(so3::exp_map({0, 0, 0}).m, Mat3::identity()) == 0.0);

    Mat3 quarter;
    quarter.m = {{{0, -1, 0}, {1, 0, 0}, {0, 0, 1}}};
    CHECK(max_abs_diff(so3::exp_map({0, 0, kPi / 2}).m, quarter) < 1e-15);
}

TEST_CASE("exp_map matches the quaternion oracle") {
    const Vec3 y{0.3, -0.4, 0.5};
    const Mat3 expect = oracles::quat_to_matrix(oracles::quat_from_axis_angle(y));
    CHECK(max_abs_diff(so3::exp_map(y).m, expect) < 1e-12);

    Rng rng(21);
    for (int i = 0; i < 200; ++i) {
        const Vec3 v = oracles::random_axis_angle(rng, kPi);
        const Mat3 e = oracles::quat_to_matrix(oracles::quat_from_axis_angle(v));
        CHECK(max_abs_diff(so3::exp_map(v).m, e) < 1e-12);
    }
}

TEST_CASE("exp_map rejects non-finite input") {
    CHECK_THROWS_AS(so3::exp_map({std::nan(""), 0, 0}), std::invalid_argument);
    CHECK_THROWS_AS((void)so3::exp_map({0, INFINITY, 0}), std::invalid_argument);
}

TEST_CASE("log_map identity and quarter turn") {
    CHECK(norm(so3::log_map(RotationMatrix{Mat3::identity()})) == 0.0);
    Mat3 quarter;
    quarter.m = {{{0, -1, 0}, {1, 0, 0}, {0, 0, 1}}};
    CHECK(max_abs_diff(so3::log_map(RotationMatrix{quarter}), Vec3{0, 0, kPi / 2}) < 1e-12);
}

TEST_CASE("log_map near pi matches the quaternion oracle") {
    const double theta = kPi - 1e-6;
    const Vec3 y{theta, 0, 0};
    const RotationMatrix r = so3::exp_map(y);
    const Vec3 back = so3::log_map(r);
    CHECK(std::abs(norm(back) - theta) < 1e-6);
    CHECK(std::abs(std::abs(back.x) - theta) < 1e-6); // axis is +-x
    const Vec3 via_quat = oracles::quat_to_axis_angle(oracles::quat_from_axis_angle(y));
    CHECK(max_abs_diff(back, via_quat) < 1e-9);

    // random axes through the symmetric-part branch
    Rng rng(22);
    for (int i = 0; i < 300; ++i) {
        Vec3 axis = oracles::random_axis_angle(rng, 1.0);
        const double n = norm(axis);
        if (n == 0.0) continue;
        axis = axis * (1.0 / n);
        const double t = kPi - 1e-6 - rng.uniform() * 1e-4;
        const Vec3 v = axis * t;
        CHECK(max_abs_diff(so3::log_map(so3::exp_map(v)), v) < 1e-9);
    }
}

TEST_CASE("log_map at exactly pi resolves the sign deterministically") {
    const Vec3 y{0, kPi, 0};
    const Vec3 back = so3::log_map(so3::exp_map(y));
    CHECK(std::abs(norm(back) - kPi) < 1e-9);
    // either y or -y is valid; the reported representative is fixed
    const bool matches = max_abs_diff(back, y) < 1e-9 || max_abs_diff(back, -y) < 1e-9;
    CHECK(matches);
    CHECK(max_abs_diff(so3::log_map(so3::exp_map(back)), back) < 1e-9);
}

TEST_CASE("RotationMatrix validates orthonormality") {
    Mat3 bad = Mat3::identity();
    bad.m[0][0] = 1.0 + 1e-6;
    CHECK_THROWS_AS(RotationMatrix::from_matrix(bad), std::invalid_argument);
    CHECK_NOTHROW(RotationMatrix::from_matrix(bad, /*renormalize=*/true));

    Mat3 reflection = Mat3::identity();
    reflection.m[2][2] = -1.0;
    CHECK_THROWS_AS(RotationMatrix::from_matrix(reflection), std::invalid_argument);
}

TEST_CASE("exp of log reproduces the rotation matrix") {
    Rng rng(230);
    for (int i = 0; i < 2000; ++i) {
        const RotationMatrix r = so3::sample_uniform_rotation(rng);
        CHECK(max_abs_diff(so3::exp_map(so3::log_map(r)).m, r.m) <= 1e-9);
    }
}

TEST_CASE("roundtrip property over the open ball") {
    Rng rng(23);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const Vec3 y = oracles::random_axis_angle(rng, kPi - 1e-3);
        worst = std::max(worst, max_abs_diff(so3::log_map(so3::exp_map(y)), y));
    }
    CHECK(worst <= 1e-9);
}

TEST_CASE("geodesic distance basics") {
    Rng rng(24);
    const RotationMatrix r = so3::sample_uniform_rotation(rng);
    CHECK(so3::geodesic_distance(r, r) == 0.0);
    for (double theta : {0.1, 0.5, 1.5, 2.8, 3.1}) {
        const RotationMatrix rz = so3::exp_map({0, 0, theta});
        CHECK(std::abs(so3::geodesic_distance(RotationMatrix{Mat3::identity()}, rz) - theta) <
              1e-12);
    }
}

TEST_CASE("geodesic distance equals the log-norm route") {
    Rng rng(25);
    for (int i = 0; i < 2000; ++i) {
        const RotationMatrix r1 = so3::sample_uniform_rotation(rng);
        const RotationMatrix r2 = so3::sample_uniform_rotation(rng);
        const double d = so3::geodesic_distance(r1, r2);
        // (1/sqrt 2) * Frobenius norm of the skew log matrix
        const Vec3 y = so3::log_map(RotationMatrix{r1.m.transpose() * r2.m});
        const Mat3 skew = so3::skew(y);
        double fro = 0.0;
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) fro += skew.m[a][b] * skew.m[a][b];
        CHECK(std::abs(d - std::sqrt(fro) / std::sqrt(2.0)) <= 1e-7);
        // and the fully independent quaternion route
        CHECK(std::abs(d - oracles::quat_geodesic(so3::log_map(r1), so3::log_map(r2))) <= 1e-7);
    }
}

TEST_CASE("geodesic distance is bi-invariant and symmetric") {
    Rng rng(26);
    for (int i = 0; i < 1000; ++i) {
        const RotationMatrix r1 = so3::sample_uniform_rotation(rng);
        const RotationMatrix r2 = so3::sample_uniform_rotation(rng);
        const RotationMatrix q = so3::sample_uniform_rotation(rng);
        const double d = so3::geodesic_distance(r1, r2);
        CHECK(std::abs(so3::geodesic_distance(r2, r1) - d) <= 1e-9);
        CHECK(std::abs(so3::geodesic_distance(RotationMatrix{q.m * r1.m},
                                              RotationMatrix{q.m * r2.m}) -
                       d) <= 1e-9);
    }
}

TEST_CASE("triangle inequality on random triples") {
    Rng rng(27);
    for (int i = 0; i < 10000; ++i) {
        const RotationMatrix a = so3::sample_uniform_rotation(rng);
        const RotationMatrix b = so3::sample_uniform_rotation(rng);
        const RotationMatrix c = so3::sample_uniform_rotation(rng);
        CHECK(so3::geodesic_distance(a, c) <=
              so3::geodesic_distance(a, b) + so3::geodesic_distance(b, c) + 1e-9);
    }
}

TEST_CASE("exp_jacobian identity at zero and finite-difference consistency") {
    CHECK(max_abs_diff(so3::exp_jacobian({0, 0, 0}), Mat3::identity()) == 0.0);

    Rng rng(28);
    const double h = 1e-6;
    for (int i = 0; i < 500; ++i) {
        const Vec3 y = oracles::random_axis_angle(rng, kPi - 1e-2);
        Vec3 dir = oracles::random_axis_angle(rng, 1.0);
        const double dn = norm(dir);
        if (dn == 0.0) continue;
        dir = dir * (1.0 / dn);
        const Mat3 rel = so3::exp_map(y).m.transpose() * so3::exp_map(y + dir * h).m;
        const Vec3 fd = so3::log_map(RotationMatrix{rel}) * (1.0 / h);
        const Vec3 pred = so3::exp_jacobian(y) * dir;
        CHECK(norm(fd - pred) / std::max(1.0, norm(pred)) <= 1e-5);
    }
}

TEST_CASE("exp_jacobian columns match the numerical Jacobian at (0,0,1)") {
    const Vec3 y{0, 0, 1};
    const Mat3 jr = so3::exp_jacobian(y);
    const double h = 1e-6;
    for (int j = 0; j < 3; ++j) {
        Vec3 e{0, 0, 0};
        e[j] = 1.0;
        const Vec3 col_p =
            so3::log_map(RotationMatrix{so3::exp_map(y).m.transpose() * so3::exp_map(y + e * h).m});
        const Vec3 col_m =
            so3::log_map(RotationMatrix{so3::exp_map(y).m.transpose() * so3::exp_map(y - e * h).m});
        const Vec3 col = (col_p - col_m) * (1.0 / (2.0 * h));
        for (int i = 0; i < 3; ++i) CHECK(std::abs(col[i] - jr.m[i][j]) < 1e-6);
    }
}

TEST_CASE("canonicalize") {
    CHECK(max_abs_diff(so3::canonicalize({0, 0, 0.5}), Vec3{0, 0, 0.5}) < 1e-12);
    CHECK(max_abs_diff(so3::canonicalize({0, 0, 3 * kPi / 2}), Vec3{0, 0, -kPi / 2}) < 1e-9);
    CHECK(norm(so3::canonicalize({0, 0, 2 * kPi})) < 1e-9);

    Rng rng(29);
    for (int i = 0; i < 300; ++i) {
        const Vec3 y = oracles::random_axis_angle(rng, 6.0);
        const Vec3 c = so3::canonicalize(y);
        CHECK(norm(c) <= kPi + 1e-12);
        CHECK(max_abs_diff(so3::canonicalize(c), c) < 1e-9); // idempotent
        CHECK(max_abs_diff(so3::exp_map(c).m, so3::exp_map(y).m) < 1e-9); // same rotation
    }
}

TEST_CASE("sample_uniform_rotation is deterministic and non-repeating") {
    Rng a(42), b(42);
    const RotationMatrix r1 = so3::sample_uniform_rotation(a);
    const RotationMatrix r2 = so3::sample_uniform_rotation(a);
    CHECK(max_abs_diff(r1.m, r2.m) > 1e-3);
    CHECK(max_abs_diff(so3::sample_uniform_rotation(b).m, r1.m) == 0.0);
    CHECK(max_abs_diff(so3::sample_uniform_rotation(b).m, r2.m) == 0.0);
}

TEST_CASE("sample_uniform_rotation trace statistics") {
    Rng rng(43);
    double mean_tr = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) mean_tr += so3::sample_uniform_rotation(rng).m.trace();
    mean_tr /= n;
    CHECK(std::abs(mean_tr) < 0.02); // Haar expectation of the trace is 0
}

TEST_CASE("sample_uniform_rotation angle distribution (chi-squared)") {
    Rng rng(44);
    const int n = 100000, bins = 10;
    int counts[10] = {0};
    for (int i = 0; i < n; ++i) {
        const double theta = norm(so3::log_map(so3::sample_uniform_rotation(rng)));
        int b = int(theta / kPi * bins);
        if (b >= bins) b = bins - 1;
        counts[b] += 1;
    }
    const auto cdf = [](double t) { return (t - std::sin(t)) / kPi; };
    double chi2 = 0.0;
    for (int b = 0; b < bins; ++b) {
        const double expect = n * (cdf((b + 1) * kPi / bins) - cdf(b * kPi / bins));
        chi2 += (counts[b] - expect) * (counts[b] - expect) / expect;
    }
    CHECK(chi2 < 27.88); // chi-squared 0.999 quantile at 9 dof
}

TEST_CASE("euler conversions") {
    CHECK(max_abs_diff(so3::euler_to_rotation({0, 0, 0}, EulerConvention::ZXZ).m,
                       Mat3::identity()) == 0.0);
    CHECK(max_abs_diff(so3::euler_to_rotation({0, 0, 0}, EulerConvention::ZYZ).m,
                       Mat3::identity()) == 0.0);
    // single-axis case: azimuth alone is a plain z-rotation
    CHECK(max_abs_diff(so3::euler_to_rotation({kPi / 2, 0, 0}, EulerConvention::ZXZ).m,
                       so3::exp_map({0, 0, kPi / 2}).m) < 1e-15);

    Rng rng(45);
    for (int i = 0; i < 200; ++i) {
        const EulerPose e{rng.uniform(-kPi, kPi), rng.uniform(-kPi, kPi),
                          rng.uniform(-kPi, kPi)};
        for (auto conv : {EulerConvention::ZXZ, EulerConvention::ZYZ}) {
            const RotationMatrix r = so3::euler_to_rotation(e, conv);
            // explicit elemental-product oracle
            const Mat3 expect =
                conv == EulerConvention::ZXZ
                    ? so3::rot_z(e.az) * so3::rot_x(e.el) * so3::rot_z(e.ct)
                    : so3::rot_z(e.az) * so3::rot_y(e.el) * so3::rot_z(e.ct);
            CHECK(max_abs_diff(r.m, expect) == 0.0);
            // log/exp re-encodes the same rotation
            CHECK(max_abs_diff(so3::exp_map(so3::log_map(r)).m, r.m) < 1e-9);
        }
    }
    CHECK_THROWS_AS(so3::euler_to_rotation({std::nan(""), 0, 0}, EulerConvention::ZXZ),
                    std::invalid_argument);
}

TEST_CASE("euler normalization and convention parsing") {
    const EulerPose e = so3::normalize_euler({3 * kPi, -kPi, 2.5 * kPi});
    CHECK(e.az == doctest::Approx(kPi).epsilon(1e-12));
    CHECK(e.el == doctest::Approx(kPi).epsilon(1e-12)); // -pi wraps to +pi
    CHECK(e.ct == doctest::Approx(kPi / 2).epsilon(1e-12));
    CHECK_THROWS_AS(so3::normalize_euler({INFINITY, 0, 0}), std::invalid_argument);

    CHECK(so3::euler_convention_from_string("ZXZ") == EulerConvention::ZXZ);
    CHECK(so3::euler_convention_from_string("ZYZ") == EulerConvention::ZYZ);
    CHECK_THROWS_AS(so3::euler_convention_from_string("XYZ"), std::invalid_argument);
}

TEST_SUITE_END();
