#pragma once

#include <array>
#include <cstddef>
#include <string_view>

#include "bindelta/rng.hpp"

namespace bindelta {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    double& operator[](std::size_t i) { return (&x)[i]; }
    double operator[](std::size_t i) const { return (&x)[i]; }

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

double dot(const Vec3& a, const Vec3& b);
Vec3 cross(const Vec3& a, const Vec3& b);
double norm(const Vec3& v);
bool is_finite(const Vec3& v);

/// Row-major 3x3 matrix.
struct Mat3 {
    std::array<std::array<double, 3>, 3> m{};

    static Mat3 identity();
    double& operator()(std::size_t r, std::size_t c) { return m[r][c]; }
    double operator()(std::size_t r, std::size_t c) const { return m[r][c]; }

    Mat3 operator*(const Mat3& o) const;
    Vec3 operator*(const Vec3& v) const;
    Mat3 operator+(const Mat3& o) const;
    Mat3 operator-(const Mat3& o) const;
    Mat3 operator*(double s) const;
    Mat3 transpose() const;
    double trace() const;
};

/// Axis-angle vector y = theta * v, ||v|| = 1. The zero vector is the
/// identity rotation; canonical representatives satisfy ||y|| in [0, pi).
using AxisAngle = Vec3;

/// Euler pose (azimuth, elevation, camera tilt), radians.
struct EulerPose {
    double az = 0.0, el = 0.0, ct = 0.0;
};

enum class EulerConvention { ZXZ, ZYZ };

/// Member of SO(3). Construction through from_matrix validates
/// orthonormality (||R^T R - I||_inf <= 1e-9, det within 1e-9 of +1);
/// the factory functions in this header produce valid members directly.
struct RotationMatrix {
    Mat3 m;

    /// Validates the invariants; throws std::invalid_argument on failure.
    /// With renormalize = true, a nearby rotation is recovered first
    /// (cross-product re-orthonormalization), useful for matrices read
    /// from files.
    static RotationMatrix from_matrix(const Mat3& m, bool renormalize = false);
};

namespace so3 {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

/// Max |(R^T R - I)_ij| over all entries.
double orthonormality_defect(const Mat3& m);
double det(const Mat3& m);

Mat3 skew(const Vec3& v);
/// Inverse of skew on the antisymmetric part: vee(M - M^T) where the
/// result a satisfies [a]_x = M - M^T.
Vec3 vee_antisym(const Mat3& m);

/// Rodrigues exponential map. exp_map(0) = I.
RotationMatrix exp_map(const AxisAngle& y);

/// Logarithm map, ||result|| in [0, pi]. Uses a series branch below
/// theta = 1e-4 and symmetric-part axis extraction above pi - 1e-4.
/// At theta = pi exactly the axis sign is ambiguous; the representative
/// whose first nonzero component is positive is returned.
AxisAngle log_map(const RotationMatrix& r);

/// Geodesic (angular) distance in [0, pi]:
/// arccos(clamp((tr(R1^T R2) - 1)/2, -1, 1)).
double geodesic_distance(const RotationMatrix& r1, const RotationMatrix& r2);

/// Right Jacobian J_r of the exponential map:
/// exp_map(y + e) ~ exp_map(y) * exp_map(J_r(y) e) for small e. J_r(0) = I.
Mat3 exp_jacobian(const AxisAngle& y);

/// log_map(exp_map(y)); wraps into the closed ball of radius pi, idempotent.
AxisAngle canonicalize(const AxisAngle& y);

/// Haar-uniform rotation via unit quaternion sampling; deterministic per
/// generator state.
RotationMatrix sample_uniform_rotation(Rng& rng);

RotationMatrix euler_to_rotation(const EulerPose& e, EulerConvention conv);

/// Angles wrapped into (-pi, pi].
EulerPose normalize_euler(const EulerPose& e);
EulerConvention euler_convention_from_string(std::string_view tag);

/// Elemental rotations about the coordinate axes.
Mat3 rot_x(double a);
Mat3 rot_y(double a);
Mat3 rot_z(double a);

} // namespace so3
} // namespace bindelta
