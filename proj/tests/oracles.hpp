#pragma once

// Test-side oracles, implemented independently of the library's SO(3)
// routines: quaternion composition, quaternion <-> axis-angle, and small
// numeric helpers. Keep this file free of bindelta/so3.hpp internals other
// than the plain value types.

#include <algorithm>
#include <cmath>

#include "bindelta/rng.hpp"
#include "bindelta/so3.hpp"

namespace oracles {

using bindelta::Mat3;
using bindelta::Vec3;

struct Quat {
    double w = 1.0, x = 0.0, y = 0.0, z = 0.0;
};

inline Quat quat_from_axis_angle(const Vec3& v) {
    const double theta = std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z);
    if (theta < 1e-300) return {1.0, 0.0, 0.0, 0.0};
    const double half = 0.5 * theta;
    const double s = std::sin(half) / theta;
    return {std::cos(half), v.x * s, v.y * s, v.z * s};
}

inline Quat quat_mul(const Quat& a, const Quat& b) {
    return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

inline Quat quat_conj(const Quat& q) { return {q.w, -q.x, -q.y, -q.z}; }

inline Mat3 quat_to_matrix(const Quat& q) {
    Mat3 m;
    const double ww = q.w * q.w, xx = q.x * q.x, yy = q.y * q.y, zz = q.z * q.z;
    m.m = {{{ww + xx - yy - zz, 2 * (q.x * q.y - q.w * q.z), 2 * (q.x * q.z + q.w * q.y)},
            {2 * (q.x * q.y + q.w * q.z), ww - xx + yy - zz, 2 * (q.y * q.z - q.w * q.x)},
            {2 * (q.x * q.z - q.w * q.y), 2 * (q.y * q.z + q.w * q.x), ww - xx - yy + zz}}};
    return m;
}

/// Axis-angle of a unit quaternion, norm in [0, pi] (sign chosen so the
/// scalar part is treated as non-negative).
inline Vec3 quat_to_axis_angle(Quat q) {
    if (q.w < 0.0) q = {-q.w, -q.x, -q.y, -q.z};
    const double imag = std::sqrt(q.x * q.x + q.y * q.y + q.z * q.z);
    const double theta = 2.0 * std::atan2(imag, q.w);
    if (imag < 1e-300) return {0.0, 0.0, 0.0};
    const double s = theta / imag;
    return {q.x * s, q.y * s, q.z * s};
}

/// Rotation angle between two axis-angle vectors via quaternions only.
inline double quat_geodesic(const Vec3& a, const Vec3& b) {
    const Quat rel = quat_mul(quat_conj(quat_from_axis_angle(a)), quat_from_axis_angle(b));
    Vec3 v = quat_to_axis_angle(rel);
    return std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z);
}

inline double max_abs_diff(const Vec3& a, const Vec3& b) {
    return std::max({std::abs(a.x - b.x), std::abs(a.y - b.y), std::abs(a.z - b.z)});
}

inline double max_abs_diff(const Mat3& a, const Mat3& b) {
    double worst = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) worst = std::max(worst, std::abs(a.m[i][j] - b.m[i][j]));
    return worst;
}

/// Isotropic axis, norm uniform in [0, max_norm).
inline Vec3 random_axis_angle(bindelta::Rng& rng, double max_norm) {
    Vec3 v{rng.normal(), rng.normal(), rng.normal()};
    const double n = std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z);
    if (n == 0.0) return {max_norm * 0.5, 0.0, 0.0};
    const double target = rng.uniform() * max_norm;
    return v * (target / n);
}

/// Root of (theta - sin theta)/pi = 1/2: the median rotation angle under
/// the Haar angle density (bisection on the stated CDF).
inline double haar_median_angle() {
    double lo = 0.0, hi = bindelta::so3::kPi;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        ((mid - std::sin(mid)) / bindelta::so3::kPi < 0.5 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace oracles
