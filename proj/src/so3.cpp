#include "bindelta/so3.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bindelta {

double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

bool is_finite(const Vec3& v) {
    return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

Mat3 Mat3::identity() {
    Mat3 r;
    r.m = {{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}}};
    return r;
}

Mat3 Mat3::operator*(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            r.m[i][j] = m[i][0] * o.m[0][j] + m[i][1] * o.m[1][j] + m[i][2] * o.m[2][j];
    return r;
}

Vec3 Mat3::operator*(const Vec3& v) const {
    return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
}

Mat3 Mat3::operator+(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r.m[i][j] = m[i][j] + o.m[i][j];
    return r;
}

Mat3 Mat3::operator-(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r.m[i][j] = m[i][j] - o.m[i][j];
    return r;
}

Mat3 Mat3::operator*(double s) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r.m[i][j] = m[i][j] * s;
    return r;
}

Mat3 Mat3::transpose() const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r.m[i][j] = m[j][i];
    return r;
}

double Mat3::trace() const { return m[0][0] + m[1][1] + m[2][2]; }

namespace so3 {

double orthonormality_defect(const Mat3& m) {
    const Mat3 g = m.transpose() * m;
    double worst = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            const double target = (i == j) ? 1.0 : 0.0;
            worst = std::max(worst, std::abs(g.m[i][j] - target));
        }
    return worst;
}

double det(const Mat3& a) {
    return a.m[0][0] * (a.m[1][1] * a.m[2][2] - a.m[1][2] * a.m[2][1]) -
           a.m[0][1] * (a.m[1][0] * a.m[2][2] - a.m[1][2] * a.m[2][0]) +
           a.m[0][2] * (a.m[1][0] * a.m[2][1] - a.m[1][1] * a.m[2][0]);
}

Mat3 skew(const Vec3& v) {
    Mat3 r;
    r.m = {{{0.0, -v.z, v.y}, {v.z, 0.0, -v.x}, {-v.y, v.x, 0.0}}};
    return r;
}

Vec3 vee_antisym(const Mat3& a) {
    return {a.m[2][1] - a.m[1][2], a.m[0][2] - a.m[2][0], a.m[1][0] - a.m[0][1]};
}

namespace {

constexpr double kSmallAngle = 1e-4;  // Taylor branch threshold
constexpr double kNearPi = kPi - 1e-4; // symmetric-part branch threshold

// sin(t)/t with a 4th-order Taylor branch near zero.
double sinc(double t) {
    if (std::abs(t) < kSmallAngle) {
        const double t2 = t * t;
        return 1.0 - t2 / 6.0 + t2 * t2 / 120.0;
    }
    return std::sin(t) / t;
}

// (1 - cos(t))/t^2 with a 4th-order Taylor branch near zero.
double one_minus_cos_over_t2(double t) {
    if (std::abs(t) < kSmallAngle) {
        const double t2 = t * t;
        return 0.5 - t2 / 24.0 + t2 * t2 / 720.0;
    }
    return (1.0 - std::cos(t)) / (t * t);
}

// (t - sin(t))/t^3 with a 4th-order Taylor branch near zero.
double t_minus_sin_over_t3(double t) {
    if (std::abs(t) < kSmallAngle) {
        const double t2 = t * t;
        return 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0;
    }
    return (t - std::sin(t)) / (t * t * t);
}

double clamp_unit(double c) { return std::clamp(c, -1.0, 1.0); }

double rotation_angle(const Mat3& m) {
    return std::acos(clamp_unit(0.5 * (m.trace() - 1.0)));
}

} // namespace

RotationMatrix exp_map(const AxisAngle& y) {
    if (!is_finite(y)) throw std::invalid_argument("exp_map: non-finite axis-angle input");
    const double theta = norm(y);
    const Mat3 k = skew(y);
    const Mat3 r = Mat3::identity() + k * sinc(theta) + (k * k) * one_minus_cos_over_t2(theta);
    return RotationMatrix{r};
}

AxisAngle log_map(const RotationMatrix& rot) {
    const Mat3& r = rot.m;
    const double c = clamp_unit(0.5 * (r.trace() - 1.0));
    const Vec3 w = vee_antisym(r); // 2 sin(theta) * axis
    // atan2 keeps theta accurate to machine precision near pi, where the
    // arccos of the trace loses ~eps/sin(theta).
    const double theta = std::atan2(0.5 * norm(w), c);

    if (theta < kSmallAngle) {
        // y = theta/(2 sin theta) * w; series for theta/sin(theta).
        const double t2 = theta * theta;
        const double scale = 0.5 * (1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0);
        return w * scale;
    }
    if (theta > kNearPi) {
        // sin(theta) is tiny; recover the axis from the symmetric part:
        // (R + R^T)/2 = c I + (1-c) v v^T.
        const Mat3 b = (r + r.transpose()) * 0.5;
        const double one_minus_c = 1.0 - c;
        int i0 = 0;
        for (int i = 1; i < 3; ++i)
            if (b.m[i][i] > b.m[i0][i0]) i0 = i;
        Vec3 v{0.0, 0.0, 0.0};
        v[i0] = std::sqrt(std::max(0.0, (b.m[i0][i0] - c) / one_minus_c));
        for (int j = 0; j < 3; ++j)
            if (j != i0) v[j] = b.m[i0][j] / (one_minus_c * v[i0]);
        const double n = norm(v);
        v = v * (1.0 / n);
        const double s = dot(w, v);
        if (s < 0.0) {
            v = -v;
        } else if (s == 0.0) {
            // theta == pi exactly: both signs are valid; pick the
            // representative whose first nonzero component is positive.
            for (int j = 0; j < 3; ++j) {
                if (v[j] != 0.0) {
                    if (v[j] < 0.0) v = -v;
                    break;
                }
            }
        }
        return v * theta;
    }
    return w * (theta / norm(w)); // theta * unit axis; ||w|| = 2 sin(theta)
}

double geodesic_distance(const RotationMatrix& r1, const RotationMatrix& r2) {
    return rotation_angle(r1.m.transpose() * r2.m);
}

Mat3 exp_jacobian(const AxisAngle& y) {
    if (!is_finite(y)) throw std::invalid_argument("exp_jacobian: non-finite input");
    const double theta = norm(y);
    const Mat3 k = skew(y);
    return Mat3::identity() - k * one_minus_cos_over_t2(theta) +
           (k * k) * t_minus_sin_over_t3(theta);
}

AxisAngle canonicalize(const AxisAngle& y) {
    if (!is_finite(y)) throw std::invalid_argument("canonicalize: non-finite input");
    return log_map(exp_map(y));
}

RotationMatrix sample_uniform_rotation(Rng& rng) {
    // Shoemake subgroup algorithm: uniform unit quaternion from three
    // uniforms, then quaternion -> matrix.
    const double u1 = rng.uniform();
    const double u2 = rng.uniform();
    const double u3 = rng.uniform();
    const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
    const double t2 = 2.0 * kPi * u2, t3 = 2.0 * kPi * u3;
    const double qw = b * std::cos(t3);
    const double qx = a * std::sin(t2);
    const double qy = a * std::cos(t2);
    const double qz = b * std::sin(t3);

    Mat3 r;
    r.m = {{{1 - 2 * (qy * qy + qz * qz), 2 * (qx * qy - qz * qw), 2 * (qx * qz + qy * qw)},
            {2 * (qx * qy + qz * qw), 1 - 2 * (qx * qx + qz * qz), 2 * (qy * qz - qx * qw)},
            {2 * (qx * qz - qy * qw), 2 * (qy * qz + qx * qw), 1 - 2 * (qx * qx + qy * qy)}}};
    return RotationMatrix{r};
}

Mat3 rot_x(double a) {
    const double c = std::cos(a), s = std::sin(a);
    Mat3 r;
    r.m = {{{1, 0, 0}, {0, c, -s}, {0, s, c}}};
    return r;
}

Mat3 rot_y(double a) {
    const double c = std::cos(a), s = std::sin(a);
    Mat3 r;
    r.m = {{{c, 0, s}, {0, 1, 0}, {-s, 0, c}}};
    return r;
}

Mat3 rot_z(double a) {
    const double c = std::cos(a), s = std::sin(a);
    Mat3 r;
    r.m = {{{c, -s, 0}, {s, c, 0}, {0, 0, 1}}};
    return r;
}

EulerPose normalize_euler(const EulerPose& e) {
    const auto wrap = [](double a) {
        if (!std::isfinite(a)) throw std::invalid_argument("normalize_euler: non-finite angle");
        a = std::fmod(a, 2.0 * kPi);
        if (a > kPi) a -= 2.0 * kPi;
        if (a <= -kPi) a += 2.0 * kPi;
        return a;
    };
    return {wrap(e.az), wrap(e.el), wrap(e.ct)};
}

EulerConvention euler_convention_from_string(std::string_view tag) {
    if (tag == "ZXZ") return EulerConvention::ZXZ;
    if (tag == "ZYZ") return EulerConvention::ZYZ;
    throw std::invalid_argument("unknown Euler convention tag '" + std::string(tag) + "'");
}

RotationMatrix euler_to_rotation(const EulerPose& e, EulerConvention conv) {
    if (!(std::isfinite(e.az) && std::isfinite(e.el) && std::isfinite(e.ct)))
        throw std::invalid_argument("euler_to_rotation: non-finite angles");
    switch (conv) {
        case EulerConvention::ZXZ:
            return RotationMatrix{rot_z(e.az) * rot_x(e.el) * rot_z(e.ct)};
        case EulerConvention::ZYZ:
            return RotationMatrix{rot_z(e.az) * rot_y(e.el) * rot_z(e.ct)};
    }
    throw std::invalid_argument("euler_to_rotation: unknown convention tag");
}

} // namespace so3

RotationMatrix RotationMatrix::from_matrix(const Mat3& m, bool renormalize) {
    Mat3 r = m;
    if (renormalize) {
        // Rebuild an orthonormal frame from the first two rows.
        Vec3 a{r.m[0][0], r.m[0][1], r.m[0][2]};
        Vec3 b{r.m[1][0], r.m[1][1], r.m[1][2]};
        const double na = norm(a);
        if (na == 0.0) throw std::invalid_argument("RotationMatrix: degenerate matrix");
        a = a * (1.0 / na);
        b = b - a * dot(a, b);
        const double nb = norm(b);
        if (nb == 0.0) throw std::invalid_argument("RotationMatrix: degenerate matrix");
        b = b * (1.0 / nb);
        const Vec3 c = cross(a, b);
        r.m = {{{a.x, a.y, a.z}, {b.x, b.y, b.z}, {c.x, c.y, c.z}}};
    }
    if (so3::orthonormality_defect(r) > 1e-9)
        throw std::invalid_argument("RotationMatrix: not orthonormal within 1e-9");
    if (std::abs(so3::det(r) - 1.0) > 1e-9)
        throw std::invalid_argument("RotationMatrix: determinant not +1 within 1e-9");
    return RotationMatrix{r};
}

} // namespace bindelta
