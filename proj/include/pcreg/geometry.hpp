#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "pcreg/errors.hpp"

namespace pcreg {

// Numerical tolerances used across the toolkit. Pose invariants
// (orthonormality, unit norms, round trips) are checked against kPoseTol;
// kTinyNorm separates degenerate inputs from merely small ones.
namespace tol {
inline constexpr double kPoseTol = 1e-9;
inline constexpr double kTinyNorm = 1e-12;
}  // namespace tol

inline constexpr double kPi = 3.14159265358979323846;

inline double deg_to_rad(double deg) { return deg * (kPi / 180.0); }
inline double rad_to_deg(double rad) { return rad * (180.0 / kPi); }

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
    double squared_norm() const { return dot(*this); }
};

// Row-major 3x3 matrix.
struct Mat3 {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    static Mat3 identity() { return Mat3{}; }

    double operator()(int r, int c) const { return m[r * 3 + c]; }
    double& operator()(int r, int c) { return m[r * 3 + c]; }

    Mat3 operator*(const Mat3& o) const {
        Mat3 out;
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) {
                out(r, c) = (*this)(r, 0) * o(0, c) + (*this)(r, 1) * o(1, c) +
                            (*this)(r, 2) * o(2, c);
            }
        }
        return out;
    }
    Vec3 operator*(const Vec3& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
                m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }
    Mat3 transposed() const {
        Mat3 out;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) out(r, c) = (*this)(c, r);
        return out;
    }
    double trace() const { return m[0] + m[4] + m[8]; }
    double det() const {
        return m[0] * (m[4] * m[8] - m[5] * m[7]) -
               m[1] * (m[3] * m[8] - m[5] * m[6]) +
               m[2] * (m[3] * m[7] - m[4] * m[6]);
    }
};

// Hamilton-convention quaternion w + xi + yj + zk. A rotation quaternion is
// unit-norm; the canonical representative has w >= 0.
struct Quaternion {
    double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

    static Quaternion identity() { return {1.0, 0.0, 0.0, 0.0}; }

    double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }
    Quaternion conjugate() const { return {w, -x, -y, -z}; }
    Quaternion operator*(const Quaternion& o) const {
        return {w * o.w - x * o.x - y * o.y - z * o.z,
                w * o.x + x * o.w + y * o.z - z * o.y,
                w * o.y - x * o.z + y * o.w + z * o.x,
                w * o.z + x * o.y - y * o.x + z * o.w};
    }
    Quaternion operator*(double s) const { return {w * s, x * s, y * s, z * s}; }
    Quaternion operator+(const Quaternion& o) const {
        return {w + o.w, x + o.x, y + o.y, z + o.z};
    }
    Quaternion operator-(const Quaternion& o) const {
        return {w - o.w, x - o.x, y - o.y, z - o.z};
    }
    Vec3 vec() const { return {x, y, z}; }

    Quaternion normalized() const;
    // Flips the sign so w >= 0.
    Quaternion canonical() const {
        return w < 0.0 ? Quaternion{-w, -x, -y, -z} : *this;
    }
};

Quaternion quat_from_axis_angle(const Vec3& axis, double angle_rad);

// Pose as sigma = real + eps * dual with unit real part and
// dual = 0.5 * (0, t) * real. Raw network predictions reuse this struct
// with an unnormalized real part.
struct DualQuaternion {
    Quaternion real = Quaternion::identity();
    Quaternion dual{0.0, 0.0, 0.0, 0.0};
};

struct RigidTransform {
    Mat3 rotation;
    Vec3 translation;

    static RigidTransform identity() { return RigidTransform{}; }
};

// XYZ coordinates stored as separate arrays (SoA; the kernels operate on
// whole coordinate columns), plus an optional row-major feature block of
// fixed width per point.
class PointCloud {
  public:
    PointCloud() = default;
    explicit PointCloud(std::size_t feature_width)
        : feature_width_(feature_width) {}

    std::size_t size() const { return xs_.size(); }
    bool empty() const { return xs_.empty(); }
    std::size_t feature_width() const { return feature_width_; }

    Vec3 point(std::size_t i) const { return {xs_[i], ys_[i], zs_[i]}; }
    void set_point(std::size_t i, const Vec3& p) {
        xs_[i] = p.x;
        ys_[i] = p.y;
        zs_[i] = p.z;
    }
    std::span<const double> feature(std::size_t i) const {
        return {features_.data() + i * feature_width_, feature_width_};
    }
    std::span<double> feature(std::size_t i) {
        return {features_.data() + i * feature_width_, feature_width_};
    }

    void add_point(const Vec3& p, std::span<const double> feat = {});
    void reserve(std::size_t n);
    void resize(std::size_t n);

    const std::vector<double>& xs() const { return xs_; }
    const std::vector<double>& ys() const { return ys_; }
    const std::vector<double>& zs() const { return zs_; }
    std::vector<double>& xs() { return xs_; }
    std::vector<double>& ys() { return ys_; }
    std::vector<double>& zs() { return zs_; }
    const std::vector<double>& features() const { return features_; }
    std::vector<double>& features() { return features_; }

    // Throws DegenerateInputError on non-finite coordinates or features.
    void validate() const;

  private:
    std::vector<double> xs_, ys_, zs_;
    std::vector<double> features_;
    std::size_t feature_width_ = 0;
};

// One supervised example: predict gt such that
// apply(gt, source_cloud) aligns with template_cloud.
struct RegistrationPair {
    PointCloud template_cloud;
    PointCloud source_cloud;
    RigidTransform gt;
};

// --- Rotation representations ------------------------------------------

// Rotation of the normalized q. Throws DegenerateInputError when
// ||q|| <= kTinyNorm.
Mat3 quat_to_rotation(const Quaternion& q);

// Canonical (w >= 0) unit quaternion of a rotation matrix.
Quaternion rotation_to_quat(const Mat3& r);

// dual = 0.5 * (0, t) * real, real part canonicalized to w >= 0.
DualQuaternion dualquat_from_transform(const RigidTransform& t);

// Inverse of dualquat_from_transform up to joint sign. The real part is
// normalized before conversion; the dual part is used as stored, so raw
// head outputs (which regress the dual part directly) convert without
// rescaling: t = 2 * dual * normalized(real)^*.
RigidTransform dualquat_to_transform(const DualQuaternion& d);

bool satisfies_rotation_invariants(const Mat3& r, double tolerance = tol::kPoseTol);
bool satisfies_dualquat_invariants(const DualQuaternion& d,
                                   double tolerance = tol::kPoseTol);

// --- Transform algebra ---------------------------------------------------

// a then b applied right-to-left: compose(a, b) * x == a * (b * x).
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform inverse(const RigidTransform& a);

// Transforms coordinates only; feature channels are copied unchanged.
PointCloud apply(const RigidTransform& t, const PointCloud& cloud);

// --- Pairwise error metrics ----------------------------------------------

// ||t_pred - t_gt||_2 in the cloud's length unit.
double translation_error(const RigidTransform& pred, const RigidTransform& gt);

// 2 asin(||R_pred - R_gt||_F / sqrt(8)) in degrees, clamped into [0, 180].
double rotation_error_chordal(const RigidTransform& pred,
                              const RigidTransform& gt);

// Intrinsic Z-Y-X Euler angles (yaw, pitch, roll) in radians,
// R = Rz(yaw) * Ry(pitch) * Rx(roll).
std::array<double, 3> euler_zyx(const Mat3& r);
Mat3 rotation_from_euler_zyx(double yaw, double pitch, double roll);

// RMSE over all scalar translation components (meters/units) and over all
// Euler-angle residuals (degrees, wrapped into (-180, 180]).
struct EulerRmse {
    double t_rmse;
    double r_rmse_deg;
};
EulerRmse euler_rmse(std::span<const RigidTransform> preds,
                     std::span<const RigidTransform> gts);

double rotation_angle_deg(const Mat3& r);

}  // namespace pcreg
