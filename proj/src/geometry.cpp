#include "pcreg/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "pcreg/kernels.hpp"

namespace pcreg {

Quaternion Quaternion::normalized() const {
    const double n = norm();
    if (n <= tol::kTinyNorm) {
        throw DegenerateInputError("cannot normalize near-zero quaternion");
    }
    const double s = 1.0 / n;
    return {w * s, x * s, y * s, z * s};
}

Quaternion quat_from_axis_angle(const Vec3& axis, double angle_rad) {
    const double n = axis.norm();
    if (n <= tol::kTinyNorm) {
        throw DegenerateInputError("axis-angle with near-zero axis");
    }
    const double half = 0.5 * angle_rad;
    const double s = std::sin(half) / n;
    return {std::cos(half), axis.x * s, axis.y * s, axis.z * s};
}

void PointCloud::add_point(const Vec3& p, std::span<const double> feat) {
    if (feat.size() != feature_width_) {
        throw ShapeError("feature width mismatch: cloud has " +
                         std::to_string(feature_width_) + ", point has " +
                         std::to_string(feat.size()));
    }
    xs_.push_back(p.x);
    ys_.push_back(p.y);
    zs_.push_back(p.z);
    features_.insert(features_.end(), feat.begin(), feat.end());
}

void PointCloud::reserve(std::size_t n) {
    xs_.reserve(n);
    ys_.reserve(n);
    zs_.reserve(n);
    features_.reserve(n * feature_width_);
}

void PointCloud::resize(std::size_t n) {
    xs_.resize(n);
    ys_.resize(n);
    zs_.resize(n);
    features_.resize(n * feature_width_);
}

void PointCloud::validate() const {
    for (std::size_t i = 0; i < size(); ++i) {
        if (!std::isfinite(xs_[i]) || !std::isfinite(ys_[i]) ||
            !std::isfinite(zs_[i])) {
            throw DegenerateInputError("non-finite coordinate at point " +
                                       std::to_string(i));
        }
    }
    for (double f : features_) {
        if (!std::isfinite(f)) {
            throw DegenerateInputError("non-finite feature value");
        }
    }
}

Mat3 quat_to_rotation(const Quaternion& q_in) {
    const Quaternion q = q_in.normalized();
    const double w = q.w, x = q.x, y = q.y, z = q.z;
    Mat3 r;
    r(0, 0) = 1.0 - 2.0 * (y * y + z * z);
    r(0, 1) = 2.0 * (x * y - w * z);
    r(0, 2) = 2.0 * (x * z + w * y);
    r(1, 0) = 2.0 * (x * y + w * z);
    r(1, 1) = 1.0 - 2.0 * (x * x + z * z);
    r(1, 2) = 2.0 * (y * z - w * x);
    r(2, 0) = 2.0 * (x * z - w * y);
    r(2, 1) = 2.0 * (y * z + w * x);
    r(2, 2) = 1.0 - 2.0 * (x * x + y * y);
    return r;
}

Quaternion rotation_to_quat(const Mat3& r) {
    // Shepperd's method: branch on the largest of w,x,y,z to keep the
    // division well conditioned.
    const double tr = r.trace();
    Quaternion q;
    if (tr > 0.0) {
        const double s = std::sqrt(tr + 1.0) * 2.0;
        q.w = 0.25 * s;
        q.x = (r(2, 1) - r(1, 2)) / s;
        q.y = (r(0, 2) - r(2, 0)) / s;
        q.z = (r(1, 0) - r(0, 1)) / s;
    } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
        const double s = std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2)) * 2.0;
        q.w = (r(2, 1) - r(1, 2)) / s;
        q.x = 0.25 * s;
        q.y = (r(0, 1) + r(1, 0)) / s;
        q.z = (r(0, 2) + r(2, 0)) / s;
    } else if (r(1, 1) > r(2, 2)) {
        const double s = std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2)) * 2.0;
        q.w = (r(0, 2) - r(2, 0)) / s;
        q.x = (r(0, 1) + r(1, 0)) / s;
        q.y = 0.25 * s;
        q.z = (r(1, 2) + r(2, 1)) / s;
    } else {
        const double s = std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1)) * 2.0;
        q.w = (r(1, 0) - r(0, 1)) / s;
        q.x = (r(0, 2) + r(2, 0)) / s;
        q.y = (r(1, 2) + r(2, 1)) / s;
        q.z = 0.25 * s;
    }
    return q.normalized().canonical();
}

DualQuaternion dualquat_from_transform(const RigidTransform& t) {
    DualQuaternion d;
    d.real = rotation_to_quat(t.rotation);
    const Quaternion tq{0.0, t.translation.x, t.translation.y, t.translation.z};
    d.dual = (tq * d.real) * 0.5;
    return d;
}

RigidTransform dualquat_to_transform(const DualQuaternion& d) {
    if (d.real.norm() <= tol::kTinyNorm) {
        throw DegenerateInputError(
            "dual-quaternion with near-zero real part cannot encode a pose");
    }
    const Quaternion p = d.real.normalized();
    RigidTransform out;
    out.rotation = quat_to_rotation(p);
    const Quaternion tq = (d.dual * p.conjugate()) * 2.0;
    out.translation = tq.vec();
    return out;
}

bool satisfies_rotation_invariants(const Mat3& r, double tolerance) {
    const Mat3 rtr = r.transposed() * r;
    const Mat3 eye = Mat3::identity();
    for (int i = 0; i < 9; ++i) {
        if (std::abs(rtr.m[i] - eye.m[i]) > tolerance) return false;
    }
    return std::abs(r.det() - 1.0) <= tolerance;
}

bool satisfies_dualquat_invariants(const DualQuaternion& d, double tolerance) {
    if (std::abs(d.real.norm() - 1.0) > tolerance) return false;
    const double dot = d.real.w * d.dual.w + d.real.x * d.dual.x +
                       d.real.y * d.dual.y + d.real.z * d.dual.z;
    return std::abs(dot) <= tolerance;
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
    RigidTransform out;
    out.rotation = a.rotation * b.rotation;
    out.translation = a.rotation * b.translation + a.translation;
    return out;
}

RigidTransform inverse(const RigidTransform& a) {
    RigidTransform out;
    out.rotation = a.rotation.transposed();
    out.translation = (out.rotation * a.translation) * -1.0;
    return out;
}

PointCloud apply(const RigidTransform& t, const PointCloud& cloud) {
    PointCloud out(cloud.feature_width());
    out.resize(cloud.size());
    const double tvec[3] = {t.translation.x, t.translation.y, t.translation.z};
    kernels::active().transform_points(
        t.rotation.m.data(), tvec, cloud.xs().data(), cloud.ys().data(),
        cloud.zs().data(), cloud.size(), out.xs().data(), out.ys().data(),
        out.zs().data());
    out.features() = cloud.features();
    return out;
}

double translation_error(const RigidTransform& pred, const RigidTransform& gt) {
    return (pred.translation - gt.translation).norm();
}

double rotation_error_chordal(const RigidTransform& pred,
                              const RigidTransform& gt) {
    double fro2 = 0.0;
    for (int i = 0; i < 9; ++i) {
        const double d = pred.rotation.m[i] - gt.rotation.m[i];
        fro2 += d * d;
    }
    const double arg = std::clamp(std::sqrt(fro2) / std::sqrt(8.0), 0.0, 1.0);
    return rad_to_deg(2.0 * std::asin(arg));
}

double rotation_angle_deg(const Mat3& r) {
    return rotation_error_chordal(RigidTransform{r, {}}, RigidTransform{});
}

std::array<double, 3> euler_zyx(const Mat3& r) {
    const double sp = std::clamp(-r(2, 0), -1.0, 1.0);
    const double pitch = std::asin(sp);
    double yaw, roll;
    if (std::abs(std::cos(pitch)) > tol::kTinyNorm) {
        yaw = std::atan2(r(1, 0), r(0, 0));
        roll = std::atan2(r(2, 1), r(2, 2));
    } else {
        // Gimbal lock: yaw and roll share an axis; put all of it into yaw.
        yaw = std::atan2(-r(0, 1), r(1, 1));
        roll = 0.0;
    }
    return {yaw, pitch, roll};
}

Mat3 rotation_from_euler_zyx(double yaw, double pitch, double roll) {
    const Mat3 rz = quat_to_rotation(quat_from_axis_angle({0, 0, 1}, yaw));
    const Mat3 ry = quat_to_rotation(quat_from_axis_angle({0, 1, 0}, pitch));
    const Mat3 rx = quat_to_rotation(quat_from_axis_angle({1, 0, 0}, roll));
    return rz * ry * rx;
}

namespace {

double wrap_angle_deg(double deg) {
    double a = std::fmod(deg, 360.0);
    if (a <= -180.0) a += 360.0;
    if (a > 180.0) a -= 360.0;
    return a;
}

}  // namespace

EulerRmse euler_rmse(std::span<const RigidTransform> preds,
                     std::span<const RigidTransform> gts) {
    if (preds.empty() || gts.empty()) {
        throw EmptyDatasetError("euler_rmse requires at least one pose pair");
    }
    if (preds.size() != gts.size()) {
        throw InvalidArgumentError(
            "euler_rmse requires equal-length lists, got " +
            std::to_string(preds.size()) + " and " + std::to_string(gts.size()));
    }
    double t_acc = 0.0;
    double r_acc = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const Vec3 dt = preds[i].translation - gts[i].translation;
        t_acc += dt.x * dt.x + dt.y * dt.y + dt.z * dt.z;
        const auto ep = euler_zyx(preds[i].rotation);
        const auto eg = euler_zyx(gts[i].rotation);
        for (int a = 0; a < 3; ++a) {
            const double d = wrap_angle_deg(rad_to_deg(ep[a] - eg[a]));
            r_acc += d * d;
        }
    }
    const double n = static_cast<double>(preds.size()) * 3.0;
    return {std::sqrt(t_acc / n), std::sqrt(r_acc / n)};
}

}  // namespace pcreg
