#include "pcreg/icp.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "pcreg/spatial.hpp"

namespace pcreg {

void IcpConfig::validate() const {
    if (!(max_correspondence_distance > 0.0)) {
        throw ConfigError("max correspondence distance must be positive");
    }
    if (max_iterations == 0) throw ConfigError("max_iterations must be >= 1");
    if (!(convergence_threshold > 0.0)) {
        throw ConfigError("convergence threshold must be positive");
    }
}

RigidTransform rigid_align_closed_form(std::span<const Vec3> source,
                                       std::span<const Vec3> target) {
    if (source.size() != target.size()) {
        throw ShapeError("pair lists differ: " + std::to_string(source.size()) +
                         " source vs " + std::to_string(target.size()) +
                         " target points");
    }
    if (source.size() < 3) {
        throw DegenerateCorrespondencesError(
            "rigid alignment needs at least 3 pairs, got " +
            std::to_string(source.size()));
    }

    const double inv_n = 1.0 / static_cast<double>(source.size());
    Eigen::Vector3d sc = Eigen::Vector3d::Zero(), tc = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < source.size(); ++i) {
        sc += Eigen::Vector3d(source[i].x, source[i].y, source[i].z);
        tc += Eigen::Vector3d(target[i].x, target[i].y, target[i].z);
    }
    sc *= inv_n;
    tc *= inv_n;

    Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
    for (std::size_t i = 0; i < source.size(); ++i) {
        const Eigen::Vector3d s(source[i].x, source[i].y, source[i].z);
        const Eigen::Vector3d t(target[i].x, target[i].y, target[i].z);
        h += (s - sc) * (t - tc).transpose();
    }

    const Eigen::JacobiSVD<Eigen::Matrix3d> svd(
        h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Vector3d sing = svd.singularValues();
    if (sing(1) <= tol::kTinyNorm * std::max(sing(0), 1.0)) {
        throw DegenerateCorrespondencesError(
            "cross-covariance has rank < 2 (collinear or coincident pairs)");
    }
    Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
    d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant();
    const Eigen::Matrix3d r = svd.matrixV() * d * svd.matrixU().transpose();
    const Eigen::Vector3d t = tc - r * sc;

    RigidTransform out;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) out.rotation(i, j) = r(i, j);
    }
    out.translation = {t(0), t(1), t(2)};
    return out;
}

namespace {

struct Association {
    std::vector<Vec3> moved;     // transformed source points
    std::vector<std::uint32_t> tmpl;  // matching template indices
};

Association associate(const PointCloud& template_cloud,
                      const PointCloud& moved_source, double max_dist) {
    const NeighborIndex index(moved_source, max_dist);
    Association a;
    for (std::size_t i = 0; i < template_cloud.size(); ++i) {
        const auto nbrs = index.radius_neighbors(template_cloud.point(i), 1);
        if (nbrs.empty()) continue;
        a.moved.push_back(moved_source.point(nbrs[0]));
        a.tmpl.push_back(static_cast<std::uint32_t>(i));
    }
    return a;
}

double mean_residual(const Association& a, const PointCloud& template_cloud,
                     IcpVariant variant) {
    double acc = 0.0;
    for (std::size_t k = 0; k < a.moved.size(); ++k) {
        const Vec3 q = template_cloud.point(a.tmpl[k]);
        const Vec3 diff = a.moved[k] - q;
        if (variant == IcpVariant::point2point) {
            acc += diff.norm();
        } else {
            const auto nf = template_cloud.feature(a.tmpl[k]);
            acc += std::abs(diff.x * nf[0] + diff.y * nf[1] + diff.z * nf[2]);
        }
    }
    return acc / static_cast<double>(a.moved.size());
}

RigidTransform solve_point2plane(const Association& a,
                                 const PointCloud& template_cloud) {
    Eigen::Matrix<double, 6, 6> ata = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> atb = Eigen::Matrix<double, 6, 1>::Zero();
    for (std::size_t k = 0; k < a.moved.size(); ++k) {
        const Vec3 p = a.moved[k];
        const Vec3 q = template_cloud.point(a.tmpl[k]);
        const auto nf = template_cloud.feature(a.tmpl[k]);
        const Vec3 n{nf[0], nf[1], nf[2]};
        Eigen::Matrix<double, 6, 1> row;
        const Vec3 cxn = p.cross(n);
        row << cxn.x, cxn.y, cxn.z, n.x, n.y, n.z;
        const double b = -n.dot(p - q);
        ata += row * row.transpose();
        atb += row * b;
    }

    const Eigen::FullPivLU<Eigen::Matrix<double, 6, 6>> lu(ata);
    const auto pivots = lu.matrixLU().diagonal();
    for (int i = 0; i < 6; ++i) {
        if (std::abs(pivots(i)) < 1e-10) {
            throw DegenerateCorrespondencesError(
                "point-to-plane normal equations are singular (pivot " +
                std::to_string(std::abs(pivots(i))) + ")");
        }
    }
    const Eigen::Matrix<double, 6, 1> xi = lu.solve(atb);

    const Vec3 omega{xi(0), xi(1), xi(2)};
    const double angle = omega.norm();
    RigidTransform delta;
    if (angle > 0.0) {
        delta.rotation =
            quat_to_rotation(quat_from_axis_angle(omega * (1.0 / angle), angle));
    }
    delta.translation = {xi(3), xi(4), xi(5)};
    return delta;
}

}  // namespace

IcpResult icp(const PointCloud& template_cloud, const PointCloud& source,
              const IcpConfig& config, const RigidTransform& init) {
    config.validate();
    if (template_cloud.empty() || source.empty()) {
        throw EmptySetError("icp requires nonempty clouds");
    }
    if (config.variant == IcpVariant::point2plane &&
        template_cloud.feature_width() != 3) {
        throw InvalidArgumentError(
            "point-to-plane icp needs template normals (feature width 3), "
            "got width " +
            std::to_string(template_cloud.feature_width()));
    }

    IcpResult result;
    result.transform = init;

    for (std::uint32_t iter = 1; iter <= config.max_iterations; ++iter) {
        const PointCloud moved = apply(result.transform, source);
        const Association a = associate(template_cloud, moved,
                                        config.max_correspondence_distance);
        if (a.moved.empty()) {
            throw NoOverlapError(
                static_cast<int>(iter),
                "no correspondences within " +
                    std::to_string(config.max_correspondence_distance) +
                    " at iteration " + std::to_string(iter));
        }
        result.iterations = iter;
        result.residual_trace.push_back(
            mean_residual(a, template_cloud, config.variant));

        RigidTransform delta;
        if (config.variant == IcpVariant::point2point) {
            std::vector<Vec3> targets;
            targets.reserve(a.tmpl.size());
            for (std::uint32_t ti : a.tmpl) {
                targets.push_back(template_cloud.point(ti));
            }
            delta = rigid_align_closed_form(a.moved, targets);
        } else {
            delta = solve_point2plane(a, template_cloud);
        }
        result.transform = compose(delta, result.transform);

        const double change = delta.translation.norm() +
                              deg_to_rad(rotation_angle_deg(delta.rotation));
        if (change < config.convergence_threshold) {
            result.converged = true;
            break;
        }
    }

    const PointCloud final_moved = apply(result.transform, source);
    const Association final_assoc = associate(
        template_cloud, final_moved, config.max_correspondence_distance);
    result.final_residual =
        final_assoc.moved.empty()
            ? 0.0
            : mean_residual(final_assoc, template_cloud, config.variant);
    return result;
}

}  // namespace pcreg
