#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pcreg/geometry.hpp"

namespace pcreg {

enum class IcpVariant { point2point, point2plane };

struct IcpConfig {
    double max_correspondence_distance = 1.0;
    std::uint32_t max_iterations = 50;
    // Applied to translation norm + rotation angle (radians) of one step.
    double convergence_threshold = 1e-8;
    IcpVariant variant = IcpVariant::point2point;

    void validate() const;
};

struct IcpResult {
    RigidTransform transform;
    std::uint32_t iterations = 0;
    double final_residual = 0.0;
    bool converged = false;
    // Mean residual observed at the start of each iteration.
    std::vector<double> residual_trace;
};

// Least-squares rigid motion mapping source[i] onto target[i] (Kabsch with
// reflection correction). Throws DegenerateCorrespondencesError for fewer
// than 3 pairs or a cross-covariance of rank < 2.
RigidTransform rigid_align_closed_form(std::span<const Vec3> source,
                                       std::span<const Vec3> target);

// Alternates nearest-source-per-template association (gated by the max
// correspondence distance) with an alignment step, starting from init.
// point2plane reads template features of width 3 as unit normals.
// Throws NoOverlapError (with the iteration index) when an association
// round finds no pairs.
IcpResult icp(const PointCloud& template_cloud, const PointCloud& source,
              const IcpConfig& config,
              const RigidTransform& init = RigidTransform::identity());

}  // namespace pcreg
