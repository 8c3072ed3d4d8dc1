#include "pcreg/spatial.hpp"

#include <algorithm>
#include <cmath>

#include "pcreg/errors.hpp"
#include "pcreg/kernels.hpp"

namespace pcreg {

std::size_t NeighborIndex::CellHash::operator()(
    const std::array<std::int64_t, 3>& c) const {
    std::uint64_t h = 1469598103934665603ull;
    for (std::int64_t v : c) {
        h ^= static_cast<std::uint64_t>(v);
        h *= 1099511628211ull;
    }
    return static_cast<std::size_t>(h);
}

std::array<std::int64_t, 3> NeighborIndex::cell_of(double x, double y,
                                                   double z) const {
    return {static_cast<std::int64_t>(std::floor(x / radius_)),
            static_cast<std::int64_t>(std::floor(y / radius_)),
            static_cast<std::int64_t>(std::floor(z / radius_))};
}

NeighborIndex::NeighborIndex(const PointCloud& cloud, double radius)
    : cloud_(cloud), radius_(radius) {
    if (!(radius > 0.0)) {
        throw InvalidArgumentError("neighbor search radius must be positive");
    }
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        cells_[cell_of(cloud.xs()[i], cloud.ys()[i], cloud.zs()[i])].push_back(
            static_cast<std::uint32_t>(i));
    }
}

std::vector<std::uint32_t> NeighborIndex::radius_neighbors(
    const Vec3& center, std::uint32_t cap) const {
    const double r2 = radius_ * radius_;
    const auto base = cell_of(center.x, center.y, center.z);
    std::vector<std::pair<double, std::uint32_t>> hits;
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
        for (std::int64_t dy = -1; dy <= 1; ++dy) {
            for (std::int64_t dz = -1; dz <= 1; ++dz) {
                const auto it =
                    cells_.find({base[0] + dx, base[1] + dy, base[2] + dz});
                if (it == cells_.end()) continue;
                for (std::uint32_t idx : it->second) {
                    const double ddx = cloud_.xs()[idx] - center.x;
                    const double ddy = cloud_.ys()[idx] - center.y;
                    const double ddz = cloud_.zs()[idx] - center.z;
                    const double d2 = ((ddx * ddx) + (ddy * ddy)) + (ddz * ddz);
                    if (d2 < r2) hits.emplace_back(d2, idx);
                }
            }
        }
    }
    std::sort(hits.begin(), hits.end());
    if (hits.size() > cap) hits.resize(cap);
    std::vector<std::uint32_t> out;
    out.reserve(hits.size());
    for (const auto& [d2, idx] : hits) out.push_back(idx);
    return out;
}

std::vector<std::uint32_t> farthest_point_sampling(const PointCloud& cloud,
                                                   std::uint32_t k) {
    const std::size_t n = cloud.size();
    if (k == 0) throw InvalidArgumentError("farthest point sampling needs k >= 1");
    if (k > n) {
        throw InsufficientPointsError("farthest point sampling needs " +
                                      std::to_string(k) + " points, cloud has " +
                                      std::to_string(n));
    }

    std::uint32_t seed = 0;
    for (std::uint32_t i = 1; i < n; ++i) {
        const auto key = [&](std::uint32_t j) {
            return std::array<double, 3>{cloud.xs()[j], cloud.ys()[j], cloud.zs()[j]};
        };
        if (key(i) < key(seed)) seed = i;
    }

    std::vector<std::uint32_t> selected;
    selected.reserve(k);
    selected.push_back(seed);
    std::vector<char> taken(n, 0);
    taken[seed] = 1;

    std::vector<double> min_d2(n);
    std::vector<double> cand_d2(n);
    const auto& kt = kernels::active();
    kt.dist2(cloud.xs().data(), cloud.ys().data(), cloud.zs().data(), n,
             cloud.xs()[seed], cloud.ys()[seed], cloud.zs()[seed], min_d2.data());

    while (selected.size() < k) {
        // Duplicate coordinates can leave every candidate at min-dist 0, so
        // selected indices are masked out rather than relying on distance.
        std::uint32_t best = UINT32_MAX;
        double best_d2 = -1.0;
        for (std::uint32_t i = 0; i < n; ++i) {
            if (!taken[i] && min_d2[i] > best_d2) {
                best_d2 = min_d2[i];
                best = i;
            }
        }
        selected.push_back(best);
        taken[best] = 1;
        kt.dist2(cloud.xs().data(), cloud.ys().data(), cloud.zs().data(), n,
                 cloud.xs()[best], cloud.ys()[best], cloud.zs()[best],
                 cand_d2.data());
        kt.min_update(min_d2.data(), cand_d2.data(), n);
    }
    return selected;
}

std::vector<std::vector<GroupedNeighborhood>> group_multi_scale(
    const PointCloud& cloud, const std::vector<std::uint32_t>& centers,
    const std::vector<double>& radii, const std::vector<std::uint32_t>& caps) {
    if (radii.size() != caps.size()) {
        throw ConfigError("grouping radii and caps must have equal length");
    }
    if (radii.empty()) throw ConfigError("grouping needs at least one radius");
    for (std::size_t i = 0; i + 1 < radii.size(); ++i) {
        if (!(radii[i] < radii[i + 1])) {
            throw ConfigError("grouping radii must be strictly increasing");
        }
    }

    std::vector<NeighborIndex> indexes;
    indexes.reserve(radii.size());
    for (double r : radii) indexes.emplace_back(cloud, r);

    std::vector<std::vector<GroupedNeighborhood>> out(centers.size());
    for (std::size_t ci = 0; ci < centers.size(); ++ci) {
        const std::uint32_t c = centers[ci];
        const Vec3 cx{cloud.xs()[c], cloud.ys()[c], cloud.zs()[c]};
        out[ci].reserve(radii.size());
        for (std::size_t ri = 0; ri < radii.size(); ++ri) {
            GroupedNeighborhood g;
            g.center = c;
            auto nbrs = indexes[ri].radius_neighbors(cx, caps[ri]);
            // The center is its own nearest neighbor (distance 0); hoist it to
            // the front, adding it if the cap-trimmed list dropped it.
            auto self = std::find(nbrs.begin(), nbrs.end(), c);
            if (self != nbrs.end()) {
                nbrs.erase(self);
            } else if (nbrs.size() == caps[ri] && !nbrs.empty()) {
                nbrs.pop_back();
            }
            g.neighbors.reserve(nbrs.size() + 1);
            g.neighbors.push_back(c);
            g.neighbors.insert(g.neighbors.end(), nbrs.begin(), nbrs.end());
            g.displacements.reserve(3 * g.neighbors.size());
            for (std::uint32_t idx : g.neighbors) {
                g.displacements.push_back(cloud.xs()[idx] - cx.x);
                g.displacements.push_back(cloud.ys()[idx] - cx.y);
                g.displacements.push_back(cloud.zs()[idx] - cx.z);
            }
            out[ci].push_back(std::move(g));
        }
    }
    return out;
}

}  // namespace pcreg
