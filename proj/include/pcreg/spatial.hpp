#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "pcreg/geometry.hpp"

namespace pcreg {

// Uniform grid over the XYZ coordinates of a cloud, cell side = query radius.
// Immutable after construction; queries from multiple threads are safe.
class NeighborIndex {
  public:
    NeighborIndex(const PointCloud& cloud, double radius);

    // All points with distance < radius from `center`, sorted by ascending
    // (squared distance, index).  If more than `cap` qualify, the nearest
    // `cap` are kept.  An empty result is valid.
    std::vector<std::uint32_t> radius_neighbors(const Vec3& center,
                                                std::uint32_t cap) const;

    double radius() const { return radius_; }

  private:
    struct CellHash {
        std::size_t operator()(const std::array<std::int64_t, 3>& c) const;
    };

    std::array<std::int64_t, 3> cell_of(double x, double y, double z) const;

    const PointCloud& cloud_;
    double radius_;
    std::unordered_map<std::array<std::int64_t, 3>, std::vector<std::uint32_t>,
                       CellHash>
        cells_;
};

// One neighborhood around a sampled center at a single radius.
struct GroupedNeighborhood {
    std::uint32_t center = 0;
    std::vector<std::uint32_t> neighbors;   // center first when self-grouping
    std::vector<double> displacements;      // row-major [neighbors.size() x 3]
};

// Deterministic farthest point sampling.  The seed is the lexicographically
// smallest (x, y, z), ties broken by smallest index; every later pick
// maximizes the min distance to the selected set with the same tie rule.
std::vector<std::uint32_t> farthest_point_sampling(const PointCloud& cloud,
                                                   std::uint32_t k);

// Groups every center at every radius.  The center itself is always a member
// of its own group, listed first, so no group is empty.  radii must be
// strictly increasing and the same length as caps.
// Result layout: [center][radius_index].
std::vector<std::vector<GroupedNeighborhood>> group_multi_scale(
    const PointCloud& cloud, const std::vector<std::uint32_t>& centers,
    const std::vector<double>& radii, const std::vector<std::uint32_t>& caps);

}  // namespace pcreg
