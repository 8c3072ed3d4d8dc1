#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "pcreg/errors.hpp"
#include "pcreg/rng.hpp"
#include "pcreg/spatial.hpp"

using namespace pcreg;

namespace {

PointCloud random_cloud(Rng& rng, std::size_t n, double extent = 2.0) {
    PointCloud cloud;
    cloud.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        cloud.add_point({rng.uniform(-extent, extent),
                         rng.uniform(-extent, extent),
                         rng.uniform(-extent, extent)});
    }
    return cloud;
}

// O(n^2) reference: all indices with distance < radius, sorted by
// (squared distance, index), truncated to cap.
std::vector<std::uint32_t> brute_radius(const PointCloud& cloud,
                                        const Vec3& center, double radius,
                                        std::uint32_t cap) {
    std::vector<std::pair<double, std::uint32_t>> hits;
    for (std::uint32_t i = 0; i < cloud.size(); ++i) {
        const double dx = cloud.xs()[i] - center.x;
        const double dy = cloud.ys()[i] - center.y;
        const double dz = cloud.zs()[i] - center.z;
        const double d2 = ((dx * dx) + (dy * dy)) + (dz * dz);
        if (d2 < radius * radius) hits.emplace_back(d2, i);
    }
    std::sort(hits.begin(), hits.end());
    if (hits.size() > cap) hits.resize(cap);
    std::vector<std::uint32_t> out;
    for (const auto& [d2, i] : hits) out.push_back(i);
    return out;
}

// Independent farthest-point selection over explicit pairwise distances.
std::vector<std::uint32_t> brute_fps(const PointCloud& cloud, std::uint32_t k) {
    const std::size_t n = cloud.size();
    const auto d2 = [&](std::uint32_t a, std::uint32_t b) {
        const double dx = cloud.xs()[a] - cloud.xs()[b];
        const double dy = cloud.ys()[a] - cloud.ys()[b];
        const double dz = cloud.zs()[a] - cloud.zs()[b];
        return ((dx * dx) + (dy * dy)) + (dz * dz);
    };
    std::uint32_t seed = 0;
    for (std::uint32_t i = 1; i < n; ++i) {
        const auto key = [&](std::uint32_t j) {
            return std::array<double, 3>{cloud.xs()[j], cloud.ys()[j],
                                         cloud.zs()[j]};
        };
        if (key(i) < key(seed)) seed = i;
    }
    std::vector<std::uint32_t> sel = {seed};
    std::vector<bool> taken(n, false);
    taken[seed] = true;
    while (sel.size() < k) {
        std::uint32_t best = UINT32_MAX;
        double best_min = -1.0;
        for (std::uint32_t i = 0; i < n; ++i) {
            if (taken[i]) continue;
            double mind = std::numeric_limits<double>::infinity();
            for (std::uint32_t s : sel) mind = std::min(mind, d2(i, s));
            if (mind > best_min) {
                best_min = mind;
                best = i;
            }
        }
        sel.push_back(best);
        taken[best] = true;
    }
    return sel;
}

}  // namespace

TEST_CASE("farthest point sampling on collinear points") {
    PointCloud cloud;
    cloud.add_point({0, 0, 0});
    cloud.add_point({1, 0, 0});
    cloud.add_point({4, 0, 0});
    cloud.add_point({10, 0, 0});

    CHECK(farthest_point_sampling(cloud, 2) ==
          std::vector<std::uint32_t>{0, 3});
    // Third pick: (4,0,0) has min-dist 4 to {0,10}, beating (1,0,0)'s 1.
    CHECK(farthest_point_sampling(cloud, 3) ==
          std::vector<std::uint32_t>{0, 3, 2});
    const auto all = farthest_point_sampling(cloud, 4);
    auto sorted = all;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<std::uint32_t>{0, 1, 2, 3});

    CHECK_THROWS_AS(farthest_point_sampling(cloud, 0), InvalidArgumentError);
    CHECK_THROWS_AS(farthest_point_sampling(cloud, 5),
                    InsufficientPointsError);
}

TEST_CASE("farthest point sampling matches brute force") {
    Rng rng(201);
    for (int rep = 0; rep < 60; ++rep) {
        const std::size_t n = 2 + rng.uniform_index(100);
        const std::uint32_t k =
            1 + static_cast<std::uint32_t>(rng.uniform_index(n));
        const PointCloud cloud = random_cloud(rng, n);
        CHECK(farthest_point_sampling(cloud, k) == brute_fps(cloud, k));
    }
}

TEST_CASE("farthest point sampling handles duplicate coordinates") {
    PointCloud cloud;
    cloud.add_point({1, 1, 1});
    cloud.add_point({0, 0, 0});
    cloud.add_point({1, 1, 1});
    cloud.add_point({0, 0, 0});
    const auto sel = farthest_point_sampling(cloud, 4);
    auto sorted = sel;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<std::uint32_t>{0, 1, 2, 3});
    CHECK(sel[0] == 1);  // lexicographically smallest coordinate, lowest index
    CHECK(sel[1] == 0);  // farthest, lowest index among the duplicates
}

TEST_CASE("farthest point sampling is permutation invariant as a set") {
    Rng rng(202);
    const std::size_t n = 64;
    const PointCloud cloud = random_cloud(rng, n);
    std::vector<std::uint32_t> perm(n);
    for (std::uint32_t i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(perm);

    PointCloud shuffled;
    shuffled.reserve(n);
    for (std::uint32_t i : perm) shuffled.add_point(cloud.point(i));

    const auto a = farthest_point_sampling(cloud, 16);
    const auto b = farthest_point_sampling(shuffled, 16);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const Vec3 pa = cloud.point(a[i]);
        const Vec3 pb = shuffled.point(b[i]);
        CHECK(pa.x == pb.x);
        CHECK(pa.y == pb.y);
        CHECK(pa.z == pb.z);
    }
}

TEST_CASE("farthest point sampling min-distances are non-increasing") {
    Rng rng(203);
    const PointCloud cloud = random_cloud(rng, 128);
    const auto sel = farthest_point_sampling(cloud, 64);
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < sel.size(); ++i) {
        double mind = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < i; ++j) {
            const Vec3 d = cloud.point(sel[i]) - cloud.point(sel[j]);
            mind = std::min(mind, d.squared_norm());
        }
        CHECK(mind <= prev);
        prev = mind;
    }
}

TEST_CASE("radius_neighbors closed forms") {
    PointCloud cloud;
    cloud.add_point({1, 0, 0});
    cloud.add_point({2, 0, 0});

    const NeighborIndex idx15(cloud, 1.5);
    CHECK(idx15.radius_neighbors({0, 0, 0}, UINT32_MAX) ==
          std::vector<std::uint32_t>{0});

    const NeighborIndex idx3(cloud, 3.0);
    CHECK(idx3.radius_neighbors({0, 0, 0}, 1) ==
          std::vector<std::uint32_t>{0});
    CHECK(idx3.radius_neighbors({0, 0, 0}, UINT32_MAX) ==
          std::vector<std::uint32_t>{0, 1});

    const NeighborIndex idx05(cloud, 0.5);
    CHECK(idx05.radius_neighbors({0, 0, 0}, UINT32_MAX).empty());

    // Strict inequality: a point exactly at the radius is excluded.
    const NeighborIndex idx1(cloud, 1.0);
    CHECK(idx1.radius_neighbors({0, 0, 0}, UINT32_MAX).empty());
}

TEST_CASE("radius_neighbors equals brute force on random clouds") {
    Rng rng(204);
    for (int rep = 0; rep < 80; ++rep) {
        const std::size_t n = 1 + rng.uniform_index(256);
        const PointCloud cloud = random_cloud(rng, n);
        const double radius = rng.uniform(0.2, 2.5);
        const NeighborIndex index(cloud, radius);
        for (int q = 0; q < 5; ++q) {
            const Vec3 center{rng.uniform(-2, 2), rng.uniform(-2, 2),
                              rng.uniform(-2, 2)};
            const std::uint32_t cap =
                q % 2 == 0 ? UINT32_MAX
                           : 1 + static_cast<std::uint32_t>(rng.uniform_index(8));
            CHECK(index.radius_neighbors(center, cap) ==
                  brute_radius(cloud, center, radius, cap));
        }
    }
}

TEST_CASE("group_multi_scale isolated center") {
    PointCloud cloud;
    cloud.add_point({100, 100, 100});
    cloud.add_point({0, 0, 0});
    const auto groups = group_multi_scale(cloud, {0}, {0.5, 1.0}, {8, 16});
    REQUIRE(groups.size() == 1);
    REQUIRE(groups[0].size() == 2);
    for (const auto& g : groups[0]) {
        CHECK(g.center == 0);
        CHECK(g.neighbors == std::vector<std::uint32_t>{0});
        CHECK(g.displacements == std::vector<double>{0.0, 0.0, 0.0});
    }
}

TEST_CASE("group_multi_scale caps dense clusters nearest-first") {
    Rng rng(205);
    PointCloud cloud;
    for (int i = 0; i < 60; ++i) {
        cloud.add_point({rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1),
                         rng.uniform(-0.1, 0.1)});
    }
    const std::vector<double> radii = {0.5, 1.0};
    const std::vector<std::uint32_t> caps = {4, 9};
    const auto groups = group_multi_scale(cloud, {3, 17}, radii, caps);
    for (std::size_t ci = 0; ci < groups.size(); ++ci) {
        for (std::size_t ri = 0; ri < radii.size(); ++ri) {
            const auto& g = groups[ci][ri];
            CHECK(g.neighbors.size() == caps[ri]);
            CHECK(g.neighbors.front() == g.center);
            const Vec3 c = cloud.point(g.center);
            const auto want =
                brute_radius(cloud, c, radii[ri], caps[ri]);
            CHECK(g.neighbors == want);
            // Displacements match coordinates and stay within the radius.
            for (std::size_t j = 0; j < g.neighbors.size(); ++j) {
                const Vec3 p = cloud.point(g.neighbors[j]);
                CHECK(g.displacements[3 * j + 0] == p.x - c.x);
                CHECK(g.displacements[3 * j + 1] == p.y - c.y);
                CHECK(g.displacements[3 * j + 2] == p.z - c.z);
                const double norm =
                    std::sqrt(Vec3{g.displacements[3 * j + 0],
                                   g.displacements[3 * j + 1],
                                   g.displacements[3 * j + 2]}
                                  .squared_norm());
                CHECK(norm <= radii[ri]);
            }
        }
    }
}

TEST_CASE("group_multi_scale configuration errors") {
    PointCloud cloud;
    cloud.add_point({0, 0, 0});
    CHECK_THROWS_AS(group_multi_scale(cloud, {0}, {0.5, 1.0}, {8}),
                    ConfigError);
    CHECK_THROWS_AS(group_multi_scale(cloud, {0}, {1.0, 0.5}, {8, 8}),
                    ConfigError);
    CHECK_THROWS_AS(group_multi_scale(cloud, {0}, {}, {}), ConfigError);
}
