#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pcreg/geometry.hpp"

namespace pcreg {

enum class ShapeFamily { sphere, box, cylinder, torus, plane };

// size meaning per family:
//   sphere   [radius]
//   box      [extent_x, extent_y, extent_z] (full edge lengths)
//   cylinder [radius, height] (closed, axis z)
//   torus    [major_radius, minor_radius]
//   plane    [extent_x, extent_y] (z = 0)
struct ShapeSpec {
    ShapeFamily family = ShapeFamily::sphere;
    std::array<double, 3> size = {1.0, 1.0, 1.0};
    std::uint32_t samples = 1000;
    bool with_normals = false;

    void validate() const;
};

// Uniform surface sampling, area-weighted across faces; normals (feature
// width 3) are unit and outward. Deterministic per seed.
PointCloud sample_shape(const ShapeSpec& spec, std::uint64_t seed);

// Pose and noise distributions for synthetic pairs. Uniform mode draws a
// rotation angle and a translation magnitude uniformly (random directions);
// Gaussian mode draws per-axis translations and intrinsic Z-Y-X Euler angles
// from zero-mean normals.
struct PerturbationSpec {
    bool gaussian = false;

    // uniform mode
    double t_min = 0.0, t_max = 0.1;                  // units
    double angle_min_deg = 0.0, angle_max_deg = 5.0;  // degrees

    // gaussian mode
    std::array<double, 3> t_std = {0.0, 0.0, 0.0};          // x, y, z
    std::array<double, 3> euler_std_deg = {0.0, 0.0, 0.0};  // yaw z, pitch y, roll x

    double noise_std = 0.02;  // isotropic point noise, both clouds

    // Object-registration protocol: translation [0, 0.1] units, rotation
    // [0, 5] degrees, point noise 0.02 units.
    static PerturbationSpec modelnet();
    // Odometry-training protocol: translation stds (0.2, 0.02, 0.02) m,
    // Euler stds (0.1, 0.1, 1.0) degrees in Z-Y-X order, point noise 0.01 m.
    static PerturbationSpec kitti();

    void validate() const;
};

// Draws gt from the spec, sets source = inverse(gt) applied to cloud, then
// adds independent noise to both clouds. Rotations indistinguishable from a
// half turn (real w near 0) are redrawn. Deterministic per seed.
RegistrationPair make_pair(const PointCloud& cloud,
                           const PerturbationSpec& perturb,
                           std::uint64_t seed);

// For every input pair appends a second one whose source is a freshly
// transformed and noised copy of the same template; output order is
// original_0, augmented_0, original_1, augmented_1, ...
std::vector<RegistrationPair> duplicate_template_augment(
    std::span<const RegistrationPair> pairs, const PerturbationSpec& perturb,
    std::uint64_t seed);

// --- File IO -----------------------------------------------------------------

// ASCII PLY with double precision. Feature width 3 maps to nx/ny/nz,
// width 1 to intensity, width 4 to normals then intensity; width 0 is bare
// coordinates. Other widths are rejected.
void write_ply(const std::string& path, const PointCloud& cloud);
PointCloud read_ply(const std::string& path);

// Raw little-endian float32 (x, y, z, intensity) records. Clouds without
// features are written with zero intensity; the reader always produces
// feature width 1.
void write_kitti_bin(const std::string& path, const PointCloud& cloud);
PointCloud read_kitti_bin(const std::string& path);

// One pose per line: 12 numbers, the row-major upper 3x4 of [R|t].
void write_poses(const std::string& path,
                 std::span<const RigidTransform> poses);
std::vector<RigidTransform> read_poses(const std::string& path);

// Writes template_NNNN.ply / source_NNNN.ply / poses.txt plus
// manifest.json into dir; read_dataset takes the manifest path and resolves
// entries relative to it.
void write_dataset(const std::string& dir,
                   std::span<const RegistrationPair> pairs);
std::vector<RegistrationPair> read_dataset(const std::string& manifest_path);

}  // namespace pcreg
