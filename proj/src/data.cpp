#include "pcreg/data.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "pcreg/rng.hpp"

namespace pcreg {

namespace {

void require_positive(double v, const char* what) {
    if (!(v > 0.0)) {
        throw ConfigError(std::string(what) + " must be positive, got " +
                          std::to_string(v));
    }
}

}  // namespace

void ShapeSpec::validate() const {
    if (samples == 0) throw ConfigError("sample count must be >= 1");
    switch (family) {
        case ShapeFamily::sphere:
            require_positive(size[0], "sphere radius");
            break;
        case ShapeFamily::box:
            require_positive(size[0], "box extent x");
            require_positive(size[1], "box extent y");
            require_positive(size[2], "box extent z");
            break;
        case ShapeFamily::cylinder:
            require_positive(size[0], "cylinder radius");
            require_positive(size[1], "cylinder height");
            break;
        case ShapeFamily::torus:
            require_positive(size[0], "torus major radius");
            require_positive(size[1], "torus minor radius");
            if (!(size[1] < size[0])) {
                throw ConfigError(
                    "torus minor radius must be smaller than the major "
                    "radius");
            }
            break;
        case ShapeFamily::plane:
            require_positive(size[0], "plane extent x");
            require_positive(size[1], "plane extent y");
            break;
    }
}

PointCloud sample_shape(const ShapeSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    PointCloud cloud(spec.with_normals ? 3 : 0);
    cloud.reserve(spec.samples);

    const auto emit = [&](const Vec3& p, const Vec3& n) {
        if (spec.with_normals) {
            const double nf[3] = {n.x, n.y, n.z};
            cloud.add_point(p, nf);
        } else {
            cloud.add_point(p);
        }
    };

    switch (spec.family) {
        case ShapeFamily::sphere: {
            const double r = spec.size[0];
            for (std::uint32_t i = 0; i < spec.samples; ++i) {
                const Vec3 dir = rng.unit_vector();
                emit(dir * r, dir);
            }
            break;
        }
        case ShapeFamily::box: {
            const double hx = spec.size[0] / 2.0, hy = spec.size[1] / 2.0,
                         hz = spec.size[2] / 2.0;
            // one entry per face: area, fixed axis, sign
            const double ayz = spec.size[1] * spec.size[2];
            const double axz = spec.size[0] * spec.size[2];
            const double axy = spec.size[0] * spec.size[1];
            const double areas[6] = {ayz, ayz, axz, axz, axy, axy};
            const double total = 2.0 * (ayz + axz + axy);
            for (std::uint32_t i = 0; i < spec.samples; ++i) {
                double u = rng.uniform(0.0, total);
                int face = 0;
                while (face < 5 && u >= areas[face]) {
                    u -= areas[face];
                    ++face;
                }
                const double sign = (face % 2 == 0) ? 1.0 : -1.0;
                const double a = rng.uniform(), b = rng.uniform();
                Vec3 p, n;
                if (face < 2) {
                    p = {sign * hx, (2.0 * a - 1.0) * hy, (2.0 * b - 1.0) * hz};
                    n = {sign, 0.0, 0.0};
                } else if (face < 4) {
                    p = {(2.0 * a - 1.0) * hx, sign * hy, (2.0 * b - 1.0) * hz};
                    n = {0.0, sign, 0.0};
                } else {
                    p = {(2.0 * a - 1.0) * hx, (2.0 * b - 1.0) * hy, sign * hz};
                    n = {0.0, 0.0, sign};
                }
                emit(p, n);
            }
            break;
        }
        case ShapeFamily::cylinder: {
            const double r = spec.size[0], h = spec.size[1];
            const double side = 2.0 * kPi * r * h;
            const double cap = kPi * r * r;
            const double total = side + 2.0 * cap;
            for (std::uint32_t i = 0; i < spec.samples; ++i) {
                const double u = rng.uniform(0.0, total);
                const double theta = rng.uniform(0.0, 2.0 * kPi);
                const double c = std::cos(theta), s = std::sin(theta);
                if (u < side) {
                    const double z = rng.uniform(-h / 2.0, h / 2.0);
                    emit({r * c, r * s, z}, {c, s, 0.0});
                } else {
                    const double rad = r * std::sqrt(rng.uniform());
                    const double sign = u < side + cap ? 1.0 : -1.0;
                    emit({rad * c, rad * s, sign * h / 2.0},
                         {0.0, 0.0, sign});
                }
            }
            break;
        }
        case ShapeFamily::torus: {
            const double major = spec.size[0], minor = spec.size[1];
            for (std::uint32_t i = 0; i < spec.samples; ++i) {
                const double theta = rng.uniform(0.0, 2.0 * kPi);
                // surface area element scales with major + minor*cos(phi)
                double phi;
                do {
                    phi = rng.uniform(0.0, 2.0 * kPi);
                } while (rng.uniform() >
                         (major + minor * std::cos(phi)) / (major + minor));
                const double ct = std::cos(theta), st = std::sin(theta);
                const double cp = std::cos(phi), sp = std::sin(phi);
                const double ring = major + minor * cp;
                emit({ring * ct, ring * st, minor * sp}, {cp * ct, cp * st, sp});
            }
            break;
        }
        case ShapeFamily::plane: {
            const double hx = spec.size[0] / 2.0, hy = spec.size[1] / 2.0;
            for (std::uint32_t i = 0; i < spec.samples; ++i) {
                emit({rng.uniform(-hx, hx), rng.uniform(-hy, hy), 0.0},
                     {0.0, 0.0, 1.0});
            }
            break;
        }
    }
    return cloud;
}

PerturbationSpec PerturbationSpec::modelnet() {
    PerturbationSpec s;
    s.gaussian = false;
    s.t_min = 0.0;
    s.t_max = 0.1;
    s.angle_min_deg = 0.0;
    s.angle_max_deg = 5.0;
    s.noise_std = 0.02;
    return s;
}

PerturbationSpec PerturbationSpec::kitti() {
    PerturbationSpec s;
    s.gaussian = true;
    s.t_std = {0.2, 0.02, 0.02};
    s.euler_std_deg = {0.1, 0.1, 1.0};
    s.noise_std = 0.01;
    return s;
}

void PerturbationSpec::validate() const {
    if (gaussian) {
        for (double v : t_std) {
            if (!(v >= 0.0)) throw ConfigError("translation stds must be >= 0");
        }
        for (double v : euler_std_deg) {
            if (!(v >= 0.0)) throw ConfigError("euler stds must be >= 0");
        }
    } else {
        if (!(t_min >= 0.0) || !(t_max >= t_min)) {
            throw ConfigError("translation range must satisfy 0 <= min <= max");
        }
        if (!(angle_min_deg >= 0.0) || !(angle_max_deg >= angle_min_deg)) {
            throw ConfigError("angle range must satisfy 0 <= min <= max");
        }
    }
    if (!(noise_std >= 0.0)) throw ConfigError("noise std must be >= 0");
}

namespace {

RigidTransform draw_transform(Rng& rng, const PerturbationSpec& perturb) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
        RigidTransform t;
        if (perturb.gaussian) {
            const double yaw = deg_to_rad(rng.gaussian(0.0, perturb.euler_std_deg[0]));
            const double pitch =
                deg_to_rad(rng.gaussian(0.0, perturb.euler_std_deg[1]));
            const double roll =
                deg_to_rad(rng.gaussian(0.0, perturb.euler_std_deg[2]));
            t.rotation = rotation_from_euler_zyx(yaw, pitch, roll);
            t.translation = {rng.gaussian(0.0, perturb.t_std[0]),
                             rng.gaussian(0.0, perturb.t_std[1]),
                             rng.gaussian(0.0, perturb.t_std[2])};
        } else {
            const Vec3 axis = rng.unit_vector();
            const double angle = deg_to_rad(
                rng.uniform(perturb.angle_min_deg, perturb.angle_max_deg));
            t.rotation = quat_to_rotation(quat_from_axis_angle(axis, angle));
            const Vec3 dir = rng.unit_vector();
            t.translation = dir * rng.uniform(perturb.t_min, perturb.t_max);
        }
        if (rotation_to_quat(t.rotation).w > tol::kTinyNorm) return t;
        // half turn: ambiguous real-part sign, draw again
    }
    throw DegenerateInputError(
        "perturbation spec keeps producing half-turn rotations");
}

PointCloud noised(const PointCloud& cloud, Rng& rng, double std_dev) {
    PointCloud out = cloud;
    for (std::size_t i = 0; i < out.size(); ++i) {
        Vec3 p = out.point(i);
        p.x += rng.gaussian(0.0, std_dev);
        p.y += rng.gaussian(0.0, std_dev);
        p.z += rng.gaussian(0.0, std_dev);
        out.set_point(i, p);
    }
    return out;
}

}  // namespace

RegistrationPair make_pair(const PointCloud& cloud,
                           const PerturbationSpec& perturb,
                           std::uint64_t seed) {
    perturb.validate();
    Rng rng(seed);
    RegistrationPair pair;
    pair.gt = draw_transform(rng, perturb);
    pair.template_cloud = noised(cloud, rng, perturb.noise_std);
    pair.source_cloud =
        noised(apply(inverse(pair.gt), cloud), rng, perturb.noise_std);
    return pair;
}

std::vector<RegistrationPair> duplicate_template_augment(
    std::span<const RegistrationPair> pairs, const PerturbationSpec& perturb,
    std::uint64_t seed) {
    perturb.validate();
    std::vector<RegistrationPair> out;
    out.reserve(pairs.size() * 2);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        out.push_back(pairs[i]);
        Rng rng(seed ^ (0x9E3779B97F4A7C15ull * (i + 1)));
        RegistrationPair aug;
        aug.template_cloud = pairs[i].template_cloud;
        aug.gt = draw_transform(rng, perturb);
        aug.source_cloud = noised(
            apply(inverse(aug.gt), pairs[i].template_cloud), rng,
            perturb.noise_std);
        out.push_back(std::move(aug));
    }
    return out;
}

// --- File IO -------------------------------------------------------------------

namespace {

const char* feature_names(std::size_t width) {
    switch (width) {
        case 0:
            return nullptr;
        case 1:
            return "intensity";
        case 3:
            return "nx ny nz";
        case 4:
            return "nx ny nz intensity";
        default:
            throw InvalidArgumentError(
                "PLY supports feature widths 0, 1, 3 or 4, got " +
                std::to_string(width));
    }
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void write_ply(const std::string& path, const PointCloud& cloud) {
    const char* extra = feature_names(cloud.feature_width());
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << "ply\nformat ascii 1.0\nelement vertex " << cloud.size() << "\n";
    for (const char* name : {"x", "y", "z"}) {
        f << "property double " << name << "\n";
    }
    if (extra != nullptr) {
        std::istringstream names(extra);
        std::string name;
        while (names >> name) f << "property double " << name << "\n";
    }
    f << "end_header\n";
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Vec3 p = cloud.point(i);
        f << format_double(p.x) << ' ' << format_double(p.y) << ' '
          << format_double(p.z);
        for (double v : cloud.feature(i)) f << ' ' << format_double(v);
        f << '\n';
    }
    if (!f) throw IoError("failed writing " + path);
}

PointCloud read_ply(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open: " + path);

    std::string line;
    long line_no = 0;
    const auto next_line = [&]() -> bool {
        if (!std::getline(f, line)) return false;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
    };

    if (!next_line() || line != "ply") {
        throw ParseError(path, 1, "not a PLY file (missing 'ply' magic)");
    }
    if (!next_line() || line != "format ascii 1.0") {
        throw ParseError(path, line_no == 0 ? 2 : line_no,
                         "expected 'format ascii 1.0'");
    }

    std::size_t count = 0;
    bool have_count = false;
    std::vector<std::string> props;
    while (true) {
        if (!next_line()) {
            throw ParseError(path, line_no, "header ends before end_header");
        }
        if (line == "end_header") break;
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "comment") continue;
        if (tok == "element") {
            std::string kind;
            ls >> kind >> count;
            if (kind != "vertex" || ls.fail()) {
                throw ParseError(path, line_no,
                                 "only 'element vertex <n>' is supported");
            }
            have_count = true;
        } else if (tok == "property") {
            std::string type, name;
            ls >> type >> name;
            if ((type != "double" && type != "float") || name.empty()) {
                throw ParseError(path, line_no,
                                 "expected 'property double|float <name>'");
            }
            props.push_back(name);
        } else {
            throw ParseError(path, line_no, "unrecognized header line");
        }
    }
    if (!have_count) {
        throw ParseError(path, line_no, "header lacks an element vertex count");
    }
    const std::vector<std::string> expected_head = {"x", "y", "z"};
    if (props.size() < 3 || props[0] != "x" || props[1] != "y" ||
        props[2] != "z") {
        throw ParseError(path, line_no,
                         "first three properties must be x, y, z");
    }
    const std::size_t width = props.size() - 3;
    const std::string tail = width == 0 ? ""
                             : width == 1
                                 ? "intensity"
                                 : (width == 3 ? "nx ny nz"
                                               : "nx ny nz intensity");
    {
        std::istringstream names(tail);
        std::string name;
        std::size_t k = 3;
        while (names >> name) {
            if (k >= props.size() || props[k] != name) {
                throw ParseError(path, line_no,
                                 "unsupported property layout after x y z");
            }
            ++k;
        }
        if (k != props.size()) {
            throw ParseError(path, line_no,
                             "unsupported property layout after x y z");
        }
    }

    PointCloud cloud(width);
    cloud.reserve(count);
    std::vector<double> feat(width);
    for (std::size_t i = 0; i < count; ++i) {
        if (!next_line()) {
            throw ParseError(path, line_no + 1,
                             "file ends after " + std::to_string(i) + " of " +
                                 std::to_string(count) + " vertices");
        }
        std::istringstream ls(line);
        Vec3 p;
        ls >> p.x >> p.y >> p.z;
        for (double& v : feat) ls >> v;
        if (ls.fail()) {
            throw ParseError(path, line_no, "malformed vertex row");
        }
        std::string leftover;
        if (ls >> leftover) {
            throw ParseError(path, line_no, "extra tokens on vertex row");
        }
        cloud.add_point(p, feat);
    }
    while (next_line()) {
        if (!line.empty()) {
            throw ParseError(path, line_no, "trailing data after last vertex");
        }
    }
    return cloud;
}

void write_kitti_bin(const std::string& path, const PointCloud& cloud) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Vec3 p = cloud.point(i);
        const float rec[4] = {
            static_cast<float>(p.x), static_cast<float>(p.y),
            static_cast<float>(p.z),
            cloud.feature_width() >= 1 ? static_cast<float>(cloud.feature(i)[0])
                                       : 0.0f};
        f.write(reinterpret_cast<const char*>(rec), sizeof(rec));
    }
    if (!f) throw IoError("failed writing " + path);
}

PointCloud read_kitti_bin(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw IoError("cannot open: " + path);
    const std::streamoff bytes = f.tellg();
    if (bytes % 16 != 0) {
        throw ParseError(path, 0,
                         "size " + std::to_string(bytes) +
                             " is not a multiple of 16 bytes per point");
    }
    f.seekg(0);
    PointCloud cloud(1);
    const std::size_t n = static_cast<std::size_t>(bytes) / 16;
    cloud.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        float rec[4];
        f.read(reinterpret_cast<char*>(rec), sizeof(rec));
        if (!f) throw ParseError(path, 0, "truncated read");
        const double intensity = rec[3];
        cloud.add_point({rec[0], rec[1], rec[2]}, {&intensity, 1});
    }
    return cloud;
}

void write_poses(const std::string& path,
                 std::span<const RigidTransform> poses) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    for (const RigidTransform& t : poses) {
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) {
                f << format_double(t.rotation(r, c)) << ' ';
            }
            const double tv = r == 0 ? t.translation.x
                              : r == 1 ? t.translation.y
                                       : t.translation.z;
            f << format_double(tv);
            if (r < 2) f << ' ';
        }
        f << '\n';
    }
    if (!f) throw IoError("failed writing " + path);
}

std::vector<RigidTransform> read_poses(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open: " + path);
    std::vector<RigidTransform> poses;
    std::string line;
    long line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ls(line);
        double v[12];
        for (double& x : v) ls >> x;
        if (ls.fail()) {
            throw ParseError(path, line_no,
                             "pose row needs 12 numbers (row-major 3x4)");
        }
        std::string leftover;
        if (ls >> leftover) {
            throw ParseError(path, line_no, "extra tokens on pose row");
        }
        RigidTransform t;
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) t.rotation(r, c) = v[r * 4 + c];
        }
        t.translation = {v[3], v[7], v[11]};
        poses.push_back(t);
    }
    return poses;
}

void write_dataset(const std::string& dir,
                   std::span<const RegistrationPair> pairs) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::ordered_json manifest;
    manifest["pairs"] = nlohmann::ordered_json::array();
    std::vector<RigidTransform> poses;
    char name[64];
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        std::snprintf(name, sizeof(name), "template_%04zu.ply", i);
        const std::string tmpl_name = name;
        std::snprintf(name, sizeof(name), "source_%04zu.ply", i);
        const std::string src_name = name;
        write_ply(dir + "/" + tmpl_name, pairs[i].template_cloud);
        write_ply(dir + "/" + src_name, pairs[i].source_cloud);
        manifest["pairs"].push_back(
            {{"template", tmpl_name}, {"source", src_name}});
        poses.push_back(pairs[i].gt);
    }
    write_poses(dir + "/poses.txt", poses);
    manifest["poses"] = "poses.txt";

    std::ofstream f(dir + "/manifest.json");
    if (!f) throw IoError("cannot open for writing: " + dir + "/manifest.json");
    f << manifest.dump(2) << '\n';
    if (!f) throw IoError("failed writing " + dir + "/manifest.json");
}

std::vector<RegistrationPair> read_dataset(const std::string& manifest_path) {
    std::ifstream f(manifest_path);
    if (!f) throw IoError("cannot open: " + manifest_path);
    nlohmann::json manifest;
    try {
        f >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(manifest_path, 0,
                         std::string("invalid manifest JSON: ") + e.what());
    }

    const std::filesystem::path base =
        std::filesystem::path(manifest_path).parent_path();
    std::vector<RigidTransform> poses;
    std::vector<RegistrationPair> pairs;
    try {
        poses = read_poses((base / manifest.at("poses").get<std::string>())
                               .string());
        for (const auto& entry : manifest.at("pairs")) {
            RegistrationPair pair;
            pair.template_cloud = read_ply(
                (base / entry.at("template").get<std::string>()).string());
            pair.source_cloud = read_ply(
                (base / entry.at("source").get<std::string>()).string());
            pairs.push_back(std::move(pair));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(manifest_path, 0,
                         std::string("manifest field error: ") + e.what());
    }
    if (poses.size() != pairs.size()) {
        throw ParseError(manifest_path, 0,
                         "manifest lists " + std::to_string(pairs.size()) +
                             " pairs but the pose file holds " +
                             std::to_string(poses.size()) + " rows");
    }
    for (std::size_t i = 0; i < pairs.size(); ++i) pairs[i].gt = poses[i];
    return pairs;
}

}  // namespace pcreg
