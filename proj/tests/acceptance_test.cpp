// Full-suite acceptance run: ten go/no-go checks covering gradients, pose
// algebra, metrics, spatial search, ICP, end-to-end learning, odometry
// caching, trajectory evaluation, invariances and reproducibility. Each
// check prints exactly one PASS/FAIL line; the process exits nonzero if any
// check fails. The learning check trains a small model from scratch and
// dominates the runtime (a few minutes).
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pcreg/data.hpp"
#include "pcreg/evaluation.hpp"
#include "pcreg/geometry.hpp"
#include "pcreg/gradcheck.hpp"
#include "pcreg/icp.hpp"
#include "pcreg/loss.hpp"
#include "pcreg/model.hpp"
#include "pcreg/rng.hpp"
#include "pcreg/spatial.hpp"

namespace fs = std::filesystem;
using namespace pcreg;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, ...) {
    va_list args;
    va_start(args, f);
    char buf[512];
    std::vsnprintf(buf, sizeof buf, f, args);
    va_end(args);
    return buf;
}

double now_seconds() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

PointCloud box_cloud(std::uint32_t samples, std::uint64_t seed) {
    ShapeSpec spec;
    spec.family = ShapeFamily::box;
    spec.size = {2.0, 1.0, 0.6};
    spec.samples = samples;
    return sample_shape(spec, seed);
}

RigidTransform random_pose(Rng& rng, double min_angle_deg,
                           double max_angle_deg, double t_span) {
    RigidTransform t;
    t.rotation = quat_to_rotation(quat_from_axis_angle(
        rng.unit_vector(),
        deg_to_rad(rng.uniform(min_angle_deg, max_angle_deg))));
    t.translation = {rng.uniform(-t_span, t_span),
                     rng.uniform(-t_span, t_span),
                     rng.uniform(-t_span, t_span)};
    return t;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

// Shared by the learning and invariance checks: a capacity-reduced network
// that still separates rotation from translation on 512-point shapes.
ModelConfig smoke_config() {
    ModelConfig cfg;
    cfg.n_fps = 96;
    cfg.sa_radii = {0.2, 0.4};
    cfg.sa_caps = {12, 24};
    cfg.fe_radius = 0.5;
    cfg.fe_cap = 16;
    cfg.mlp_sa = {16, 16};
    cfg.mlp_fe = {64, 64};
    cfg.mlp_pn = {64, 128};
    cfg.mlp_fc = {64, 8};
    cfg.feature_width = 0;
    return cfg;
}

RegistrationPair smoke_pair(std::uint64_t cloud_seed, std::uint64_t pair_seed) {
    return make_pair(box_cloud(512, cloud_seed), PerturbationSpec::modelnet(),
                     pair_seed);
}

// 1. Every differentiation primitive plus the full small model + loss agree
//    with central finite differences at relative error < 1e-5, in < 2 min.
Outcome criterion_gradients() {
    const double t0 = now_seconds();
    const auto checks = run_gradient_checks(7, 1e-5);
    const double secs = now_seconds() - t0;

    double max_rel = 0.0;
    std::size_t elements = 0;
    std::string failed;
    for (const auto& c : checks) {
        max_rel = std::max(max_rel, c.max_rel_error);
        elements += c.elements;
        if (!c.passed) failed += " " + c.name;
    }
    const bool pass = all_passed(checks) && secs < 120.0;
    if (!pass) {
        return {false, fmt("failed:%s, max rel %.2e, %.1f s",
                           failed.empty() ? " (timeout)" : failed.c_str(),
                           max_rel, secs)};
    }
    return {true, fmt("%zu checks / %zu elements, max rel %.1e, %.2f s "
                      "(limit 120 s)",
                      checks.size(), elements, max_rel, secs)};
}

// 2. transform -> dual quaternion -> transform round trip below 1e-9 over
//    1000 poses; pure-translation and pure-rotation closed forms exact.
Outcome criterion_dualquat() {
    Rng rng(20260801);
    double max_err = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const RigidTransform t = random_pose(rng, 0.005, 179.995, 10.0);
        const RigidTransform back = dualquat_to_transform(
            dualquat_from_transform(t));
        for (int k = 0; k < 9; ++k)
            max_err = std::max(max_err,
                               std::abs(t.rotation.m[k] - back.rotation.m[k]));
        max_err = std::max(max_err, (t.translation - back.translation).norm());
    }
    if (!(max_err < 1e-9))
        return {false, fmt("round-trip max err %.2e >= 1e-9", max_err)};

    // Pure translation by (2,4,6): real part identity, dual part
    // 0.5*(0,t)*(1,0,0,0) = (0,1,2,3), every component exact.
    RigidTransform shift;
    shift.translation = {2.0, 4.0, 6.0};
    const DualQuaternion ds = dualquat_from_transform(shift);
    const bool shift_ok = ds.real.w == 1.0 && ds.real.x == 0.0 &&
                          ds.real.y == 0.0 && ds.real.z == 0.0 &&
                          ds.dual.w == 0.0 && ds.dual.x == 1.0 &&
                          ds.dual.y == 2.0 && ds.dual.z == 3.0;
    if (!shift_ok) return {false, "pure-translation closed form not exact"};

    // Pure rotation, a quarter turn about z from the exact integer matrix.
    // Hand-derived through the trace branch: s = 2*sqrt(2), w = s/4,
    // z = 2/s, then one normalization; the dual part is exactly zero.
    RigidTransform quarter;
    quarter.rotation = Mat3{{0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0}};
    const DualQuaternion dq = dualquat_from_transform(quarter);
    const double s = std::sqrt(2.0) * 2.0;
    const double w0 = 0.25 * s;
    const double z0 = 2.0 / s;
    const double inv_n =
        1.0 / std::sqrt(((w0 * w0 + 0.0 * 0.0) + 0.0 * 0.0) + z0 * z0);
    const bool rot_ok = dq.real.w == w0 * inv_n && dq.real.x == 0.0 &&
                        dq.real.y == 0.0 && dq.real.z == z0 * inv_n &&
                        dq.dual.w == 0.0 && dq.dual.x == 0.0 &&
                        dq.dual.y == 0.0 && dq.dual.z == 0.0;
    if (!rot_ok) return {false, "pure-rotation closed form not exact"};

    return {true, fmt("1000 round trips max err %.1e; closed forms exact",
                      max_err)};
}

// 3. Chordal rotation error equals the axis-angle rotation angle within
//    1e-9 over 1000 rotations; both error metrics match brute-force
//    recomputation.
Outcome criterion_metrics() {
    Rng rng(20260802);
    const RigidTransform ident;
    double max_angle_diff = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double angle_deg = rng.uniform(0.005, 179.995);
        RigidTransform t;
        t.rotation = quat_to_rotation(
            quat_from_axis_angle(rng.unit_vector(), deg_to_rad(angle_deg)));
        max_angle_diff =
            std::max(max_angle_diff,
                     std::abs(rotation_error_chordal(t, ident) - angle_deg));
    }
    if (!(max_angle_diff < 1e-9))
        return {false, fmt("angle mismatch %.2e >= 1e-9", max_angle_diff)};

    double max_t_diff = 0.0, max_r_diff = 0.0;
    for (int i = 0; i < 200; ++i) {
        const RigidTransform a = random_pose(rng, 0.01, 179.9, 5.0);
        const RigidTransform b = random_pose(rng, 0.01, 179.9, 5.0);
        const double dx = a.translation.x - b.translation.x;
        const double dy = a.translation.y - b.translation.y;
        const double dz = a.translation.z - b.translation.z;
        const double brute_t = std::sqrt(dx * dx + dy * dy + dz * dz);
        max_t_diff = std::max(max_t_diff,
                              std::abs(translation_error(a, b) - brute_t));

        double fro2 = 0.0;
        for (int k = 0; k < 9; ++k) {
            const double d = a.rotation.m[k] - b.rotation.m[k];
            fro2 += d * d;
        }
        const double brute_r = rad_to_deg(
            2.0 * std::asin(std::min(1.0, std::sqrt(fro2) / std::sqrt(8.0))));
        max_r_diff = std::max(
            max_r_diff, std::abs(rotation_error_chordal(a, b) - brute_r));
    }
    if (!(max_t_diff < 1e-12 && max_r_diff < 1e-9)) {
        return {false, fmt("brute-force mismatch: t %.2e, r %.2e", max_t_diff,
                           max_r_diff)};
    }
    return {true, fmt("angle match %.1e; brute-force diffs t %.1e, r %.1e",
                      max_angle_diff, max_t_diff, max_r_diff)};
}

// 4. Farthest point sampling and capped radius search reproduce O(n^2)
//    brute-force oracles index-for-index on 500 seeded clouds, in < 30 s.
Outcome criterion_spatial() {
    const double t0 = now_seconds();
    Rng rng(20260803);
    std::size_t fps_runs = 0, radius_queries = 0;

    for (int c = 0; c < 500; ++c) {
        const std::size_t n = 1 + rng.uniform_index(256);
        PointCloud cloud;
        for (std::size_t i = 0; i < n; ++i) {
            cloud.add_point({rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                             rng.uniform(-1.0, 1.0)});
        }
        const auto d2_to = [&](std::size_t i, double px, double py,
                               double pz) {
            const double dx = cloud.xs()[i] - px;
            const double dy = cloud.ys()[i] - py;
            const double dz = cloud.zs()[i] - pz;
            return ((dx * dx) + (dy * dy)) + (dz * dz);
        };

        const std::uint32_t k =
            1 + static_cast<std::uint32_t>(rng.uniform_index(n));
        const auto impl = farthest_point_sampling(cloud, k);

        std::uint32_t seed_idx = 0;
        for (std::uint32_t i = 1; i < n; ++i) {
            const std::array<double, 3> a{cloud.xs()[i], cloud.ys()[i],
                                          cloud.zs()[i]};
            const std::array<double, 3> b{cloud.xs()[seed_idx],
                                          cloud.ys()[seed_idx],
                                          cloud.zs()[seed_idx]};
            if (a < b) seed_idx = i;
        }
        std::vector<std::uint32_t> oracle{seed_idx};
        std::vector<char> taken(n, 0);
        taken[seed_idx] = 1;
        std::vector<double> min_d2(n);
        for (std::size_t i = 0; i < n; ++i) {
            min_d2[i] = d2_to(i, cloud.xs()[seed_idx], cloud.ys()[seed_idx],
                              cloud.zs()[seed_idx]);
        }
        while (oracle.size() < k) {
            std::uint32_t best = UINT32_MAX;
            double best_d2 = -1.0;
            for (std::uint32_t i = 0; i < n; ++i) {
                if (!taken[i] && min_d2[i] > best_d2) {
                    best_d2 = min_d2[i];
                    best = i;
                }
            }
            oracle.push_back(best);
            taken[best] = 1;
            for (std::size_t i = 0; i < n; ++i) {
                min_d2[i] = std::min(
                    min_d2[i], d2_to(i, cloud.xs()[best], cloud.ys()[best],
                                     cloud.zs()[best]));
            }
        }
        if (impl != oracle)
            return {false, fmt("FPS mismatch on cloud %d (n=%zu, k=%u)", c, n,
                               k)};
        ++fps_runs;

        const double radius = rng.uniform(0.15, 0.6);
        const NeighborIndex index(cloud, radius);
        for (int q = 0; q < 20; ++q) {
            const Vec3 center =
                (q % 2 == 0)
                    ? Vec3{rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2),
                           rng.uniform(-1.2, 1.2)}
                    : cloud.point(rng.uniform_index(n));
            const std::uint32_t cap =
                1 + static_cast<std::uint32_t>(rng.uniform_index(12));
            const auto got = index.radius_neighbors(center, cap);

            std::vector<std::pair<double, std::uint32_t>> hits;
            for (std::size_t i = 0; i < n; ++i) {
                const double d2 = d2_to(i, center.x, center.y, center.z);
                if (d2 < radius * radius)
                    hits.emplace_back(d2, static_cast<std::uint32_t>(i));
            }
            std::sort(hits.begin(), hits.end());
            if (hits.size() > cap) hits.resize(cap);
            std::vector<std::uint32_t> expect;
            for (const auto& [d2, i] : hits) expect.push_back(i);
            if (got != expect)
                return {false,
                        fmt("radius query mismatch on cloud %d query %d", c,
                            q)};
            ++radius_queries;
        }
    }
    const double secs = now_seconds() - t0;
    if (!(secs < 30.0)) return {false, fmt("too slow: %.1f s >= 30 s", secs)};
    return {true, fmt("%zu FPS runs + %zu radius queries exact, %.1f s "
                      "(limit 30 s)",
                      fps_runs, radius_queries, secs)};
}

// 5. Point-to-point ICP on noise-free shapes with perturbations at or below
//    0.1 units / 5 degrees recovers ground truth (t < 1e-6, r < 1e-4 deg)
//    within 50 iterations in at least 99 of 100 seeded trials.
Outcome criterion_icp() {
    PerturbationSpec perturb;
    perturb.gaussian = false;
    perturb.t_min = 0.02;
    perturb.t_max = 0.1;
    perturb.angle_min_deg = 1.0;
    perturb.angle_max_deg = 5.0;
    perturb.noise_std = 0.0;

    IcpConfig config;
    config.variant = IcpVariant::point2point;
    config.max_correspondence_distance = 0.5;
    config.max_iterations = 50;
    config.convergence_threshold = 1e-10;

    int successes = 0;
    double worst_t = 0.0, worst_r = 0.0;
    int worst_iters = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const RegistrationPair pair = make_pair(
            box_cloud(1500, 40000 + trial), perturb, 41000 + trial);
        const IcpResult result =
            icp(pair.template_cloud, pair.source_cloud, config);
        const double t_err = translation_error(result.transform, pair.gt);
        const double r_err = rotation_error_chordal(result.transform, pair.gt);
        if (result.converged && result.iterations <= 50 && t_err < 1e-6 &&
            r_err < 1e-4) {
            ++successes;
            worst_t = std::max(worst_t, t_err);
            worst_r = std::max(worst_r, r_err);
            worst_iters = std::max(worst_iters, static_cast<int>(result.iterations));
        }
    }
    if (successes < 99)
        return {false, fmt("only %d/100 trials converged to tolerance",
                           successes)};
    return {true, fmt("%d/100 recovered gt; worst t %.1e, r %.1e deg, "
                      "%d iterations",
                      successes, worst_t, worst_r, worst_iters)};
}

// 6. Training the reduced model on 512-point shapes (translation [0,0.1],
//    rotation [0,5] deg, noise 0.02 on both clouds) reaches held-out mean
//    r_err < 1.5 deg and t_err < 0.03 units within 5000 steps / 15 min.
Outcome criterion_learning() {
    const ModelConfig cfg = smoke_config();
    std::vector<RegistrationPair> train_set, test_set;
    for (std::uint64_t i = 0; i < 256; ++i)
        train_set.push_back(smoke_pair(1000 + i, 5000 + i));
    for (std::uint64_t i = 0; i < 20; ++i)
        test_set.push_back(smoke_pair(90000 + i, 95000 + i));

    TrainConfig tc;
    tc.epochs = 80;
    tc.batch_size = 8;
    tc.seed = 1;
    tc.lr = 1e-3;
    tc.weight_decay = 1e-4;
    tc.lr_decay_every = 30;
    tc.lr_decay_factor = 0.5;

    const double t0 = now_seconds();
    const TrainResult result =
        train(train_set, cfg, LossConfig::modelnet(), tc);
    const double train_secs = now_seconds() - t0;
    const std::size_t steps = result.history.size();

    double r_sum = 0.0, t_sum = 0.0, r_inj = 0.0, t_inj = 0.0;
    const RigidTransform ident;
    for (const auto& pair : test_set) {
        const auto [dq, transform] = model_forward(
            pair.template_cloud, pair.source_cloud, cfg, result.params);
        r_sum += rotation_error_chordal(transform, pair.gt);
        t_sum += translation_error(transform, pair.gt);
        r_inj += rotation_error_chordal(ident, pair.gt);
        t_inj += translation_error(ident, pair.gt);
    }
    const double n = static_cast<double>(test_set.size());
    const double mean_r = r_sum / n, mean_t = t_sum / n;

    if (steps > 5000) return {false, fmt("%zu steps > 5000", steps)};
    if (!(train_secs < 900.0))
        return {false, fmt("training took %.0f s >= 900 s", train_secs)};
    if (!(mean_r < 1.5 && mean_t < 0.03)) {
        return {false, fmt("test errors r %.3f deg (< 1.5), t %.4f (< 0.03) "
                           "after %zu steps",
                           mean_r, mean_t, steps)};
    }
    return {true, fmt("r %.2f deg (injected %.2f), t %.4f (injected %.4f), "
                      "%zu steps, %.0f s",
                      mean_r, r_inj / n, mean_t, t_inj / n, steps,
                      train_secs)};
}

// 7. Odometry over a 20-scan sequence with cached set abstraction is
//    bit-identical to the uncached path and runs exactly 20 SA invocations.
Outcome criterion_caching() {
    const PointCloud world = box_cloud(600, 77);
    Rng rng(78);
    std::vector<RigidTransform> poses{RigidTransform{}};
    for (int t = 1; t < 20; ++t) {
        RigidTransform step;
        step.rotation = quat_to_rotation(quat_from_axis_angle(
            rng.unit_vector(), deg_to_rad(rng.uniform(0.5, 2.0))));
        const Vec3 dir = rng.unit_vector();
        step.translation = dir * rng.uniform(0.01, 0.05);
        poses.push_back(compose(poses.back(), step));
    }
    std::vector<PointCloud> scans;
    for (const auto& pose : poses)
        scans.push_back(apply(inverse(pose), world));

    const ModelConfig cfg = ModelConfig::toy();
    const ModelParams params = init_params(cfg, 5);

    std::vector<DualQuaternion> uncached;
    for (std::size_t t = 1; t < scans.size(); ++t)
        uncached.push_back(
            model_forward(scans[t - 1], scans[t], cfg, params).first);

    const std::uint64_t sa_before = sa_invocation_count();
    std::vector<DualQuaternion> cached;
    AbstractedCloud prev = set_abstraction(scans[0], cfg, params);
    for (std::size_t t = 1; t < scans.size(); ++t) {
        auto [dq, sa] = odometry_forward_cached(prev, scans[t], cfg, params);
        cached.push_back(dq);
        prev = std::move(sa);
    }
    const std::uint64_t sa_used = sa_invocation_count() - sa_before;

    for (std::size_t i = 0; i < uncached.size(); ++i) {
        if (std::memcmp(&uncached[i], &cached[i], sizeof(DualQuaternion)) != 0)
            return {false, fmt("step %zu differs between cached and uncached",
                               i + 1)};
        const RigidTransform a = dualquat_to_transform(uncached[i]);
        const RigidTransform b = dualquat_to_transform(cached[i]);
        if (std::memcmp(&a, &b, sizeof(RigidTransform)) != 0)
            return {false, fmt("step %zu transform differs", i + 1)};
    }
    if (sa_used != 20)
        return {false, fmt("%llu SA invocations, expected 20",
                           static_cast<unsigned long long>(sa_used))};
    return {true, "19 steps bit-identical to uncached, exactly 20 SA "
                  "invocations"};
}

// Plain 4x4 homogeneous helpers, written independently of the library's
// pose algebra for the brute-force trajectory evaluator.
using Mat4 = std::array<double, 16>;

Mat4 mat4_of(const RigidTransform& t) {
    Mat4 m{};
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m[4 * r + c] = t.rotation(r, c);
    m[3] = t.translation.x;
    m[7] = t.translation.y;
    m[11] = t.translation.z;
    m[15] = 1.0;
    return m;
}

Mat4 mat4_mul(const Mat4& a, const Mat4& b) {
    Mat4 out{};
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c)
            for (int k = 0; k < 4; ++k)
                out[4 * r + c] += a[4 * r + k] * b[4 * k + c];
    return out;
}

Mat4 mat4_inv_rigid(const Mat4& m) {
    Mat4 out{};
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) out[4 * r + c] = m[4 * c + r];
        out[4 * r + 3] = -(out[4 * r + 0] * m[3] + out[4 * r + 1] * m[7] +
                           out[4 * r + 2] * m[11]);
    }
    out[15] = 1.0;
    return out;
}

// 8. The segment-error evaluator matches an independently written
//    brute-force version within 1e-9, and the 1.01-scaled straight line
//    yields exactly (1.0 %, 0).
Outcome criterion_segment_metric() {
    Rng rng(20260804);
    Trajectory gt, pred;
    gt.poses.push_back(RigidTransform{});
    for (int i = 1; i < 300; ++i) {
        RigidTransform step;
        step.rotation = rotation_from_euler_zyx(
            deg_to_rad(rng.uniform(-1.5, 1.5)),
            deg_to_rad(rng.uniform(-0.3, 0.3)), 0.0);
        step.translation = {rng.uniform(2.5, 4.5), rng.uniform(-0.1, 0.1),
                            rng.uniform(-0.05, 0.05)};
        gt.poses.push_back(compose(gt.poses.back(), step));
    }
    for (const auto& pose : gt.poses) {
        RigidTransform drift;
        drift.rotation = quat_to_rotation(quat_from_axis_angle(
            rng.unit_vector(), deg_to_rad(rng.uniform(0.0, 0.15))));
        const Vec3 dir = rng.unit_vector();
        drift.translation = dir * rng.uniform(0.0, 0.05);
        pred.poses.push_back(compose(pose, drift));
    }
    const SegmentErrors lib = kitti_segment_errors(gt, pred);

    std::vector<double> arc(gt.poses.size(), 0.0);
    for (std::size_t i = 1; i < gt.poses.size(); ++i) {
        const double dx =
            gt.poses[i].translation.x - gt.poses[i - 1].translation.x;
        const double dy =
            gt.poses[i].translation.y - gt.poses[i - 1].translation.y;
        const double dz =
            gt.poses[i].translation.z - gt.poses[i - 1].translation.z;
        arc[i] = arc[i - 1] + std::sqrt(dx * dx + dy * dy + dz * dz);
    }
    double t_sum = 0.0, r_sum = 0.0;
    std::size_t count = 0;
    for (std::size_t start = 0; start < gt.poses.size(); ++start) {
        for (int len = 100; len <= 800; len += 100) {
            std::size_t end = start;
            while (end < gt.poses.size() && arc[end] < arc[start] + len)
                ++end;
            if (end == gt.poses.size()) break;
            const Mat4 gt_rel = mat4_mul(mat4_inv_rigid(mat4_of(gt.poses[start])),
                                         mat4_of(gt.poses[end]));
            const Mat4 pr_rel =
                mat4_mul(mat4_inv_rigid(mat4_of(pred.poses[start])),
                         mat4_of(pred.poses[end]));
            const Mat4 err = mat4_mul(mat4_inv_rigid(pr_rel), gt_rel);
            const double t_err = std::sqrt(err[3] * err[3] + err[7] * err[7] +
                                           err[11] * err[11]);
            double fro2 = 0.0;
            for (int r = 0; r < 3; ++r) {
                for (int c = 0; c < 3; ++c) {
                    const double d = err[4 * r + c] - (r == c ? 1.0 : 0.0);
                    fro2 += d * d;
                }
            }
            const double r_err = rad_to_deg(2.0 * std::asin(std::min(
                                     1.0, std::sqrt(fro2) / std::sqrt(8.0))));
            t_sum += 100.0 * t_err / len;
            r_sum += 100.0 * r_err / len;
            ++count;
        }
    }
    if (count == 0 || count != lib.segment_count)
        return {false, fmt("segment count %zu vs brute force %zu",
                           lib.segment_count, count)};
    const double dt = std::abs(lib.translation_pct -
                               t_sum / static_cast<double>(count));
    const double dr = std::abs(lib.rotation_deg_per_100m -
                               r_sum / static_cast<double>(count));
    if (!(dt < 1e-9 && dr < 1e-9))
        return {false, fmt("brute-force diff t %.2e, r %.2e", dt, dr)};

    // Straight line at 100-unit steps against a 1.01-scaled copy: every
    // quantity is integer-exact, so the metric must be exactly (1.0, 0).
    Trajectory line_gt, line_pred;
    for (int i = 0; i < 10; ++i) {
        RigidTransform g, p;
        g.translation = {100.0 * i, 0.0, 0.0};
        p.translation = {101.0 * i, 0.0, 0.0};
        line_gt.poses.push_back(g);
        line_pred.poses.push_back(p);
    }
    const SegmentErrors line = kitti_segment_errors(line_gt, line_pred);
    if (line.translation_pct != 1.0 || line.rotation_deg_per_100m != 0.0 ||
        line.segment_count != 44) {
        return {false, fmt("straight line gave (%.17g %%, %.17g deg/100, "
                           "%zu segments), expected exactly (1, 0, 44)",
                           line.translation_pct, line.rotation_deg_per_100m,
                           line.segment_count)};
    }
    return {true, fmt("%zu segments, brute-force diff t %.1e, r %.1e; "
                      "scaled line exactly (1.0 %%, 0)",
                      lib.segment_count, dt, dr)};
}

// 9. Model output is invariant to input ordering, and the real-part loss is
//    invariant to positive scaling of the predicted real part.
Outcome criterion_invariance() {
    const ModelConfig cfg = smoke_config();
    const ModelParams params = init_params(cfg, 11);
    const RegistrationPair pair = smoke_pair(123, 456);
    const DualQuaternion base =
        model_forward(pair.template_cloud, pair.source_cloud, cfg, params)
            .first;

    Rng rng(20260805);
    const auto permuted = [&](const PointCloud& cloud) {
        std::vector<std::uint32_t> order(cloud.size());
        for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);
        PointCloud out;
        for (const std::uint32_t i : order) out.add_point(cloud.point(i));
        return out;
    };
    const auto dq_diff = [](const DualQuaternion& a, const DualQuaternion& b) {
        double d = 0.0;
        d = std::max(d, std::abs(a.real.w - b.real.w));
        d = std::max(d, std::abs(a.real.x - b.real.x));
        d = std::max(d, std::abs(a.real.y - b.real.y));
        d = std::max(d, std::abs(a.real.z - b.real.z));
        d = std::max(d, std::abs(a.dual.w - b.dual.w));
        d = std::max(d, std::abs(a.dual.x - b.dual.x));
        d = std::max(d, std::abs(a.dual.y - b.dual.y));
        d = std::max(d, std::abs(a.dual.z - b.dual.z));
        return d;
    };

    double max_diff = 0.0;
    for (int i = 0; i < 3; ++i) {
        const DualQuaternion t_perm =
            model_forward(permuted(pair.template_cloud), pair.source_cloud,
                          cfg, params)
                .first;
        const DualQuaternion s_perm =
            model_forward(pair.template_cloud, permuted(pair.source_cloud),
                          cfg, params)
                .first;
        max_diff = std::max(max_diff, dq_diff(t_perm, base));
        max_diff = std::max(max_diff, dq_diff(s_perm, base));
    }
    if (!(max_diff < 1e-12))
        return {false, fmt("permutation changed output by %.2e", max_diff)};

    // Scaling the raw real part must not move the normalized-real loss.
    // Power-of-two scales commute with rounding, so equality is exact.
    DualQuaternion predicted;
    predicted.real = {0.83, -0.21, 0.34, -0.12};
    predicted.dual = {0.4, -0.3, 0.2, 0.1};
    Rng pose_rng(20260806);
    const DualQuaternion gt =
        dualquat_from_transform(random_pose(pose_rng, 1.0, 60.0, 0.5));
    const double base_loss = loss_real(predicted, gt);
    double arbitrary_diff = 0.0;
    for (const double k : {2.0, 4.0, 1024.0, 0.5, 0.0078125}) {
        DualQuaternion scaled = predicted;
        scaled.real = scaled.real * k;
        if (loss_real(scaled, gt) != base_loss)
            return {false, fmt("real-part scaling by %g changed the loss", k)};
    }
    for (const double k : {3.0, 0.7, 123.456}) {
        DualQuaternion scaled = predicted;
        scaled.real = scaled.real * k;
        arbitrary_diff = std::max(
            arbitrary_diff, std::abs(loss_real(scaled, gt) - base_loss));
    }
    if (!(arbitrary_diff < 1e-12))
        return {false,
                fmt("non-dyadic scaling moved the loss by %.2e",
                    arbitrary_diff)};
    return {true, fmt("permutation diff %.1e; scaling exact (pow-2), "
                      "%.1e otherwise",
                      max_diff, arbitrary_diff)};
}

// 10. Two identically seeded runs produce byte-identical loss histories and
//     checkpoints, and identical reports once timing columns are excluded.
Outcome criterion_reproducibility() {
    const fs::path dir = fs::temp_directory_path() / "pcreg_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);

    std::vector<RegistrationPair> dataset;
    for (std::uint64_t i = 0; i < 8; ++i)
        dataset.push_back(make_pair(box_cloud(256, 60000 + i),
                                    PerturbationSpec::modelnet(), 61000 + i));

    const ModelConfig cfg = ModelConfig::toy();
    TrainConfig tc;
    tc.epochs = 2;
    tc.batch_size = 4;
    tc.seed = 9;

    const auto run_once = [&](const fs::path& csv, const fs::path& ckpt) {
        const TrainResult result =
            train(dataset, cfg, LossConfig::modelnet(), tc);
        write_loss_csv(csv.string(), result.history);
        save_checkpoint(ckpt.string(), cfg, result.params);
    };
    run_once(dir / "a.csv", dir / "a.ckpt");
    run_once(dir / "b.csv", dir / "b.ckpt");
    if (read_file(dir / "a.csv") != read_file(dir / "b.csv"))
        return {false, "loss histories differ between identical runs"};
    if (read_file(dir / "a.ckpt") != read_file(dir / "b.ckpt"))
        return {false, "checkpoints differ between identical runs"};

    const RegistrationMethod identity_method =
        [](const PointCloud&, const PointCloud&) { return RigidTransform{}; };
    const auto strip_seconds = [](const std::string& csv) {
        std::istringstream in(csv);
        std::string line, out;
        bool header = true;
        while (std::getline(in, line)) {
            if (header) {
                out += line + "\n";
                header = false;
                continue;
            }
            // pair,t_err,r_err,seconds,failed: cut the seconds field.
            std::size_t commas = 0, begin = 0, end = line.size();
            for (std::size_t i = 0; i < line.size(); ++i) {
                if (line[i] != ',') continue;
                ++commas;
                if (commas == 3) begin = i;
                if (commas == 4) end = i;
            }
            out += line.substr(0, begin) + line.substr(end) + "\n";
        }
        return out;
    };
    const auto report_once = [&](const fs::path& path) {
        const EvaluationReport report =
            evaluate_pairs(identity_method, dataset, "identity");
        export_report(report, path.string());
        nlohmann::ordered_json summary =
            nlohmann::ordered_json::parse(report_summary_json(report));
        summary.erase("total_seconds");
        return summary.dump();
    };
    const std::string summary_a = report_once(dir / "a_report.csv");
    const std::string summary_b = report_once(dir / "b_report.csv");
    if (strip_seconds(read_file(dir / "a_report.csv")) !=
        strip_seconds(read_file(dir / "b_report.csv")))
        return {false, "reports differ beyond their timing column"};
    if (summary_a != summary_b)
        return {false, "report summaries differ beyond total_seconds"};

    fs::remove_all(dir);
    return {true, "loss history and checkpoint byte-identical; reports "
                  "identical with timing excluded"};
}

}  // namespace

int main() {
    struct Entry {
        const char* name;
        std::function<Outcome()> run;
    };
    const Entry entries[] = {
        {"gradient checks", criterion_gradients},
        {"dual-quaternion algebra", criterion_dualquat},
        {"error metrics", criterion_metrics},
        {"spatial search oracles", criterion_spatial},
        {"icp convergence", criterion_icp},
        {"learning smoke test", criterion_learning},
        {"odometry caching", criterion_caching},
        {"segment-error metric", criterion_segment_metric},
        {"invariance", criterion_invariance},
        {"reproducibility", criterion_reproducibility},
    };

    int failures = 0;
    int id = 0;
    for (const Entry& entry : entries) {
        ++id;
        const double t0 = now_seconds();
        Outcome outcome;
        try {
            outcome = entry.run();
        } catch (const std::exception& e) {
            outcome = {false, fmt("exception: %s", e.what())};
        }
        const double secs = now_seconds() - t0;
        std::printf("[%2d/10] %s  %-24s %s (%.1f s)\n", id,
                    outcome.pass ? "PASS" : "FAIL", entry.name,
                    outcome.detail.c_str(), secs);
        std::fflush(stdout);
        if (!outcome.pass) ++failures;
    }
    std::printf("acceptance: %d/10 passed\n", 10 - failures);
    return failures == 0 ? 0 : 1;
}
