#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "pcreg/data.hpp"
#include "pcreg/evaluation.hpp"
#include "pcreg/gradcheck.hpp"
#include "pcreg/icp.hpp"
#include "pcreg/loss.hpp"
#include "pcreg/model.hpp"
#include "pcreg/rng.hpp"

namespace fs = std::filesystem;
using namespace pcreg;

namespace {

constexpr const char* kVersion = "1.0.0";

// PCREG_THREADS caps internal parallelism; unset or "0" means one worker.
unsigned thread_override() {
    const char* raw = std::getenv("PCREG_THREADS");
    if (raw == nullptr || *raw == '\0') return 1;
    char* end = nullptr;
    const long v = std::strtol(raw, &end, 10);
    if (end == raw || *end != '\0' || v < 0) {
        throw InvalidArgumentError(std::string("PCREG_THREADS must be a "
                                               "non-negative integer, got '") +
                                   raw + "'");
    }
    return v == 0 ? 1 : static_cast<unsigned>(v);
}

void write_run_manifest(const fs::path& path, const std::string& command,
                        std::uint64_t seed,
                        const nlohmann::ordered_json& config,
                        const std::vector<std::string>& inputs,
                        const std::vector<std::string>& outputs) {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["version"] = kVersion;
    j["seed"] = seed;
    j["config"] = config;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path.string());
    f << j.dump(2) << '\n';
    if (!f) throw IoError("failed writing " + path.string());
}

PointCloud load_cloud(const std::string& path) {
    const std::string ext = fs::path(path).extension().string();
    if (ext == ".ply") return read_ply(path);
    if (ext == ".bin") return read_kitti_bin(path);
    throw InvalidArgumentError("unsupported cloud file extension '" + ext +
                               "' (expected .ply or .bin): " + path);
}

ModelConfig named_config(const std::string& name) {
    if (name == "toy") return ModelConfig::toy();
    if (name == "modelnet") return ModelConfig::modelnet();
    if (name == "kitti") return ModelConfig::kitti();
    throw InvalidArgumentError("unknown config preset: " + name);
}

ShapeFamily named_family(const std::string& name) {
    if (name == "sphere") return ShapeFamily::sphere;
    if (name == "box") return ShapeFamily::box;
    if (name == "cylinder") return ShapeFamily::cylinder;
    if (name == "torus") return ShapeFamily::torus;
    if (name == "plane") return ShapeFamily::plane;
    throw InvalidArgumentError("unknown shape family: " + name);
}

// --- gen-data --------------------------------------------------------------

struct GenDataOptions {
    std::string shape = "box";
    std::vector<double> size_units = {2.0, 1.0, 0.6};
    std::uint32_t samples = 1000;
    bool with_normals = false;
    std::uint32_t pairs = 16;
    std::uint64_t seed = 0;
    std::string preset = "modelnet";
    double t_min_units = -1.0, t_max_units = -1.0;
    double angle_min_deg = -1.0, angle_max_deg = -1.0;
    double noise_std_units = -1.0;
    std::string out;
};

ShapeSpec make_shape_spec(const GenDataOptions& o) {
    ShapeSpec spec;
    spec.family = named_family(o.shape);
    for (std::size_t i = 0; i < o.size_units.size() && i < 3; ++i) {
        spec.size[i] = o.size_units[i];
    }
    spec.samples = o.samples;
    spec.with_normals = o.with_normals;
    return spec;
}

PerturbationSpec make_perturbation(const GenDataOptions& o) {
    PerturbationSpec p = o.preset == "kitti" ? PerturbationSpec::kitti()
                                             : PerturbationSpec::modelnet();
    if (o.t_min_units >= 0.0) p.t_min = o.t_min_units;
    if (o.t_max_units >= 0.0) p.t_max = o.t_max_units;
    if (o.angle_min_deg >= 0.0) p.angle_min_deg = o.angle_min_deg;
    if (o.angle_max_deg >= 0.0) p.angle_max_deg = o.angle_max_deg;
    if (o.noise_std_units >= 0.0) p.noise_std = o.noise_std_units;
    return p;
}

// Pair i depends only on (seed, i), so any worker split yields identical
// datasets.
std::vector<RegistrationPair> generate_pairs(const ShapeSpec& spec,
                                             const PerturbationSpec& perturb,
                                             std::uint32_t n_pairs,
                                             std::uint64_t seed,
                                             unsigned threads) {
    spec.validate();
    perturb.validate();
    std::vector<RegistrationPair> out(n_pairs);
    const auto worker = [&](std::uint32_t begin, std::uint32_t end) {
        for (std::uint32_t i = begin; i < end; ++i) {
            const PointCloud cloud =
                sample_shape(spec, seed ^ (0x9E3779B97F4A7C15ull * (i + 1)));
            out[i] = make_pair(cloud, perturb, seed + i);
        }
    };
    threads = std::max(1u, std::min(threads, n_pairs == 0 ? 1u : n_pairs));
    if (threads == 1) {
        worker(0, n_pairs);
    } else {
        std::vector<std::thread> pool;
        const std::uint32_t chunk = (n_pairs + threads - 1) / threads;
        for (unsigned t = 0; t < threads; ++t) {
            const std::uint32_t begin = t * chunk;
            const std::uint32_t end = std::min(n_pairs, begin + chunk);
            if (begin >= end) break;
            pool.emplace_back(worker, begin, end);
        }
        for (std::thread& t : pool) t.join();
    }
    return out;
}

nlohmann::ordered_json perturbation_json(const PerturbationSpec& p) {
    nlohmann::ordered_json j;
    j["gaussian"] = p.gaussian;
    if (p.gaussian) {
        j["t_std"] = p.t_std;
        j["euler_std_deg"] = p.euler_std_deg;
    } else {
        j["t_min"] = p.t_min;
        j["t_max"] = p.t_max;
        j["angle_min_deg"] = p.angle_min_deg;
        j["angle_max_deg"] = p.angle_max_deg;
    }
    j["noise_std"] = p.noise_std;
    return j;
}

int run_gen_data(const GenDataOptions& o) {
    const ShapeSpec spec = make_shape_spec(o);
    const PerturbationSpec perturb = make_perturbation(o);
    const auto pairs =
        generate_pairs(spec, perturb, o.pairs, o.seed, thread_override());
    write_dataset(o.out, pairs);

    nlohmann::ordered_json config;
    config["shape"] = o.shape;
    config["size_units"] = o.size_units;
    config["samples"] = o.samples;
    config["with_normals"] = o.with_normals;
    config["pairs"] = o.pairs;
    config["perturbation"] = perturbation_json(perturb);
    write_run_manifest(fs::path(o.out) / "run_manifest.json", "gen-data",
                       o.seed, config, {},
                       {o.out + "/manifest.json", o.out + "/poses.txt"});
    std::cout << "pairs_written: " << pairs.size() << "\n"
              << "dataset: " << o.out << "/manifest.json\n";
    return 0;
}

// --- train -------------------------------------------------------------------

struct TrainOptions {
    std::string data;
    std::string config = "toy";
    std::string config_json;
    double beta = 1.0;
    TrainConfig train;
    bool per_epoch_checkpoints = false;
    std::string out;
};

ModelConfig resolve_model_config(const std::string& preset,
                                 const std::string& json_path) {
    if (json_path.empty()) return named_config(preset);
    std::ifstream f(json_path);
    if (!f) throw IoError("cannot open: " + json_path);
    std::stringstream buffer;
    buffer << f.rdbuf();
    return model_config_from_json(buffer.str());
}

int run_train(const TrainOptions& o) {
    const ModelConfig model_config =
        resolve_model_config(o.config, o.config_json);
    LossConfig loss_config;
    loss_config.beta = o.beta;

    const auto dataset = read_dataset(o.data);
    fs::create_directories(o.out);
    TrainConfig train_config = o.train;
    if (o.per_epoch_checkpoints) {
        train_config.checkpoint_dir = (fs::path(o.out) / "epochs").string();
    }

    const TrainResult result =
        train(dataset, model_config, loss_config, train_config);

    const std::string ckpt_path = (fs::path(o.out) / "model.ckpt").string();
    const std::string csv_path = (fs::path(o.out) / "loss.csv").string();
    save_checkpoint(ckpt_path, model_config, result.params);
    write_loss_csv(csv_path, result.history);

    nlohmann::ordered_json config;
    config["model"] = nlohmann::json::parse(model_config.canonical_json());
    config["beta"] = o.beta;
    config["epochs"] = train_config.epochs;
    config["batch_size"] = train_config.batch_size;
    config["lr"] = train_config.lr;
    config["weight_decay"] = train_config.weight_decay;
    config["lr_decay_every"] = train_config.lr_decay_every;
    config["lr_decay_factor"] = train_config.lr_decay_factor;
    write_run_manifest(fs::path(o.out) / "run_manifest.json", "train",
                       train_config.seed, config, {o.data},
                       {ckpt_path, csv_path});

    std::cout << "steps: " << result.history.size() << "\n";
    if (!result.history.empty()) {
        std::cout << "first_loss: " << result.history.front().loss << "\n"
                  << "final_loss: " << result.history.back().loss << "\n";
    }
    std::cout << "checkpoint: " << ckpt_path << "\n"
              << "loss_csv: " << csv_path << "\n"
              << "params_fingerprint: " << result.params.fingerprint() << "\n";
    return 0;
}

// --- register ----------------------------------------------------------------

struct MethodOptions {
    std::string method = "icp-p2p";
    std::string checkpoint;
    double max_corr_dist_units = 1.0;
    std::uint32_t max_iterations = 50;
    double convergence_threshold = 1e-8;
};

IcpConfig make_icp_config(const MethodOptions& o, IcpVariant variant) {
    IcpConfig config;
    config.max_correspondence_distance = o.max_corr_dist_units;
    config.max_iterations = o.max_iterations;
    config.convergence_threshold = o.convergence_threshold;
    config.variant = variant;
    return config;
}

// The returned method captures everything by value; fingerprint is the
// model-config fingerprint (0 for the classical methods).
std::pair<RegistrationMethod, std::uint64_t> make_method(
    const MethodOptions& o) {
    if (o.method == "identity") {
        return {[](const PointCloud&, const PointCloud&) {
                    return RigidTransform{};
                },
                0};
    }
    if (o.method == "icp-p2p" || o.method == "icp-p2plane") {
        const IcpConfig config = make_icp_config(
            o, o.method == "icp-p2p" ? IcpVariant::point2point
                                     : IcpVariant::point2plane);
        return {[config](const PointCloud& tmpl, const PointCloud& source) {
                    return icp(tmpl, source, config).transform;
                },
                0};
    }
    if (o.method == "model") {
        if (o.checkpoint.empty()) {
            throw InvalidArgumentError(
                "--method model requires --checkpoint");
        }
        auto [config, params] = load_checkpoint(o.checkpoint);
        const std::uint64_t fingerprint = config.fingerprint();
        return {[config = std::move(config), params = std::move(params)](
                    const PointCloud& tmpl, const PointCloud& source) {
                    return model_forward(tmpl, source, config, params).second;
                },
                fingerprint};
    }
    throw InvalidArgumentError("unknown method: " + o.method);
}

nlohmann::ordered_json method_json(const MethodOptions& o) {
    nlohmann::ordered_json j;
    j["method"] = o.method;
    if (o.method == "model") {
        j["checkpoint"] = o.checkpoint;
    } else if (o.method != "identity") {
        j["max_corr_dist_units"] = o.max_corr_dist_units;
        j["max_iterations"] = o.max_iterations;
        j["convergence_threshold"] = o.convergence_threshold;
    }
    return j;
}

std::string pose_row(const RigidTransform& t) {
    std::ostringstream ss;
    ss.precision(17);
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) ss << t.rotation(r, c) << ' ';
        ss << (r == 0   ? t.translation.x
               : r == 1 ? t.translation.y
                        : t.translation.z);
        if (r < 2) ss << ' ';
    }
    return ss.str();
}

struct RegisterOptions {
    std::string template_path, source_path;
    MethodOptions method;
    std::uint64_t seed = 0;
    std::string out;
};

int run_register(const RegisterOptions& o) {
    const PointCloud template_cloud = load_cloud(o.template_path);
    const PointCloud source_cloud = load_cloud(o.source_path);
    const auto [method, fingerprint] = make_method(o.method);

    const auto start = std::chrono::steady_clock::now();
    const RigidTransform estimate = method(template_cloud, source_cloud);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();

    std::cout << "pose: " << pose_row(estimate) << "\n"
              << "seconds: " << seconds << "\n";
    if (!o.out.empty()) {
        write_poses(o.out, {{estimate}});
        nlohmann::ordered_json config = method_json(o.method);
        config["config_fingerprint"] = fingerprint;
        write_run_manifest(o.out + ".manifest.json", "register", o.seed,
                           config, {o.template_path, o.source_path}, {o.out});
    }
    return 0;
}

// --- odometry ------------------------------------------------------------------

struct OdometryOptions {
    std::string scans;
    std::string checkpoint;
    std::uint64_t seed = 0;
    std::string out;
};

std::vector<std::string> read_scan_list(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open: " + path);
    const fs::path base = fs::path(path).parent_path();
    std::vector<std::string> scans;
    std::string line;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        scans.push_back((base / line).string());
    }
    if (scans.empty()) throw EmptyDatasetError("scan list is empty: " + path);
    return scans;
}

int run_odometry(const OdometryOptions& o) {
    const auto scan_paths = read_scan_list(o.scans);
    auto [config, params] = load_checkpoint(o.checkpoint);

    const auto start = std::chrono::steady_clock::now();
    const std::uint64_t sa_before = sa_invocation_count();

    Trajectory traj;
    traj.poses.push_back(RigidTransform{});
    AbstractedCloud prev =
        set_abstraction(load_cloud(scan_paths[0]), config, params);
    for (std::size_t t = 1; t < scan_paths.size(); ++t) {
        auto [dq, next_sa] =
            odometry_forward_cached(prev, load_cloud(scan_paths[t]), config,
                                    params);
        const RigidTransform rel = dualquat_to_transform(dq);
        traj.poses.push_back(compose(traj.poses.back(), rel));
        prev = std::move(next_sa);
    }
    const std::uint64_t sa_used = sa_invocation_count() - sa_before;
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();

    write_poses(o.out, traj.poses);
    nlohmann::ordered_json manifest_config;
    manifest_config["checkpoint"] = o.checkpoint;
    manifest_config["config_fingerprint"] = config.fingerprint();
    manifest_config["scans"] = scan_paths.size();
    write_run_manifest(o.out + ".manifest.json", "odometry", o.seed,
                       manifest_config, {o.scans}, {o.out});

    std::cout << "scans: " << scan_paths.size() << "\n"
              << "set_abstractions: " << sa_used << "\n"
              << "poses_written: " << traj.poses.size() << "\n"
              << "trajectory: " << o.out << "\n"
              << "seconds: " << seconds << "\n";
    return 0;
}

// --- evaluate ------------------------------------------------------------------

struct EvaluateOptions {
    std::string data;
    std::vector<std::string> methods = {"icp-p2p"};
    MethodOptions method_base;
    std::uint64_t seed = 0;
    std::vector<double> noise_sweep;
    GenDataOptions sweep_gen;
    std::string out;
};

std::string method_file_stem(const std::string& method) {
    std::string stem = method;
    std::replace(stem.begin(), stem.end(), '-', '_');
    return stem;
}

int run_evaluate(const EvaluateOptions& o) {
    fs::create_directories(o.out);
    std::vector<std::string> inputs, outputs;

    if (o.noise_sweep.empty()) {
        const auto dataset = read_dataset(o.data);
        inputs.push_back(o.data);
        for (const std::string& name : o.methods) {
            MethodOptions mo = o.method_base;
            mo.method = name;
            const auto [method, fingerprint] = make_method(mo);
            const EvaluationReport report =
                evaluate_pairs(method, dataset, name, fingerprint);

            const std::string stem = method_file_stem(name);
            const std::string csv =
                (fs::path(o.out) / (stem + "_report.csv")).string();
            const std::string summary =
                (fs::path(o.out) / (stem + "_summary.json")).string();
            export_report(report, csv);
            std::ofstream sf(summary);
            if (!sf) throw IoError("cannot open for writing: " + summary);
            sf << report_summary_json(report) << '\n';
            outputs.push_back(csv);
            outputs.push_back(summary);

            std::cout << "method: " << name << "\n"
                      << "pairs: " << report.rows.size()
                      << " failed: " << report.failed_count() << "\n"
                      << "t_mean: " << report.translation.mean
                      << " t_rmse: " << report.translation.rmse << "\n"
                      << "r_mean: " << report.rotation.mean
                      << " r_rmse: " << report.rotation.rmse << "\n";
        }
    } else {
        const ShapeSpec spec = make_shape_spec(o.sweep_gen);
        std::vector<NoiseSweepEntry> entries;
        for (const double noise : o.noise_sweep) {
            GenDataOptions level = o.sweep_gen;
            level.noise_std_units = noise;
            const auto pairs =
                generate_pairs(spec, make_perturbation(level),
                               o.sweep_gen.pairs, o.seed, thread_override());
            for (const std::string& name : o.methods) {
                MethodOptions mo = o.method_base;
                mo.method = name;
                const auto [method, fingerprint] = make_method(mo);
                NoiseSweepEntry entry;
                entry.noise_std = noise;
                entry.report = evaluate_pairs(method, pairs, name, fingerprint);
                std::cout << "noise_std: " << noise << " method: " << name
                          << " t_mean: " << entry.report.translation.mean
                          << " r_mean: " << entry.report.rotation.mean << "\n";
                entries.push_back(std::move(entry));
            }
        }
        const std::string sweep_csv = (fs::path(o.out) / "sweep.csv").string();
        export_noise_sweep(entries, sweep_csv);
        outputs.push_back(sweep_csv);
        std::cout << "sweep_csv: " << sweep_csv << "\n";
    }

    nlohmann::ordered_json config;
    config["methods"] = o.methods;
    config["method_settings"] = method_json(o.method_base);
    if (!o.noise_sweep.empty()) {
        config["noise_sweep"] = o.noise_sweep;
        config["shape"] = o.sweep_gen.shape;
        config["size_units"] = o.sweep_gen.size_units;
        config["samples"] = o.sweep_gen.samples;
        config["pairs"] = o.sweep_gen.pairs;
    }
    write_run_manifest(fs::path(o.out) / "run_manifest.json", "evaluate",
                       o.seed, config, inputs, outputs);
    return 0;
}

// --- gradcheck -------------------------------------------------------------------

int run_gradcheck(std::uint64_t seed, double tolerance) {
    const auto checks = run_gradient_checks(seed, tolerance);
    for (const GradCheck& c : checks) {
        std::cout << (c.passed ? "ok   " : "FAIL ") << c.name;
        for (std::size_t pad = c.name.size(); pad < 20; ++pad) std::cout << ' ';
        std::cout << " rel=" << c.max_rel_error << " elements=" << c.elements
                  << "\n";
    }
    if (!all_passed(checks)) {
        throw DivergenceError("gradient checks exceeded tolerance " +
                              std::to_string(tolerance));
    }
    std::cout << "all " << checks.size() << " checks passed (tolerance "
              << tolerance << ")\n";
    return 0;
}

// --- bench -----------------------------------------------------------------------

struct BenchOptions {
    std::string config = "modelnet";
    std::uint32_t points = 0;  // 0: twice the config's sample count
    std::uint32_t reps = 5;
    double extent_units = 0.0;  // 0: scaled from the largest grouping radius
    std::uint64_t seed = 0;
    std::string out;
};

int run_bench(const BenchOptions& o) {
    const ModelConfig config = named_config(o.config);
    const ModelParams params = init_params(config, o.seed);
    const std::uint32_t points = o.points == 0 ? 2 * config.n_fps : o.points;
    const double extent =
        o.extent_units > 0.0 ? o.extent_units : 10.0 * config.sa_radii.back();

    Rng rng(o.seed);
    const auto make_cloud = [&]() {
        PointCloud cloud(config.feature_width);
        std::vector<double> feat(config.feature_width);
        for (std::uint32_t i = 0; i < points; ++i) {
            for (double& v : feat) v = rng.uniform();
            cloud.add_point({rng.uniform(-extent, extent),
                             rng.uniform(-extent, extent),
                             rng.uniform(-extent, extent)},
                            feat);
        }
        return cloud;
    };

    StageTimings mean{}, worst{};
    double total_mean = 0.0, total_worst = 0.0;
    std::ostringstream rows;
    rows.precision(17);
    for (std::uint32_t rep = 0; rep < o.reps; ++rep) {
        const PointCloud template_cloud = make_cloud();
        const PointCloud source_cloud = make_cloud();
        StageTimings t;
        model_forward(template_cloud, source_cloud, config, params, &t);
        const double total = t.sa_seconds + t.fe_seconds + t.head_seconds;
        mean.sa_seconds += t.sa_seconds;
        mean.fe_seconds += t.fe_seconds;
        mean.head_seconds += t.head_seconds;
        total_mean += total;
        worst.sa_seconds = std::max(worst.sa_seconds, t.sa_seconds);
        worst.fe_seconds = std::max(worst.fe_seconds, t.fe_seconds);
        worst.head_seconds = std::max(worst.head_seconds, t.head_seconds);
        total_worst = std::max(total_worst, total);
        rows << rep << ',' << t.sa_seconds << ',' << t.fe_seconds << ','
             << t.head_seconds << ',' << total << '\n';
    }
    const double n = static_cast<double>(o.reps);

    std::cout << "config: " << o.config << " points: " << points
              << " reps: " << o.reps << "\n"
              << "stage,mean_seconds,max_seconds\n"
              << "sa," << mean.sa_seconds / n << ',' << worst.sa_seconds << "\n"
              << "fe," << mean.fe_seconds / n << ',' << worst.fe_seconds << "\n"
              << "head," << mean.head_seconds / n << ',' << worst.head_seconds
              << "\n"
              << "total," << total_mean / n << ',' << total_worst << "\n";

    if (!o.out.empty()) {
        std::ofstream f(o.out);
        if (!f) throw IoError("cannot open for writing: " + o.out);
        f << "rep,sa_seconds,fe_seconds,head_seconds,total_seconds\n"
          << rows.str();
        nlohmann::ordered_json config_json;
        config_json["config"] = o.config;
        config_json["points"] = points;
        config_json["reps"] = o.reps;
        config_json["extent_units"] = extent;
        write_run_manifest(o.out + ".manifest.json", "bench", o.seed,
                           config_json, {}, {o.out});
    }
    return 0;
}

std::string single_line(std::string text) {
    std::replace(text.begin(), text.end(), '\n', ' ');
    return text;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"point cloud registration toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    GenDataOptions gen;
    CLI::App* gen_cmd =
        app.add_subcommand("gen-data", "generate a synthetic pair dataset");
    gen_cmd->add_option("--shape", gen.shape, "shape family")
        ->check(CLI::IsMember(
            {"sphere", "box", "cylinder", "torus", "plane"}));
    gen_cmd->add_option("--size-units", gen.size_units,
                        "shape dimensions (1-3 values)")
        ->expected(1, 3);
    gen_cmd->add_option("--samples", gen.samples, "points per cloud");
    gen_cmd->add_flag("--with-normals", gen.with_normals,
                      "store surface normals");
    gen_cmd->add_option("--pairs", gen.pairs, "number of pairs");
    gen_cmd->add_option("--seed", gen.seed, "master seed");
    gen_cmd->add_option("--preset", gen.preset, "perturbation preset")
        ->check(CLI::IsMember({"modelnet", "kitti"}));
    gen_cmd->add_option("--t-min-units", gen.t_min_units,
                        "min translation magnitude");
    gen_cmd->add_option("--t-max-units", gen.t_max_units,
                        "max translation magnitude");
    gen_cmd->add_option("--angle-min-deg", gen.angle_min_deg,
                        "min rotation angle");
    gen_cmd->add_option("--angle-max-deg", gen.angle_max_deg,
                        "max rotation angle");
    gen_cmd->add_option("--noise-std-units", gen.noise_std_units,
                        "per-axis gaussian noise std");
    gen_cmd->add_option("--out", gen.out, "output dataset directory")
        ->required();

    TrainOptions tr;
    CLI::App* train_cmd =
        app.add_subcommand("train", "train the registration model");
    train_cmd->add_option("--data", tr.data, "dataset manifest.json")
        ->required();
    train_cmd->add_option("--config", tr.config, "model config preset")
        ->check(CLI::IsMember({"toy", "modelnet", "kitti"}));
    train_cmd->add_option("--config-json", tr.config_json,
                          "model config JSON file (overrides --config)");
    train_cmd->add_option("--beta", tr.beta, "real-part loss weight");
    train_cmd->add_option("--epochs", tr.train.epochs, "training epochs");
    train_cmd->add_option("--batch-size", tr.train.batch_size, "batch size");
    train_cmd->add_option("--seed", tr.train.seed, "init and shuffle seed");
    train_cmd->add_option("--lr", tr.train.lr, "learning rate");
    train_cmd->add_option("--weight-decay", tr.train.weight_decay,
                          "decoupled weight decay");
    train_cmd->add_option("--lr-decay-every", tr.train.lr_decay_every,
                          "epochs between learning-rate decays (0: constant)");
    train_cmd->add_option("--lr-decay-factor", tr.train.lr_decay_factor,
                          "learning-rate decay factor");
    train_cmd->add_flag("--per-epoch-checkpoints", tr.per_epoch_checkpoints,
                        "keep a checkpoint per epoch");
    train_cmd->add_option("--out", tr.out, "output directory")->required();

    RegisterOptions reg;
    CLI::App* reg_cmd =
        app.add_subcommand("register", "register one cloud pair");
    reg_cmd
        ->add_option("--template-cloud", reg.template_path,
                     "template cloud (.ply or .bin)")
        ->required();
    reg_cmd
        ->add_option("--source-cloud", reg.source_path,
                     "source cloud (.ply or .bin)")
        ->required();
    reg_cmd->add_option("--method", reg.method.method, "registration method")
        ->check(CLI::IsMember({"identity", "icp-p2p", "icp-p2plane", "model"}));
    reg_cmd->add_option("--checkpoint", reg.method.checkpoint,
                        "model checkpoint (for --method model)");
    reg_cmd->add_option("--max-corr-dist-units",
                        reg.method.max_corr_dist_units,
                        "ICP association cutoff");
    reg_cmd->add_option("--max-iterations", reg.method.max_iterations,
                        "ICP iteration cap");
    reg_cmd->add_option("--convergence-threshold",
                        reg.method.convergence_threshold,
                        "ICP convergence threshold");
    reg_cmd->add_option("--out", reg.out, "pose output file");

    OdometryOptions odo;
    CLI::App* odo_cmd = app.add_subcommand(
        "odometry", "chain registrations over an ordered scan list");
    odo_cmd
        ->add_option("--scans", odo.scans,
                     "text file listing cloud paths, one per line")
        ->required();
    odo_cmd->add_option("--checkpoint", odo.checkpoint, "model checkpoint")
        ->required();
    odo_cmd->add_option("--out", odo.out, "trajectory output file")
        ->required();

    EvaluateOptions ev;
    CLI::App* ev_cmd =
        app.add_subcommand("evaluate", "evaluate methods over a dataset");
    ev_cmd->add_option("--data", ev.data, "dataset manifest.json");
    ev_cmd->add_option("--method", ev.methods, "methods to evaluate")
        ->check(CLI::IsMember({"identity", "icp-p2p", "icp-p2plane", "model"}));
    ev_cmd->add_option("--checkpoint", ev.method_base.checkpoint,
                       "model checkpoint (for model method)");
    ev_cmd->add_option("--max-corr-dist-units",
                       ev.method_base.max_corr_dist_units,
                       "ICP association cutoff");
    ev_cmd->add_option("--max-iterations", ev.method_base.max_iterations,
                       "ICP iteration cap");
    ev_cmd->add_option("--seed", ev.seed, "seed for generated sweep datasets");
    ev_cmd->add_option("--noise-sweep", ev.noise_sweep,
                       "noise stds; generates a dataset per level");
    ev_cmd->add_option("--shape", ev.sweep_gen.shape, "sweep shape family")
        ->check(CLI::IsMember(
            {"sphere", "box", "cylinder", "torus", "plane"}));
    ev_cmd->add_option("--size-units", ev.sweep_gen.size_units,
                       "sweep shape dimensions")
        ->expected(1, 3);
    ev_cmd->add_option("--samples", ev.sweep_gen.samples,
                       "sweep points per cloud");
    ev_cmd->add_flag("--with-normals", ev.sweep_gen.with_normals,
                     "sweep clouds carry normals");
    ev_cmd->add_option("--pairs", ev.sweep_gen.pairs, "sweep pairs per level");
    ev_cmd->add_option("--out", ev.out, "output directory")->required();

    std::uint64_t gradcheck_seed = 7;
    double gradcheck_tolerance = 1e-5;
    CLI::App* grad_cmd = app.add_subcommand(
        "gradcheck", "finite-difference checks for every gradient");
    grad_cmd->add_option("--seed", gradcheck_seed, "probe seed");
    grad_cmd->add_option("--tolerance", gradcheck_tolerance,
                         "max relative error");

    BenchOptions bench;
    CLI::App* bench_cmd =
        app.add_subcommand("bench", "per-stage inference timing");
    bench_cmd->add_option("--config", bench.config, "model config preset")
        ->check(CLI::IsMember({"toy", "modelnet", "kitti"}));
    bench_cmd->add_option("--points", bench.points,
                          "points per cloud (0: twice the sample count)");
    bench_cmd->add_option("--reps", bench.reps, "repetitions");
    bench_cmd->add_option("--extent-units", bench.extent_units,
                          "cloud half-extent (0: auto from radii)");
    bench_cmd->add_option("--seed", bench.seed, "cloud and parameter seed");
    bench_cmd->add_option("--out", bench.out, "per-rep timing CSV");

    try {
        app.parse(argc, argv);
        thread_override();  // validated up front for every command

        if (gen_cmd->parsed()) return run_gen_data(gen);
        if (train_cmd->parsed()) return run_train(tr);
        if (reg_cmd->parsed()) return run_register(reg);
        if (odo_cmd->parsed()) return run_odometry(odo);
        if (ev_cmd->parsed()) {
            if (ev.noise_sweep.empty() && ev.data.empty()) {
                throw InvalidArgumentError(
                    "evaluate needs --data or --noise-sweep");
            }
            return run_evaluate(ev);
        }
        if (grad_cmd->parsed()) {
            return run_gradcheck(gradcheck_seed, gradcheck_tolerance);
        }
        if (bench_cmd->parsed()) return run_bench(bench);
        throw InvalidArgumentError("no command given");
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: usage: " << single_line(e.what()) << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << category_name(e.category()) << ": "
                  << single_line(e.what()) << "\n";
        switch (e.category()) {
            case ErrorCategory::usage: return 2;
            case ErrorCategory::data: return 3;
            case ErrorCategory::numeric: return 4;
        }
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << single_line(e.what()) << "\n";
        return 1;
    }
}
