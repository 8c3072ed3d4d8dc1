#include "pcreg/model.hpp"

#include <atomic>
#include <chrono>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "pcreg/kernels.hpp"
#include "pcreg/rng.hpp"
#include "pcreg/spatial.hpp"

namespace pcreg {

namespace {

std::uint64_t fnv1a(const void* data, std::size_t len,
                    std::uint64_t h = 1469598103934665603ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

std::atomic<std::uint64_t> g_sa_invocations{0};

PointCloud gather_points(const PointCloud& cloud,
                         const std::vector<std::uint32_t>& indices,
                         std::size_t feature_width) {
    PointCloud out(feature_width);
    out.resize(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        out.set_point(i, cloud.point(indices[i]));
    }
    return out;
}

std::vector<LinearLayer> make_mlp_shapes(std::uint32_t in_width,
                                         const std::vector<std::uint32_t>& widths) {
    std::vector<LinearLayer> layers;
    std::uint32_t in = in_width;
    for (std::uint32_t out : widths) {
        LinearLayer l;
        l.in = in;
        l.out = out;
        l.w.assign(static_cast<std::size_t>(in) * out, 0.0);
        l.b.assign(out, 0.0);
        layers.push_back(std::move(l));
        in = out;
    }
    return layers;
}

}  // namespace

ModelConfig ModelConfig::kitti() {
    ModelConfig c;
    c.n_fps = 1024;
    c.sa_radii = {0.5, 1.0};
    c.sa_caps = {512, 1024};
    c.fe_radius = 10.0;
    c.fe_cap = 15;
    c.mlp_sa = {16, 16, 32};
    c.mlp_fe = {128, 128, 256};
    c.mlp_pn = {256, 512, 512, 1024};
    c.mlp_fc = {512, 256, 8};
    c.feature_width = 1;  // LiDAR intensity
    return c;
}

ModelConfig ModelConfig::modelnet() {
    ModelConfig c = kitti();
    c.n_fps = 512;
    c.sa_radii = {0.05, 0.1};
    c.sa_caps = {256, 512};
    c.fe_radius = 0.2;
    c.fe_cap = 30;
    c.feature_width = 0;
    return c;
}

ModelConfig ModelConfig::toy() {
    ModelConfig c;
    c.n_fps = 8;
    c.sa_radii = {0.5, 1.0};
    c.sa_caps = {8, 16};
    c.fe_radius = 1.0;
    c.fe_cap = 8;
    c.mlp_sa = {4, 4, 8};
    c.mlp_fe = {8, 8, 16};
    c.mlp_pn = {16, 32};
    c.mlp_fc = {16, 8};
    c.feature_width = 0;
    return c;
}

void ModelConfig::validate() const {
    if (n_fps == 0) throw ConfigError("n_fps must be at least 1");
    if (sa_radii.empty() || sa_radii.size() != sa_caps.size()) {
        throw ConfigError(
            "sa_radii and sa_caps must be nonempty lists of equal length");
    }
    for (std::size_t i = 0; i < sa_radii.size(); ++i) {
        if (!(sa_radii[i] > 0.0)) {
            throw ConfigError("sa_radii entries must be positive");
        }
        if (i + 1 < sa_radii.size() && !(sa_radii[i] < sa_radii[i + 1])) {
            throw ConfigError("sa_radii must be strictly increasing");
        }
        if (sa_caps[i] == 0) throw ConfigError("sa_caps entries must be >= 1");
    }
    if (!(fe_radius > 0.0)) throw ConfigError("fe_radius must be positive");
    if (fe_cap == 0) throw ConfigError("fe_cap must be >= 1");
    for (const auto* mlp : {&mlp_sa, &mlp_fe, &mlp_pn, &mlp_fc}) {
        if (mlp->empty()) throw ConfigError("every MLP needs at least one layer");
        for (std::uint32_t w : *mlp) {
            if (w == 0) throw ConfigError("MLP widths must be >= 1");
        }
    }
    if (mlp_fc.back() != 8) {
        throw ConfigError("the head's final width must be 8, got " +
                          std::to_string(mlp_fc.back()));
    }
    if (feature_width != 0 && feature_width != 1 && feature_width != 3) {
        throw ConfigError("feature_width must be 0, 1 or 3, got " +
                          std::to_string(feature_width));
    }
}

std::string ModelConfig::canonical_json() const {
    nlohmann::ordered_json j;
    j["n_fps"] = n_fps;
    j["sa_radii"] = sa_radii;
    j["sa_caps"] = sa_caps;
    j["fe_radius"] = fe_radius;
    j["fe_cap"] = fe_cap;
    j["mlp_sa"] = mlp_sa;
    j["mlp_fe"] = mlp_fe;
    j["mlp_pn"] = mlp_pn;
    j["mlp_fc"] = mlp_fc;
    j["feature_width"] = feature_width;
    return j.dump();
}

std::uint64_t ModelConfig::fingerprint() const {
    const std::string s = canonical_json();
    return fnv1a(s.data(), s.size());
}

ModelConfig model_config_from_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("model config is not valid JSON: ") +
                          e.what());
    }
    ModelConfig c;
    try {
        j.at("n_fps").get_to(c.n_fps);
        j.at("sa_radii").get_to(c.sa_radii);
        j.at("sa_caps").get_to(c.sa_caps);
        j.at("fe_radius").get_to(c.fe_radius);
        j.at("fe_cap").get_to(c.fe_cap);
        j.at("mlp_sa").get_to(c.mlp_sa);
        j.at("mlp_fe").get_to(c.mlp_fe);
        j.at("mlp_pn").get_to(c.mlp_pn);
        j.at("mlp_fc").get_to(c.mlp_fc);
        j.at("feature_width").get_to(c.feature_width);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("model config field error: ") + e.what());
    }
    c.validate();
    return c;
}

std::size_t ModelParams::scalar_count() const {
    std::size_t n = 0;
    for_each_layer(*this, [&](const LinearLayer& l) {
        n += l.w.size() + l.b.size();
    });
    return n;
}

std::uint64_t ModelParams::fingerprint() const {
    std::uint64_t h = fnv1a(&config_fingerprint, sizeof(config_fingerprint));
    for_each_layer(*this, [&](const LinearLayer& l) {
        h = fnv1a(l.w.data(), l.w.size() * sizeof(double), h);
        h = fnv1a(l.b.data(), l.b.size() * sizeof(double), h);
    });
    return h;
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    ModelParams p;
    p.config_fingerprint = config.fingerprint();
    p.init_seed = seed;
    for (std::size_t l = 0; l < config.sa_radii.size(); ++l) {
        p.sa.push_back(make_mlp_shapes(config.sa_input_width(), config.mlp_sa));
    }
    p.fe = make_mlp_shapes(config.fe_input_width(), config.mlp_fe);
    p.pn = make_mlp_shapes(config.pn_input_width(), config.mlp_pn);
    p.fc = make_mlp_shapes(config.mlp_pn.back(), config.mlp_fc);

    Rng rng(seed);
    for_each_layer(p, [&](LinearLayer& layer) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
        for (double& w : layer.w) w = rng.uniform(-bound, bound);
        // biases stay zero
    });
    return p;
}

std::vector<double> flatten(const ModelParams& params) {
    std::vector<double> flat;
    flat.reserve(params.scalar_count());
    for_each_layer(params, [&](const LinearLayer& l) {
        flat.insert(flat.end(), l.w.begin(), l.w.end());
        flat.insert(flat.end(), l.b.begin(), l.b.end());
    });
    return flat;
}

void assign_from_flat(ModelParams& params, std::span<const double> flat) {
    if (flat.size() != params.scalar_count()) {
        throw ShapeError("flat parameter vector of length " +
                         std::to_string(flat.size()) + " does not match " +
                         std::to_string(params.scalar_count()) + " scalars");
    }
    std::size_t at = 0;
    for_each_layer(params, [&](LinearLayer& l) {
        std::copy_n(flat.data() + at, l.w.size(), l.w.data());
        at += l.w.size();
        std::copy_n(flat.data() + at, l.b.size(), l.b.data());
        at += l.b.size();
    });
}

// --- Taped building blocks -------------------------------------------------

TapedParams make_param_leaves(ad::Tape& tape, const ModelParams& params) {
    TapedParams tp;
    const auto leaf_layer = [&](const LinearLayer& l) {
        ad::Tensor w = tape.leaf(l.in, l.out, std::span<const double>(l.w));
        ad::Tensor b = tape.leaf(1, l.out, std::span<const double>(l.b));
        tp.ordered.push_back(w);
        tp.ordered.push_back(b);
        return std::make_pair(w, b);
    };
    for (const auto& mlp : params.sa) {
        tp.sa.emplace_back();
        for (const auto& layer : mlp) tp.sa.back().push_back(leaf_layer(layer));
    }
    for (const auto& layer : params.fe) tp.fe.push_back(leaf_layer(layer));
    for (const auto& layer : params.pn) tp.pn.push_back(leaf_layer(layer));
    for (const auto& layer : params.fc) tp.fc.push_back(leaf_layer(layer));
    return tp;
}

ad::Tensor taped_mlp(ad::Tape& tape, ad::Tensor x,
                     const std::vector<std::pair<ad::Tensor, ad::Tensor>>& mlp,
                     bool relu_final) {
    for (std::size_t i = 0; i < mlp.size(); ++i) {
        x = tape.bias_add(tape.matmul(x, mlp[i].first), mlp[i].second);
        if (i + 1 < mlp.size() || relu_final) x = tape.relu(x);
    }
    return x;
}

TapedSetAbstraction taped_set_abstraction(ad::Tape& tape,
                                          const TapedParams& leaves,
                                          const PointCloud& cloud,
                                          const ModelConfig& config) {
    g_sa_invocations.fetch_add(1, std::memory_order_relaxed);
    if (cloud.size() < config.n_fps) {
        throw InsufficientPointsError(
            "set abstraction needs " + std::to_string(config.n_fps) +
            " points, cloud has " + std::to_string(cloud.size()));
    }
    if (cloud.feature_width() != config.feature_width) {
        throw ShapeError("cloud feature width " +
                         std::to_string(cloud.feature_width()) +
                         " does not match configured " +
                         std::to_string(config.feature_width));
    }

    TapedSetAbstraction out;
    out.centers = farthest_point_sampling(cloud, config.n_fps);
    const auto groups =
        group_multi_scale(cloud, out.centers, config.sa_radii, config.sa_caps);

    const std::size_t c = config.feature_width;
    const std::size_t row_width = 3 + c;
    std::vector<ad::Tensor> per_radius;
    for (std::size_t l = 0; l < config.sa_radii.size(); ++l) {
        std::vector<double> rows;
        std::vector<std::uint32_t> beg(out.centers.size()),
            end(out.centers.size());
        std::uint32_t at = 0;
        for (std::size_t ci = 0; ci < out.centers.size(); ++ci) {
            const GroupedNeighborhood& g = groups[ci][l];
            beg[ci] = at;
            for (std::size_t k = 0; k < g.neighbors.size(); ++k) {
                rows.push_back(g.displacements[3 * k + 0]);
                rows.push_back(g.displacements[3 * k + 1]);
                rows.push_back(g.displacements[3 * k + 2]);
                const auto feat = cloud.feature(g.neighbors[k]);
                rows.insert(rows.end(), feat.begin(), feat.end());
            }
            at += static_cast<std::uint32_t>(g.neighbors.size());
            end[ci] = at;
        }
        ad::Tensor x = tape.leaf(at, row_width, std::span<const double>(rows));
        ad::Tensor h = taped_mlp(tape, x, leaves.sa[l], /*relu_final=*/true);
        per_radius.push_back(
            tape.segment_max(h, std::move(beg), std::move(end)));
    }

    out.features = per_radius[0];
    for (std::size_t l = 1; l < per_radius.size(); ++l) {
        out.features = tape.concat_cols(out.features, per_radius[l]);
    }
    return out;
}

ad::Tensor taped_flow_embedding(ad::Tape& tape, const TapedParams& leaves,
                                const PointCloud& template_samples,
                                ad::Tensor template_features,
                                const PointCloud& source_samples,
                                ad::Tensor source_features,
                                const ModelConfig& config) {
    if (template_features.cols() != source_features.cols()) {
        throw ShapeError("flow embedding feature widths differ: " +
                         ad::shape_str(template_features.rows(),
                                       template_features.cols()) +
                         " vs " +
                         ad::shape_str(source_features.rows(),
                                       source_features.cols()));
    }
    const NeighborIndex index(source_samples, config.fe_radius);
    const std::size_t n = template_samples.size();

    std::vector<double> displacements;
    std::vector<std::uint32_t> tmpl_idx, src_idx;
    std::vector<std::uint32_t> beg(n), end(n);
    std::uint32_t at = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 xi = template_samples.point(i);
        const auto nbrs = index.radius_neighbors(xi, config.fe_cap);
        beg[i] = at;
        for (std::uint32_t j : nbrs) {
            const Vec3 yj = source_samples.point(j);
            displacements.push_back(yj.x - xi.x);
            displacements.push_back(yj.y - xi.y);
            displacements.push_back(yj.z - xi.z);
            tmpl_idx.push_back(static_cast<std::uint32_t>(i));
            src_idx.push_back(j);
        }
        at += static_cast<std::uint32_t>(nbrs.size());
        end[i] = at;
    }

    ad::Tensor d =
        tape.leaf(at, 3, std::span<const double>(displacements));
    ad::Tensor x = tape.concat_cols(
        tape.concat_cols(d, tape.gather_rows(template_features,
                                             std::move(tmpl_idx))),
        tape.gather_rows(source_features, std::move(src_idx)));
    ad::Tensor h = taped_mlp(tape, x, leaves.fe, /*relu_final=*/true);
    return tape.segment_max(h, std::move(beg), std::move(end));
}

ModelOutputs taped_output_head(ad::Tape& tape, const TapedParams& leaves,
                               const PointCloud& template_samples,
                               ad::Tensor flow_features,
                               const ModelConfig& config) {
    const std::size_t n = template_samples.size();
    if (n == 0) throw EmptySetError("output head needs at least one sample");
    if (flow_features.cols() != config.mlp_fe.back()) {
        throw ShapeError("flow features are " +
                         ad::shape_str(flow_features.rows(),
                                       flow_features.cols()) +
                         ", expected width " +
                         std::to_string(config.mlp_fe.back()));
    }
    std::vector<double> coords;
    coords.reserve(n * 3);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 p = template_samples.point(i);
        coords.push_back(p.x);
        coords.push_back(p.y);
        coords.push_back(p.z);
    }
    ad::Tensor xyz = tape.leaf(n, 3, std::span<const double>(coords));
    ad::Tensor x = tape.concat_cols(xyz, flow_features);
    ad::Tensor h = taped_mlp(tape, x, leaves.pn, /*relu_final=*/true);
    ad::Tensor global = tape.max_pool_set(h);
    ad::Tensor raw = taped_mlp(tape, global, leaves.fc, /*relu_final=*/false);
    if (raw.cols() != 8) {
        throw ShapeError("head produced " + ad::shape_str(1, raw.cols()) +
                         ", expected [1 x 8]");
    }
    ModelOutputs out;
    out.real = tape.concat_cols(tape.sigmoid(tape.slice_cols(raw, 0, 1)),
                                tape.tanh(tape.slice_cols(raw, 1, 4)));
    out.dual = tape.slice_cols(raw, 4, 8);
    return out;
}

ModelOutputs taped_model_forward(ad::Tape& tape, const TapedParams& leaves,
                                 const PointCloud& template_cloud,
                                 const PointCloud& source_cloud,
                                 const ModelConfig& config) {
    const TapedSetAbstraction tmpl =
        taped_set_abstraction(tape, leaves, template_cloud, config);
    const TapedSetAbstraction src =
        taped_set_abstraction(tape, leaves, source_cloud, config);
    const PointCloud tmpl_samples = gather_points(template_cloud, tmpl.centers, 0);
    const PointCloud src_samples = gather_points(source_cloud, src.centers, 0);
    ad::Tensor flow =
        taped_flow_embedding(tape, leaves, tmpl_samples, tmpl.features,
                             src_samples, src.features, config);
    return taped_output_head(tape, leaves, tmpl_samples, flow, config);
}

// --- Value-level API --------------------------------------------------------

namespace {

DualQuaternion outputs_to_dualquat(const ModelOutputs& out) {
    const auto r = out.real.value();
    const auto d = out.dual.value();
    DualQuaternion dq;
    dq.real = {r[0], r[1], r[2], r[3]};
    dq.dual = {d[0], d[1], d[2], d[3]};
    return dq;
}

AbstractedCloud materialize_sa(const PointCloud& cloud,
                               const TapedSetAbstraction& sa,
                               const ModelConfig& config,
                               std::uint64_t params_fingerprint) {
    AbstractedCloud out;
    out.params_fingerprint = params_fingerprint;
    out.samples = PointCloud(config.abstracted_width());
    out.samples.resize(sa.centers.size());
    const auto values = sa.features.value();
    const std::size_t width = config.abstracted_width();
    for (std::size_t i = 0; i < sa.centers.size(); ++i) {
        out.samples.set_point(i, cloud.point(sa.centers[i]));
        std::copy_n(values.data() + i * width, width,
                    out.samples.feature(i).data());
    }
    return out;
}

}  // namespace

std::vector<double> mini_pointnet(const std::vector<double>& features,
                                  std::size_t n, std::size_t width,
                                  const std::vector<LinearLayer>& mlp) {
    if (n == 0) throw EmptySetError("mini_pointnet over an empty set");
    if (features.size() != n * width) {
        throw ShapeError("mini_pointnet input of length " +
                         std::to_string(features.size()) + " does not fill " +
                         ad::shape_str(n, width));
    }
    ad::Tape tape;
    std::vector<std::pair<ad::Tensor, ad::Tensor>> leaves;
    for (const auto& l : mlp) {
        leaves.emplace_back(
            tape.leaf(l.in, l.out, std::span<const double>(l.w)),
            tape.leaf(1, l.out, std::span<const double>(l.b)));
    }
    ad::Tensor x = tape.leaf(n, width, std::span<const double>(features));
    ad::Tensor pooled =
        tape.max_pool_set(taped_mlp(tape, x, leaves, /*relu_final=*/true));
    return {pooled.value().begin(), pooled.value().end()};
}

AbstractedCloud set_abstraction(const PointCloud& cloud,
                                const ModelConfig& config,
                                const ModelParams& params) {
    ad::Tape tape;
    const TapedParams leaves = make_param_leaves(tape, params);
    const TapedSetAbstraction sa =
        taped_set_abstraction(tape, leaves, cloud, config);
    return materialize_sa(cloud, sa, config, params.fingerprint());
}

FlowCloud flow_embedding(const AbstractedCloud& template_sa,
                         const AbstractedCloud& source_sa,
                         const ModelConfig& config, const ModelParams& params) {
    ad::Tape tape;
    const TapedParams leaves = make_param_leaves(tape, params);
    const std::size_t w = config.abstracted_width();
    ad::Tensor tf = tape.leaf(template_sa.samples.size(), w,
                              std::span<const double>(
                                  template_sa.samples.features()));
    ad::Tensor sf = tape.leaf(source_sa.samples.size(), w,
                              std::span<const double>(
                                  source_sa.samples.features()));
    ad::Tensor flow = taped_flow_embedding(
        tape, leaves, template_sa.samples, tf, source_sa.samples, sf, config);
    FlowCloud out;
    out.samples = PointCloud(config.mlp_fe.back());
    out.samples.resize(template_sa.samples.size());
    const auto values = flow.value();
    const std::size_t fw = config.mlp_fe.back();
    for (std::size_t i = 0; i < out.samples.size(); ++i) {
        out.samples.set_point(i, template_sa.samples.point(i));
        std::copy_n(values.data() + i * fw, fw, out.samples.feature(i).data());
    }
    return out;
}

DualQuaternion output_head(const FlowCloud& flow, const ModelConfig& config,
                           const ModelParams& params) {
    ad::Tape tape;
    const TapedParams leaves = make_param_leaves(tape, params);
    ad::Tensor ff = tape.leaf(flow.samples.size(), config.mlp_fe.back(),
                              std::span<const double>(flow.samples.features()));
    return outputs_to_dualquat(
        taped_output_head(tape, leaves, flow.samples, ff, config));
}

std::pair<DualQuaternion, RigidTransform> model_forward(
    const PointCloud& template_cloud, const PointCloud& source_cloud,
    const ModelConfig& config, const ModelParams& params,
    StageTimings* timings) {
    using clock = std::chrono::steady_clock;
    ad::Tape tape;
    const TapedParams leaves = make_param_leaves(tape, params);

    const auto t0 = clock::now();
    const TapedSetAbstraction tmpl =
        taped_set_abstraction(tape, leaves, template_cloud, config);
    const TapedSetAbstraction src =
        taped_set_abstraction(tape, leaves, source_cloud, config);
    const auto t1 = clock::now();
    const PointCloud tmpl_samples = gather_points(template_cloud, tmpl.centers, 0);
    const PointCloud src_samples = gather_points(source_cloud, src.centers, 0);
    ad::Tensor flow =
        taped_flow_embedding(tape, leaves, tmpl_samples, tmpl.features,
                             src_samples, src.features, config);
    const auto t2 = clock::now();
    const ModelOutputs out =
        taped_output_head(tape, leaves, tmpl_samples, flow, config);
    const auto t3 = clock::now();

    if (timings != nullptr) {
        timings->sa_seconds = std::chrono::duration<double>(t1 - t0).count();
        timings->fe_seconds = std::chrono::duration<double>(t2 - t1).count();
        timings->head_seconds = std::chrono::duration<double>(t3 - t2).count();
    }
    const DualQuaternion dq = outputs_to_dualquat(out);
    return {dq, dualquat_to_transform(dq)};
}

std::pair<DualQuaternion, AbstractedCloud> odometry_forward_cached(
    const AbstractedCloud& prev_sa, const PointCloud& new_cloud,
    const ModelConfig& config, const ModelParams& params) {
    if (params.config_fingerprint != config.fingerprint()) {
        throw CacheMismatchError(
            "parameters were initialized for a different model configuration");
    }
    if (prev_sa.params_fingerprint != params.fingerprint()) {
        throw CacheMismatchError(
            "cached set-abstraction output was produced with different "
            "parameters or configuration");
    }
    ad::Tape tape;
    const TapedParams leaves = make_param_leaves(tape, params);
    const TapedSetAbstraction src =
        taped_set_abstraction(tape, leaves, new_cloud, config);
    const AbstractedCloud new_sa =
        materialize_sa(new_cloud, src, config, prev_sa.params_fingerprint);

    const std::size_t w = config.abstracted_width();
    ad::Tensor tf = tape.leaf(prev_sa.samples.size(), w,
                              std::span<const double>(
                                  prev_sa.samples.features()));
    const PointCloud src_samples = gather_points(new_cloud, src.centers, 0);
    ad::Tensor flow = taped_flow_embedding(
        tape, leaves, prev_sa.samples, tf, src_samples, src.features, config);
    const ModelOutputs out =
        taped_output_head(tape, leaves, prev_sa.samples, flow, config);
    return {outputs_to_dualquat(out), new_sa};
}

std::uint64_t sa_invocation_count() {
    return g_sa_invocations.load(std::memory_order_relaxed);
}

void reset_sa_invocation_count() {
    g_sa_invocations.store(0, std::memory_order_relaxed);
}

// --- Checkpoint I/O ----------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'P', 'C', 'R', 'E', 'G', 'C', 'P', '1'};

template <typename T>
void write_pod(std::ofstream& f, const T& v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& f, const std::string& path) {
    T v;
    f.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!f) throw ParseError(path, 0, "truncated checkpoint");
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelConfig& config,
                     const ModelParams& params) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint for writing: " + path);
    f.write(kMagic, sizeof(kMagic));
    write_pod<std::uint32_t>(f, 1);  // version
    write_pod<std::uint64_t>(f, params.init_seed);
    write_pod<std::uint64_t>(f, params.config_fingerprint);
    const std::string cfg = config.canonical_json();
    write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(cfg.size()));
    f.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
    std::uint32_t n_layers = 0;
    for_each_layer(params, [&](const LinearLayer&) { ++n_layers; });
    write_pod<std::uint32_t>(f, n_layers);
    for_each_layer(params, [&](const LinearLayer& l) {
        write_pod<std::uint32_t>(f, l.in);
        write_pod<std::uint32_t>(f, l.out);
        f.write(reinterpret_cast<const char*>(l.w.data()),
                static_cast<std::streamsize>(l.w.size() * sizeof(double)));
        f.write(reinterpret_cast<const char*>(l.b.data()),
                static_cast<std::streamsize>(l.b.size() * sizeof(double)));
    });
    if (!f) throw IoError("failed writing checkpoint: " + path);
}

std::pair<ModelConfig, ModelParams> load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint: " + path);
    char magic[8];
    f.read(magic, sizeof(magic));
    if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw ParseError(path, 0, "not a checkpoint file (bad magic)");
    }
    const auto version = read_pod<std::uint32_t>(f, path);
    if (version != 1) {
        throw ParseError(path, 0, "unsupported checkpoint version " +
                                      std::to_string(version));
    }
    const auto seed = read_pod<std::uint64_t>(f, path);
    const auto cfg_fp = read_pod<std::uint64_t>(f, path);
    const auto cfg_len = read_pod<std::uint32_t>(f, path);
    std::string cfg_json(cfg_len, '\0');
    f.read(cfg_json.data(), cfg_len);
    if (!f) throw ParseError(path, 0, "truncated checkpoint");
    const ModelConfig config = model_config_from_json(cfg_json);
    if (config.fingerprint() != cfg_fp) {
        throw ParseError(path, 0, "config fingerprint mismatch");
    }

    ModelParams params = init_params(config, seed);
    params.init_seed = seed;
    const auto n_layers = read_pod<std::uint32_t>(f, path);
    std::uint32_t expect = 0;
    for_each_layer(params, [&](const LinearLayer&) { ++expect; });
    if (n_layers != expect) {
        throw ParseError(path, 0, "checkpoint holds " +
                                      std::to_string(n_layers) +
                                      " layers, config expects " +
                                      std::to_string(expect));
    }
    bool bad_shape = false;
    for_each_layer(params, [&](LinearLayer& l) {
        if (bad_shape || !f) return;
        const auto in = read_pod<std::uint32_t>(f, path);
        const auto out = read_pod<std::uint32_t>(f, path);
        if (in != l.in || out != l.out) {
            bad_shape = true;
            return;
        }
        f.read(reinterpret_cast<char*>(l.w.data()),
               static_cast<std::streamsize>(l.w.size() * sizeof(double)));
        f.read(reinterpret_cast<char*>(l.b.data()),
               static_cast<std::streamsize>(l.b.size() * sizeof(double)));
    });
    if (bad_shape) throw ParseError(path, 0, "layer shape mismatch");
    if (!f) throw ParseError(path, 0, "truncated checkpoint");
    return {config, params};
}

}  // namespace pcreg
