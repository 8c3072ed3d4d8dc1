#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pcreg/autodiff.hpp"
#include "pcreg/geometry.hpp"

namespace pcreg {

// Architecture hyperparameters. MLP width lists give layer output widths;
// input widths are implied (set abstraction: 3 + feature_width, flow
// embedding: 3 + 2 * abstracted width, global stage: 3 + flow width, head:
// global width). The head's final width must be 8: four real-part and four
// dual-part outputs.
struct ModelConfig {
    std::uint32_t n_fps = 0;
    std::vector<double> sa_radii;
    std::vector<std::uint32_t> sa_caps;
    double fe_radius = 0.0;
    std::uint32_t fe_cap = 0;
    std::vector<std::uint32_t> mlp_sa;
    std::vector<std::uint32_t> mlp_fe;
    std::vector<std::uint32_t> mlp_pn;
    std::vector<std::uint32_t> mlp_fc;
    std::uint32_t feature_width = 0;  // per-point input channels c

    static ModelConfig kitti();
    static ModelConfig modelnet();
    // Small configuration for gradient checks and smoke training.
    static ModelConfig toy();

    // Throws ConfigError on violated invariants.
    void validate() const;

    // Stable textual form; equal configs produce equal strings.
    std::string canonical_json() const;
    std::uint64_t fingerprint() const;

    // Derived widths.
    std::uint32_t sa_input_width() const { return 3 + feature_width; }
    std::uint32_t abstracted_width() const {
        return static_cast<std::uint32_t>(sa_radii.size()) * mlp_sa.back();
    }
    std::uint32_t fe_input_width() const { return 3 + 2 * abstracted_width(); }
    std::uint32_t pn_input_width() const { return 3 + mlp_fe.back(); }
};

ModelConfig model_config_from_json(const std::string& json_text);

struct LinearLayer {
    std::uint32_t in = 0, out = 0;
    std::vector<double> w;  // row-major [in x out]
    std::vector<double> b;  // [out]
};

// All trainable arrays. Declaration order (set-abstraction MLPs per radius,
// then flow, global, head; within a layer weights before bias) is the
// serialization, flattening and optimizer-state order.
struct ModelParams {
    std::vector<std::vector<LinearLayer>> sa;  // [radius][layer]
    std::vector<LinearLayer> fe, pn, fc;

    std::uint64_t config_fingerprint = 0;
    std::uint64_t init_seed = 0;

    std::size_t scalar_count() const;
    // Hash over every parameter byte plus the config fingerprint; used to
    // validate cached set-abstraction outputs.
    std::uint64_t fingerprint() const;
};

// Visits every layer in declaration order.
template <typename Fn>
void for_each_layer(ModelParams& p, Fn&& fn) {
    for (auto& mlp : p.sa) {
        for (auto& layer : mlp) fn(layer);
    }
    for (auto& layer : p.fe) fn(layer);
    for (auto& layer : p.pn) fn(layer);
    for (auto& layer : p.fc) fn(layer);
}
template <typename Fn>
void for_each_layer(const ModelParams& p, Fn&& fn) {
    for (const auto& mlp : p.sa) {
        for (const auto& layer : mlp) fn(layer);
    }
    for (const auto& layer : p.fe) fn(layer);
    for (const auto& layer : p.pn) fn(layer);
    for (const auto& layer : p.fc) fn(layer);
}

// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

// Parameter values in declaration order, weights before biases per layer.
std::vector<double> flatten(const ModelParams& params);
void assign_from_flat(ModelParams& params, std::span<const double> flat);

// Subsampled cloud: n_fps coordinates with concatenated multi-scale
// features of width n_r * mlp_sa.back().
struct AbstractedCloud {
    PointCloud samples;
    std::uint64_t params_fingerprint = 0;
};

// Template samples with one flow feature per sample (width mlp_fe.back()).
struct FlowCloud {
    PointCloud samples;
};

struct StageTimings {
    double sa_seconds = 0.0;
    double fe_seconds = 0.0;
    double head_seconds = 0.0;
};

// --- Taped (differentiable) building blocks ------------------------------

// Parameter leaves on a tape, in declaration order.
struct TapedParams {
    std::vector<std::vector<std::pair<ad::Tensor, ad::Tensor>>> sa;
    std::vector<std::pair<ad::Tensor, ad::Tensor>> fe, pn, fc;
    std::vector<ad::Tensor> ordered;  // w, b, w, b, ... declaration order
};
TapedParams make_param_leaves(ad::Tape& tape, const ModelParams& params);

// Shared-weight MLP over rows. relu_final controls the activation after the
// last layer (the head's final layer stays linear).
ad::Tensor taped_mlp(ad::Tape& tape, ad::Tensor x,
                     const std::vector<std::pair<ad::Tensor, ad::Tensor>>& mlp,
                     bool relu_final);

struct TapedSetAbstraction {
    std::vector<std::uint32_t> centers;
    ad::Tensor features;  // [n_fps x abstracted_width]
};
TapedSetAbstraction taped_set_abstraction(ad::Tape& tape,
                                          const TapedParams& leaves,
                                          const PointCloud& cloud,
                                          const ModelConfig& config);

// Flow features for every template sample; samples without any source
// neighbor inside fe_radius receive an all-zero feature row.
ad::Tensor taped_flow_embedding(ad::Tape& tape, const TapedParams& leaves,
                                const PointCloud& template_samples,
                                ad::Tensor template_features,
                                const PointCloud& source_samples,
                                ad::Tensor source_features,
                                const ModelConfig& config);

struct ModelOutputs {
    ad::Tensor real;  // [1 x 4]: sigmoid(w), tanh(x), tanh(y), tanh(z)
    ad::Tensor dual;  // [1 x 4]: unconstrained
};
ModelOutputs taped_output_head(ad::Tape& tape, const TapedParams& leaves,
                               const PointCloud& template_samples,
                               ad::Tensor flow_features,
                               const ModelConfig& config);

// Full differentiable pipeline on one tape (Siamese: both branches read the
// same parameter leaves).
ModelOutputs taped_model_forward(ad::Tape& tape, const TapedParams& leaves,
                                 const PointCloud& template_cloud,
                                 const PointCloud& source_cloud,
                                 const ModelConfig& config);

// --- Value-level API ------------------------------------------------------

// Shared-weight MLP + column max over a feature matrix [n x width].
std::vector<double> mini_pointnet(const std::vector<double>& features,
                                  std::size_t n, std::size_t width,
                                  const std::vector<LinearLayer>& mlp);

AbstractedCloud set_abstraction(const PointCloud& cloud,
                                const ModelConfig& config,
                                const ModelParams& params);

FlowCloud flow_embedding(const AbstractedCloud& template_sa,
                         const AbstractedCloud& source_sa,
                         const ModelConfig& config, const ModelParams& params);

DualQuaternion output_head(const FlowCloud& flow, const ModelConfig& config,
                           const ModelParams& params);

std::pair<DualQuaternion, RigidTransform> model_forward(
    const PointCloud& template_cloud, const PointCloud& source_cloud,
    const ModelConfig& config, const ModelParams& params,
    StageTimings* timings = nullptr);

// One-sided odometry step: runs set abstraction only for new_cloud, reusing
// prev_sa as the template side. The prediction is bit-identical to
// model_forward on the same pair.
std::pair<DualQuaternion, AbstractedCloud> odometry_forward_cached(
    const AbstractedCloud& prev_sa, const PointCloud& new_cloud,
    const ModelConfig& config, const ModelParams& params);

// Set-abstraction invocation counter (process-wide), for cache accounting.
std::uint64_t sa_invocation_count();
void reset_sa_invocation_count();

// --- Checkpoint I/O -------------------------------------------------------

void save_checkpoint(const std::string& path, const ModelConfig& config,
                     const ModelParams& params);
std::pair<ModelConfig, ModelParams> load_checkpoint(const std::string& path);

}  // namespace pcreg
