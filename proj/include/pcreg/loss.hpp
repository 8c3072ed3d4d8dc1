#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pcreg/model.hpp"

namespace pcreg {

struct LossConfig {
    double beta = 1.0;  // weight on the real-part loss

    static LossConfig kitti() { return {200.0}; }
    static LossConfig modelnet() { return {1.0}; }

    void validate() const {
        if (!(beta >= 0.0)) throw ConfigError("beta must be nonnegative");
    }
};

// --- Losses ----------------------------------------------------------------

// Squared norm of (gt.real - pred.real / ||pred.real||). gt.real is expected
// unit with w >= 0. Throws DegenerateInputError when ||pred.real|| <= 1e-12.
double loss_real(const DualQuaternion& pred, const DualQuaternion& gt);
// Squared norm of (gt.dual - pred.dual).
double loss_dual(const DualQuaternion& pred, const DualQuaternion& gt);
// beta * loss_real + loss_dual.
double loss_combined(const DualQuaternion& pred, const DualQuaternion& gt,
                     const LossConfig& config);

// Batch means of the above; spans must have equal nonzero length.
double loss_real(std::span<const DualQuaternion> preds,
                 std::span<const DualQuaternion> gts);
double loss_dual(std::span<const DualQuaternion> preds,
                 std::span<const DualQuaternion> gts);
double loss_combined(std::span<const DualQuaternion> preds,
                     std::span<const DualQuaternion> gts,
                     const LossConfig& config);

// Differentiable losses over the raw head outputs.
struct TapedLoss {
    ad::Tensor real;      // scalar
    ad::Tensor dual;      // scalar
    ad::Tensor combined;  // scalar: beta * real + dual
};
TapedLoss taped_loss(ad::Tape& tape, const ModelOutputs& pred,
                     const DualQuaternion& gt, const LossConfig& config);

// --- Optimizer ---------------------------------------------------------------

// Adaptive-moment optimizer with decoupled weight decay. Moment buffers are
// indexed in flattened declaration order.
struct OptimizerState {
    double lr = 1e-3;
    double weight_decay = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t step = 0;
    std::vector<double> m, v;

    explicit OptimizerState(std::size_t n_params = 0)
        : m(n_params, 0.0), v(n_params, 0.0) {}
};

// Applies one update in place: params *= (1 - lr * weight_decay), then the
// bias-corrected moment step. Throws DivergenceError naming the parameter on
// a non-finite gradient.
void optimizer_step(ModelParams& params, std::span<const double> grads,
                    OptimizerState& state);

// Human-readable name of a flattened parameter index, e.g. "fe.layer2.b[5]".
std::string param_name_at(const ModelParams& params, std::size_t flat_index);

// --- Training loop ------------------------------------------------------------

struct TrainConfig {
    std::uint32_t epochs = 1;
    std::uint32_t batch_size = 8;
    std::uint64_t seed = 0;
    double lr = 1e-3;
    double weight_decay = 1e-4;
    // Multiplies the learning rate by lr_decay_factor every
    // lr_decay_every epochs; 0 keeps it constant.
    std::uint32_t lr_decay_every = 0;
    double lr_decay_factor = 1.0;
    std::string checkpoint_dir;  // empty: no per-epoch checkpoints

    void validate() const;
};

struct StepRecord {
    std::uint64_t step;
    double loss_real;
    double loss_dual;
    double loss;
};

struct TrainResult {
    ModelParams params;
    std::vector<StepRecord> history;
};

// Shuffles per epoch, batches, and optimizes; deterministic per seed.
// Every gt must convert to a dual quaternion with real w > 0.
TrainResult train(const std::vector<RegistrationPair>& dataset,
                  const ModelConfig& model_config,
                  const LossConfig& loss_config, const TrainConfig& config);

// CSV with header step,loss_real,loss_dual,loss.
void write_loss_csv(const std::string& path,
                    std::span<const StepRecord> history);

}  // namespace pcreg
