#include "pcreg/loss.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "pcreg/rng.hpp"

namespace pcreg {

namespace {

double squared_norm(const Quaternion& q) {
    return q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z;
}

void check_batch(std::span<const DualQuaternion> preds,
                 std::span<const DualQuaternion> gts) {
    if (preds.empty()) throw EmptySetError("loss over an empty batch");
    if (preds.size() != gts.size()) {
        throw ShapeError("batch sizes differ: " + std::to_string(preds.size()) +
                         " predictions vs " + std::to_string(gts.size()) +
                         " labels");
    }
}

}  // namespace

double loss_real(const DualQuaternion& pred, const DualQuaternion& gt) {
    const double n = pred.real.norm();
    if (n <= tol::kTinyNorm) {
        throw DegenerateInputError(
            "predicted real part has near-zero norm " + std::to_string(n));
    }
    const Quaternion unit = pred.real * (1.0 / n);
    return squared_norm(gt.real - unit);
}

double loss_dual(const DualQuaternion& pred, const DualQuaternion& gt) {
    return squared_norm(gt.dual - pred.dual);
}

double loss_combined(const DualQuaternion& pred, const DualQuaternion& gt,
                     const LossConfig& config) {
    config.validate();
    return config.beta * loss_real(pred, gt) + loss_dual(pred, gt);
}

double loss_real(std::span<const DualQuaternion> preds,
                 std::span<const DualQuaternion> gts) {
    check_batch(preds, gts);
    double acc = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        acc += loss_real(preds[i], gts[i]);
    }
    return acc / static_cast<double>(preds.size());
}

double loss_dual(std::span<const DualQuaternion> preds,
                 std::span<const DualQuaternion> gts) {
    check_batch(preds, gts);
    double acc = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        acc += loss_dual(preds[i], gts[i]);
    }
    return acc / static_cast<double>(preds.size());
}

double loss_combined(std::span<const DualQuaternion> preds,
                     std::span<const DualQuaternion> gts,
                     const LossConfig& config) {
    config.validate();
    return config.beta * loss_real(preds, gts) + loss_dual(preds, gts);
}

TapedLoss taped_loss(ad::Tape& tape, const ModelOutputs& pred,
                     const DualQuaternion& gt, const LossConfig& config) {
    config.validate();
    const double gr[4] = {gt.real.w, gt.real.x, gt.real.y, gt.real.z};
    const double gd[4] = {gt.dual.w, gt.dual.x, gt.dual.y, gt.dual.z};
    ad::Tensor gt_real = tape.leaf(1, 4, std::span<const double>(gr, 4));
    ad::Tensor gt_dual = tape.leaf(1, 4, std::span<const double>(gd, 4));
    TapedLoss out;
    out.real = tape.mean_squared_norm(
        tape.sub(gt_real, tape.l2_normalize_rows(pred.real)));
    out.dual = tape.mean_squared_norm(tape.sub(gt_dual, pred.dual));
    out.combined = tape.add(tape.scale(out.real, config.beta), out.dual);
    return out;
}

// --- Optimizer ----------------------------------------------------------------

std::string param_name_at(const ModelParams& params, std::size_t flat_index) {
    std::size_t at = 0;
    std::string name;
    const auto visit = [&](const std::string& prefix, const LinearLayer& l) {
        if (!name.empty()) return;
        if (flat_index < at + l.w.size()) {
            name = prefix + ".w[" + std::to_string(flat_index - at) + "]";
            return;
        }
        at += l.w.size();
        if (flat_index < at + l.b.size()) {
            name = prefix + ".b[" + std::to_string(flat_index - at) + "]";
            return;
        }
        at += l.b.size();
    };
    for (std::size_t r = 0; r < params.sa.size(); ++r) {
        for (std::size_t l = 0; l < params.sa[r].size(); ++l) {
            visit("sa" + std::to_string(r) + ".layer" + std::to_string(l),
                  params.sa[r][l]);
        }
    }
    for (std::size_t l = 0; l < params.fe.size(); ++l) {
        visit("fe.layer" + std::to_string(l), params.fe[l]);
    }
    for (std::size_t l = 0; l < params.pn.size(); ++l) {
        visit("pn.layer" + std::to_string(l), params.pn[l]);
    }
    for (std::size_t l = 0; l < params.fc.size(); ++l) {
        visit("fc.layer" + std::to_string(l), params.fc[l]);
    }
    if (name.empty()) {
        throw InvalidArgumentError("flat index " + std::to_string(flat_index) +
                                   " is out of range");
    }
    return name;
}

void optimizer_step(ModelParams& params, std::span<const double> grads,
                    OptimizerState& state) {
    const std::size_t n = params.scalar_count();
    if (grads.size() != n) {
        throw ShapeError("gradient vector of length " +
                         std::to_string(grads.size()) + " does not match " +
                         std::to_string(n) + " parameters");
    }
    if (state.m.size() != n || state.v.size() != n) {
        throw ShapeError("optimizer state sized for " +
                         std::to_string(state.m.size()) +
                         " parameters, model has " + std::to_string(n));
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(grads[i])) {
            throw DivergenceError("non-finite gradient for parameter " +
                                  param_name_at(params, i));
        }
    }

    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);
    const double decay = 1.0 - state.lr * state.weight_decay;

    std::vector<double> flat = flatten(params);
    for (std::size_t i = 0; i < n; ++i) {
        flat[i] *= decay;
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
        state.v[i] =
            state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        flat[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
    assign_from_flat(params, flat);
}

// --- Training loop --------------------------------------------------------------

void TrainConfig::validate() const {
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (!(lr >= 0.0)) throw ConfigError("learning rate must be nonnegative");
    if (!(weight_decay >= 0.0)) {
        throw ConfigError("weight decay must be nonnegative");
    }
    if (lr_decay_every > 0 && !(lr_decay_factor > 0.0)) {
        throw ConfigError("lr_decay_factor must be positive");
    }
}

TrainResult train(const std::vector<RegistrationPair>& dataset,
                  const ModelConfig& model_config,
                  const LossConfig& loss_config, const TrainConfig& config) {
    model_config.validate();
    loss_config.validate();
    config.validate();
    if (dataset.empty()) throw EmptyDatasetError("training set is empty");

    std::vector<DualQuaternion> labels;
    labels.reserve(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const DualQuaternion dq = dualquat_from_transform(dataset[i].gt);
        if (!(dq.real.w > tol::kTinyNorm)) {
            throw InvalidArgumentError(
                "pair " + std::to_string(i) +
                ": ground-truth rotation is a half turn (real w = 0); such "
                "labels are outside the supported range");
        }
        labels.push_back(dq);
    }

    TrainResult result;
    result.params = init_params(model_config, config.seed);
    OptimizerState state(result.params.scalar_count());
    state.lr = config.lr;
    state.weight_decay = config.weight_decay;

    if (!config.checkpoint_dir.empty()) {
        std::filesystem::create_directories(config.checkpoint_dir);
    }

    Rng order_rng(config.seed + 1);
    std::vector<std::uint32_t> order(dataset.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = static_cast<std::uint32_t>(i);
    }

    std::uint64_t step = 0;
    for (std::uint32_t epoch = 0; epoch < config.epochs; ++epoch) {
        if (config.lr_decay_every > 0 && epoch > 0 &&
            epoch % config.lr_decay_every == 0) {
            state.lr *= config.lr_decay_factor;
        }
        order_rng.shuffle(order);

        for (std::size_t start = 0; start < order.size();
             start += config.batch_size) {
            const std::size_t b =
                std::min<std::size_t>(config.batch_size, order.size() - start);
            ad::Tape tape;
            const TapedParams leaves = make_param_leaves(tape, result.params);

            ad::Tensor real_sum, dual_sum;
            for (std::size_t k = 0; k < b; ++k) {
                const std::uint32_t idx = order[start + k];
                const ModelOutputs out = taped_model_forward(
                    tape, leaves, dataset[idx].template_cloud,
                    dataset[idx].source_cloud, model_config);
                const TapedLoss tl =
                    taped_loss(tape, out, labels[idx], loss_config);
                real_sum = k == 0 ? tl.real : tape.add(real_sum, tl.real);
                dual_sum = k == 0 ? tl.dual : tape.add(dual_sum, tl.dual);
            }
            const double inv_b = 1.0 / static_cast<double>(b);
            const ad::Tensor real_mean = tape.scale(real_sum, inv_b);
            const ad::Tensor dual_mean = tape.scale(dual_sum, inv_b);
            const ad::Tensor loss = tape.add(
                tape.scale(real_mean, loss_config.beta), dual_mean);

            ++step;
            const StepRecord rec{step, real_mean.value()[0],
                                 dual_mean.value()[0], loss.value()[0]};
            if (!std::isfinite(rec.loss)) {
                throw DivergenceError("loss became non-finite at step " +
                                      std::to_string(step));
            }
            result.history.push_back(rec);

            tape.backward(loss);
            std::vector<double> grads;
            grads.reserve(result.params.scalar_count());
            for (const ad::Tensor& leaf : leaves.ordered) {
                const auto g = leaf.grad();
                grads.insert(grads.end(), g.begin(), g.end());
            }
            optimizer_step(result.params, grads, state);
        }

        if (!config.checkpoint_dir.empty()) {
            char name[32];
            std::snprintf(name, sizeof(name), "epoch_%04u.ckpt", epoch + 1);
            save_checkpoint(config.checkpoint_dir + "/" + name, model_config,
                            result.params);
        }
    }
    return result;
}

void write_loss_csv(const std::string& path,
                    std::span<const StepRecord> history) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open loss history for writing: " + path);
    f << "step,loss_real,loss_dual,loss\n";
    char line[128];
    for (const StepRecord& r : history) {
        std::snprintf(line, sizeof(line), "%llu,%.17g,%.17g,%.17g\n",
                      static_cast<unsigned long long>(r.step), r.loss_real,
                      r.loss_dual, r.loss);
        f << line;
    }
    if (!f) throw IoError("failed writing loss history: " + path);
}

}  // namespace pcreg
