#include "pcreg/gradcheck.hpp"

#include <cmath>
#include <functional>

#include "pcreg/autodiff.hpp"
#include "pcreg/loss.hpp"
#include "pcreg/model.hpp"
#include "pcreg/rng.hpp"

namespace pcreg {

namespace {

// Evaluates the scalar loss at x; when grad is non-null also fills the
// analytic gradient of every element of x.
using Graph =
    std::function<double(std::span<const double> x, std::vector<double>* grad)>;

GradCheck run_one(const std::string& name, std::size_t n, const Graph& eval,
                  std::vector<double> x, double tolerance) {
    GradCheck result;
    result.name = name;
    result.elements = n;

    std::vector<double> analytic(n, 0.0);
    eval(x, &analytic);

    const double h = 1e-6;
    for (std::size_t i = 0; i < n; ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double hi = eval(x, nullptr);
        x[i] = keep - h;
        const double lo = eval(x, nullptr);
        x[i] = keep;
        const double fd = (hi - lo) / (2.0 * h);
        const double rel = std::abs(analytic[i] - fd) /
                           std::max({1.0, std::abs(analytic[i]), std::abs(fd)});
        result.max_rel_error = std::max(result.max_rel_error, rel);
    }
    result.passed = result.max_rel_error < tolerance;
    return result;
}

// Uniform in [-1, -0.05] u [0.05, 1]: generic points clear of the
// piecewise-linear kinks at zero.
std::vector<double> generic_values(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) {
        do {
            x = rng.uniform(-1.0, 1.0);
        } while (std::abs(x) < 0.05);
    }
    return v;
}

// Check over a graph built from leaf matrices of the given shapes; the
// builder returns the scalar loss node.
using Builder = std::function<ad::Tensor(ad::Tape&, std::vector<ad::Tensor>&)>;

GradCheck check_graph(
    const std::string& name,
    const std::vector<std::pair<std::size_t, std::size_t>>& shapes,
    const Builder& build, Rng& rng, double tolerance) {
    std::size_t n = 0;
    for (const auto& [r, c] : shapes) n += r * c;

    const Graph eval = [&shapes, &build](std::span<const double> x,
                                         std::vector<double>* grad) {
        ad::Tape tape;
        std::vector<ad::Tensor> leaves;
        std::size_t offset = 0;
        for (const auto& [r, c] : shapes) {
            leaves.push_back(tape.leaf(r, c, x.subspan(offset, r * c)));
            offset += r * c;
        }
        ad::Tensor loss = build(tape, leaves);
        const double value = loss.value()[0];
        if (grad != nullptr) {
            tape.backward(loss);
            std::size_t out = 0;
            for (const ad::Tensor& leaf : leaves) {
                for (double g : leaf.grad()) (*grad)[out++] = g;
            }
        }
        return value;
    };
    return run_one(name, n, eval, generic_values(rng, n), tolerance);
}

PointCloud random_cloud(Rng& rng, std::size_t n, double extent) {
    PointCloud cloud(0);
    cloud.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        cloud.add_point({rng.uniform(-extent, extent),
                         rng.uniform(-extent, extent),
                         rng.uniform(-extent, extent)});
    }
    return cloud;
}

GradCheck check_toy_model(Rng& rng, double tolerance) {
    const ModelConfig config = ModelConfig::toy();
    ModelParams base = init_params(config, rng.next_u64());
    std::vector<double> x = flatten(base);
    for (double& v : x) v += rng.uniform(-0.1, 0.1);

    const PointCloud template_cloud = random_cloud(rng, 30, 1.0);
    const PointCloud source_cloud = random_cloud(rng, 30, 1.0);
    DualQuaternion gt;
    gt.real = quat_from_axis_angle(rng.unit_vector(), rng.uniform(0.1, 0.5));
    gt.dual = {rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2),
               rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2)};
    const LossConfig loss_config;

    const Graph eval = [&](std::span<const double> flat,
                           std::vector<double>* grad) {
        ModelParams params = base;
        assign_from_flat(params, flat);
        ad::Tape tape;
        TapedParams leaves = make_param_leaves(tape, params);
        const ModelOutputs outputs = taped_model_forward(
            tape, leaves, template_cloud, source_cloud, config);
        const TapedLoss loss = taped_loss(tape, outputs, gt, loss_config);
        const double value = loss.combined.value()[0];
        if (grad != nullptr) {
            tape.backward(loss.combined);
            std::size_t out = 0;
            for (const ad::Tensor& leaf : leaves.ordered) {
                for (double g : leaf.grad()) (*grad)[out++] = g;
            }
        }
        return value;
    };
    const std::size_t n = x.size();
    return run_one("toy_model_loss", n, eval, std::move(x), tolerance);
}

}  // namespace

std::vector<GradCheck> run_gradient_checks(std::uint64_t seed,
                                           double tolerance) {
    Rng rng(seed);
    std::vector<GradCheck> checks;
    const auto add = [&](const std::string& name,
                         const std::vector<std::pair<std::size_t, std::size_t>>&
                             shapes,
                         const Builder& build) {
        checks.push_back(check_graph(name, shapes, build, rng, tolerance));
    };

    add("matmul", {{3, 4}, {4, 5}},
        [](ad::Tape& t, std::vector<ad::Tensor>& v) {
            return t.mean_squared_norm(t.matmul(v[0], v[1]));
        });
    add("bias_add", {{4, 3}, {1, 3}},
        [](ad::Tape& t, std::vector<ad::Tensor>& v) {
            return t.mean_squared_norm(t.bias_add(v[0], v[1]));
        });
    add("relu", {{4, 4}}, [](ad::Tape& t, std::vector<ad::Tensor>& v) {
        return t.mean_squared_norm(t.relu(v[0]));
    });
    add("sigmoid", {{3, 5}}, [](ad::Tape& t, std::vector<ad::Tensor>& v) {
        return t.mean_squared_norm(t.sigmoid(v[0]));
    });
    add("tanh", {{3, 5}}, [](ad::Tape& t, std::vector<ad::Tensor>& v) {
        return t.mean_squared_norm(t.tanh(v[0]));
    });
    add("concat_cols", {{3, 2}, {3, 4}},
        [](ad::Tape& t, std::vector<ad::Tensor>& v) {
            return t.mean_squared_norm(t.concat_cols(v[0], v[1]));
        });
    add("slice_cols", {{4, 6}}, [](ad::Tape& t, std::vector<ad::Tensor>& v) {
        return t.mean_squared_norm(t.slice_cols(v[0], 1, 4));
    });
    add("gather_rows", {{5, 3}}, [](ad::Tape& t, std::vector<ad::Tensor>& v) {
        // repeated indices exercise gradient accumulation into one row
        return t.mean_squared_norm(t.gather_rows(v[0], {0, 2, 2, 4, 1}));
    });
    add("segment_max", {{6, 3}}, [](ad::Tape& t, std::vector<ad::Tensor>& v) {
        // the middle segment is empty and contributes a zero row
        return t.mean_squared_norm(
            t.segment_max(v[0], {0, 2, 2}, {2, 2, 6}));
    });
    add("max_pool_set", {{5, 4}}, [](ad::Tape& t, std::vector<ad::Tensor>& v) {
        return t.mean_squared_norm(t.max_pool_set(v[0]));
    });
    add("scale", {{3, 3}}, [](ad::Tape& t, std::vector<ad::Tensor>& v) {
        return t.mean_squared_norm(t.scale(v[0], -0.37));
    });
    add("add", {{3, 4}, {3, 4}}, [](ad::Tape& t, std::vector<ad::Tensor>& v) {
        return t.mean_squared_norm(t.add(v[0], v[1]));
    });
    add("sub", {{3, 4}, {3, 4}}, [](ad::Tape& t, std::vector<ad::Tensor>& v) {
        return t.mean_squared_norm(t.sub(v[0], v[1]));
    });
    add("sum", {{4, 3}}, [](ad::Tape& t, std::vector<ad::Tensor>& v) {
        return t.sum(t.sigmoid(v[0]));
    });
    add("mean_squared_norm", {{4, 3}},
        [](ad::Tape& t, std::vector<ad::Tensor>& v) {
            return t.mean_squared_norm(v[0]);
        });
    add("l2_normalize_rows", {{3, 4}, {3, 4}},
        [](ad::Tape& t, std::vector<ad::Tensor>& v) {
            return t.mean_squared_norm(
                t.sub(t.l2_normalize_rows(v[0]), v[1]));
        });

    checks.push_back(check_toy_model(rng, tolerance));
    return checks;
}

bool all_passed(std::span<const GradCheck> checks) {
    for (const GradCheck& c : checks) {
        if (!c.passed) return false;
    }
    return true;
}

}  // namespace pcreg
