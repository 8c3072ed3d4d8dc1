#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pcreg/errors.hpp"

namespace pcreg::ad {

class Tape;

// Handle into a tape; cheap to copy. Shapes are [rows x cols]; set-valued
// data uses explicit row segments instead of a third axis.
struct Tensor {
    Tape* tape = nullptr;
    std::uint32_t id = 0;

    std::size_t rows() const;
    std::size_t cols() const;
    std::span<const double> value() const;
    std::span<const double> grad() const;
};

// Ordered record of primitive applications. backward() replays it in exact
// reverse order. Leaf gradients accumulate across backward() calls; interior
// gradients are scratch and reset on every call.
class Tape {
  public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Differentiable input; values are copied.
    Tensor leaf(std::size_t rows, std::size_t cols,
                std::span<const double> values);
    Tensor leaf(std::size_t rows, std::size_t cols, double fill = 0.0);

    // y = a . b for [m x k] and [k x n].
    Tensor matmul(Tensor a, Tensor b);
    // Adds the [1 x n] row vector b to every row of x.
    Tensor bias_add(Tensor x, Tensor b);
    Tensor relu(Tensor x);
    Tensor sigmoid(Tensor x);
    Tensor tanh(Tensor x);
    // Side-by-side column concatenation of equal-height tensors.
    Tensor concat_cols(Tensor a, Tensor b);
    Tensor slice_cols(Tensor x, std::size_t begin, std::size_t end);
    // y[i, :] = x[indices[i], :]; indices may repeat.
    Tensor gather_rows(Tensor x, std::vector<std::uint32_t> indices);
    // Per-segment, per-channel max over rows [seg_begin[g], seg_end[g]).
    // Empty segments yield zero rows and receive no gradient. Ties route the
    // gradient to the smallest row index.
    Tensor segment_max(Tensor x, std::vector<std::uint32_t> seg_begin,
                       std::vector<std::uint32_t> seg_end);
    // Column-wise max over all rows: [n x c] -> [1 x c]. Zero rows is an
    // error; callers own the empty-set fallback.
    Tensor max_pool_set(Tensor x);
    Tensor scale(Tensor x, double s);
    Tensor add(Tensor a, Tensor b);
    Tensor sub(Tensor a, Tensor b);
    // Scalar sum of all entries.
    Tensor sum(Tensor x);
    // Mean over rows of the squared row norms: (1/r) sum_i ||x_i||^2.
    Tensor mean_squared_norm(Tensor x);
    // Rows scaled to unit Euclidean norm; near-zero rows are an error.
    Tensor l2_normalize_rows(Tensor x);

    // Seeds d(loss)/d(loss) = 1 and accumulates gradients onto every leaf.
    // loss must be a scalar recorded on this tape.
    void backward(Tensor loss);

    std::size_t node_count() const { return nodes_.size(); }

    std::size_t rows(Tensor t) const { return node(t).rows; }
    std::size_t cols(Tensor t) const { return node(t).cols; }
    std::span<const double> value(Tensor t) const { return node(t).val; }
    std::span<const double> grad(Tensor t) const { return node(t).grad; }
    std::span<double> mutable_grad(Tensor t) { return node(t).grad; }

  private:
    struct Node {
        std::size_t rows, cols;
        std::vector<double> val;
        std::vector<double> grad;
        std::function<void()> back;  // empty for leaves
        bool is_leaf;
    };

    Tensor make_node(std::size_t rows, std::size_t cols, bool is_leaf);
    Node& node(Tensor t);
    const Node& node(Tensor t) const;
    void check_same_tape(Tensor t) const;

    std::vector<Node> nodes_;
};

inline std::string shape_str(std::size_t rows, std::size_t cols) {
    return "[" + std::to_string(rows) + " x " + std::to_string(cols) + "]";
}

}  // namespace pcreg::ad
