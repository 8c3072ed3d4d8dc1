#include "pcreg/autodiff.hpp"

#include <cmath>
#include <memory>

#include "pcreg/geometry.hpp"
#include "pcreg/kernels.hpp"

namespace pcreg::ad {

std::size_t Tensor::rows() const { return tape->rows(*this); }
std::size_t Tensor::cols() const { return tape->cols(*this); }
std::span<const double> Tensor::value() const { return tape->value(*this); }
std::span<const double> Tensor::grad() const { return tape->grad(*this); }

Tape::Node& Tape::node(Tensor t) {
    check_same_tape(t);
    return nodes_[t.id];
}

const Tape::Node& Tape::node(Tensor t) const {
    check_same_tape(t);
    return nodes_[t.id];
}

void Tape::check_same_tape(Tensor t) const {
    if (t.tape != this || t.id >= nodes_.size()) {
        throw InvalidArgumentError("tensor does not belong to this tape");
    }
}

Tensor Tape::make_node(std::size_t rows, std::size_t cols, bool is_leaf) {
    Node n;
    n.rows = rows;
    n.cols = cols;
    n.val.assign(rows * cols, 0.0);
    n.grad.assign(rows * cols, 0.0);
    n.is_leaf = is_leaf;
    nodes_.push_back(std::move(n));
    return Tensor{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Tensor Tape::leaf(std::size_t rows, std::size_t cols,
                  std::span<const double> values) {
    if (values.size() != rows * cols) {
        throw ShapeError("leaf data of length " +
                         std::to_string(values.size()) + " does not fill " +
                         shape_str(rows, cols));
    }
    Tensor t = make_node(rows, cols, true);
    std::copy(values.begin(), values.end(), nodes_[t.id].val.begin());
    return t;
}

Tensor Tape::leaf(std::size_t rows, std::size_t cols, double fill) {
    Tensor t = make_node(rows, cols, true);
    std::fill(nodes_[t.id].val.begin(), nodes_[t.id].val.end(), fill);
    return t;
}

Tensor Tape::matmul(Tensor a, Tensor b) {
    const std::size_t m = rows(a), k = cols(a), k2 = rows(b), n = cols(b);
    if (k != k2) {
        throw ShapeError("matmul shapes " + shape_str(m, k) + " and " +
                         shape_str(k2, n) + " are incompatible");
    }
    Tensor out = make_node(m, n, false);
    const auto& kt = kernels::active();
    kt.matmul_accum(nodes_[out.id].val.data(), nodes_[a.id].val.data(),
                    nodes_[b.id].val.data(), static_cast<int>(m),
                    static_cast<int>(k), static_cast<int>(n));
    nodes_[out.id].back = [this, a, b, out, m, k, n]() {
        const auto& kt2 = kernels::active();
        // ga += gy . b^T ; gb += a^T . gy
        std::vector<double> bt(nodes_[b.id].val.size());
        kernels::transpose(bt.data(), nodes_[b.id].val.data(),
                           static_cast<int>(k), static_cast<int>(n));
        kt2.matmul_accum(nodes_[a.id].grad.data(), nodes_[out.id].grad.data(),
                         bt.data(), static_cast<int>(m), static_cast<int>(n),
                         static_cast<int>(k));
        std::vector<double> at(nodes_[a.id].val.size());
        kernels::transpose(at.data(), nodes_[a.id].val.data(),
                           static_cast<int>(m), static_cast<int>(k));
        kt2.matmul_accum(nodes_[b.id].grad.data(), at.data(),
                         nodes_[out.id].grad.data(), static_cast<int>(k),
                         static_cast<int>(m), static_cast<int>(n));
    };
    return out;
}

Tensor Tape::bias_add(Tensor x, Tensor b) {
    const std::size_t r = rows(x), c = cols(x);
    if (rows(b) != 1 || cols(b) != c) {
        throw ShapeError("bias_add shapes " + shape_str(r, c) + " and " +
                         shape_str(rows(b), cols(b)) + " are incompatible");
    }
    Tensor out = make_node(r, c, false);
    const auto& kt = kernels::active();
    for (std::size_t i = 0; i < r; ++i) {
        kt.add(nodes_[out.id].val.data() + i * c,
               nodes_[x.id].val.data() + i * c, nodes_[b.id].val.data(), c);
    }
    nodes_[out.id].back = [this, x, b, out, r, c]() {
        const auto& kt2 = kernels::active();
        kt2.accum(nodes_[x.id].grad.data(), nodes_[out.id].grad.data(), r * c);
        for (std::size_t i = 0; i < r; ++i) {
            kt2.accum(nodes_[b.id].grad.data(),
                      nodes_[out.id].grad.data() + i * c, c);
        }
    };
    return out;
}

Tensor Tape::relu(Tensor x) {
    const std::size_t n = rows(x) * cols(x);
    Tensor out = make_node(rows(x), cols(x), false);
    const auto& kt = kernels::active();
    kt.relu(nodes_[out.id].val.data(), nodes_[x.id].val.data(), n);
    nodes_[out.id].back = [this, x, out, n]() {
        kernels::active().relu_grad_accum(nodes_[x.id].grad.data(),
                                          nodes_[x.id].val.data(),
                                          nodes_[out.id].grad.data(), n);
    };
    return out;
}

Tensor Tape::sigmoid(Tensor x) {
    const std::size_t n = rows(x) * cols(x);
    Tensor out = make_node(rows(x), cols(x), false);
    for (std::size_t i = 0; i < n; ++i) {
        nodes_[out.id].val[i] = 1.0 / (1.0 + std::exp(-nodes_[x.id].val[i]));
    }
    nodes_[out.id].back = [this, x, out, n]() {
        for (std::size_t i = 0; i < n; ++i) {
            const double s = nodes_[out.id].val[i];
            nodes_[x.id].grad[i] += nodes_[out.id].grad[i] * s * (1.0 - s);
        }
    };
    return out;
}

Tensor Tape::tanh(Tensor x) {
    const std::size_t n = rows(x) * cols(x);
    Tensor out = make_node(rows(x), cols(x), false);
    for (std::size_t i = 0; i < n; ++i) {
        nodes_[out.id].val[i] = std::tanh(nodes_[x.id].val[i]);
    }
    nodes_[out.id].back = [this, x, out, n]() {
        for (std::size_t i = 0; i < n; ++i) {
            const double t = nodes_[out.id].val[i];
            nodes_[x.id].grad[i] += nodes_[out.id].grad[i] * (1.0 - t * t);
        }
    };
    return out;
}

Tensor Tape::concat_cols(Tensor a, Tensor b) {
    const std::size_t r = rows(a), ca = cols(a), cb = cols(b);
    if (rows(b) != r) {
        throw ShapeError("concat_cols shapes " + shape_str(r, ca) + " and " +
                         shape_str(rows(b), cb) + " differ in rows");
    }
    Tensor out = make_node(r, ca + cb, false);
    for (std::size_t i = 0; i < r; ++i) {
        double* orow = nodes_[out.id].val.data() + i * (ca + cb);
        std::copy_n(nodes_[a.id].val.data() + i * ca, ca, orow);
        std::copy_n(nodes_[b.id].val.data() + i * cb, cb, orow + ca);
    }
    nodes_[out.id].back = [this, a, b, out, r, ca, cb]() {
        const auto& kt = kernels::active();
        for (std::size_t i = 0; i < r; ++i) {
            const double* grow = nodes_[out.id].grad.data() + i * (ca + cb);
            kt.accum(nodes_[a.id].grad.data() + i * ca, grow, ca);
            kt.accum(nodes_[b.id].grad.data() + i * cb, grow + ca, cb);
        }
    };
    return out;
}

Tensor Tape::slice_cols(Tensor x, std::size_t begin, std::size_t end) {
    const std::size_t r = rows(x), c = cols(x);
    if (begin >= end || end > c) {
        throw ShapeError("slice_cols [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") does not fit " +
                         shape_str(r, c));
    }
    const std::size_t w = end - begin;
    Tensor out = make_node(r, w, false);
    for (std::size_t i = 0; i < r; ++i) {
        std::copy_n(nodes_[x.id].val.data() + i * c + begin, w,
                    nodes_[out.id].val.data() + i * w);
    }
    nodes_[out.id].back = [this, x, out, r, c, begin, w]() {
        const auto& kt = kernels::active();
        for (std::size_t i = 0; i < r; ++i) {
            kt.accum(nodes_[x.id].grad.data() + i * c + begin,
                     nodes_[out.id].grad.data() + i * w, w);
        }
    };
    return out;
}

Tensor Tape::gather_rows(Tensor x, std::vector<std::uint32_t> indices) {
    const std::size_t c = cols(x);
    const std::size_t xr = rows(x);
    for (std::uint32_t idx : indices) {
        if (idx >= xr) {
            throw ShapeError("gather_rows index " + std::to_string(idx) +
                             " out of range for " + shape_str(xr, c));
        }
    }
    Tensor out = make_node(indices.size(), c, false);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        std::copy_n(nodes_[x.id].val.data() +
                        static_cast<std::size_t>(indices[i]) * c,
                    c, nodes_[out.id].val.data() + i * c);
    }
    nodes_[out.id].back = [this, x, out, c,
                           idx = std::move(indices)]() {
        const auto& kt = kernels::active();
        for (std::size_t i = 0; i < idx.size(); ++i) {
            kt.accum(nodes_[x.id].grad.data() +
                         static_cast<std::size_t>(idx[i]) * c,
                     nodes_[out.id].grad.data() + i * c, c);
        }
    };
    return out;
}

Tensor Tape::segment_max(Tensor x, std::vector<std::uint32_t> seg_begin,
                         std::vector<std::uint32_t> seg_end) {
    const std::size_t c = cols(x);
    const std::size_t xr = rows(x);
    if (seg_begin.size() != seg_end.size()) {
        throw ShapeError("segment_max needs equal begin/end lists, got " +
                         std::to_string(seg_begin.size()) + " and " +
                         std::to_string(seg_end.size()));
    }
    for (std::size_t g = 0; g < seg_begin.size(); ++g) {
        if (seg_end[g] > xr || seg_begin[g] > seg_end[g]) {
            throw ShapeError("segment_max segment " + std::to_string(g) +
                             " [" + std::to_string(seg_begin[g]) + ", " +
                             std::to_string(seg_end[g]) +
                             ") does not fit " + shape_str(xr, c));
        }
    }
    const int groups = static_cast<int>(seg_begin.size());
    Tensor out = make_node(seg_begin.size(), c, false);
    auto argrow = std::make_shared<std::vector<std::uint32_t>>(
        seg_begin.size() * c);
    kernels::active().segment_max(nodes_[x.id].val.data(),
                                  static_cast<int>(c), seg_begin.data(),
                                  seg_end.data(), groups,
                                  nodes_[out.id].val.data(), argrow->data());
    nodes_[out.id].back = [this, x, out, c, argrow]() {
        // Route each channel's gradient to its (first) argmax row; empty
        // segments have no argmax and contribute nothing.
        for (std::size_t g = 0; g < nodes_[out.id].rows; ++g) {
            for (std::size_t ch = 0; ch < c; ++ch) {
                const std::uint32_t row = (*argrow)[g * c + ch];
                if (row == UINT32_MAX) continue;
                nodes_[x.id].grad[static_cast<std::size_t>(row) * c + ch] +=
                    nodes_[out.id].grad[g * c + ch];
            }
        }
    };
    return out;
}

Tensor Tape::max_pool_set(Tensor x) {
    if (rows(x) == 0) {
        throw EmptySetError("max_pool_set over zero rows");
    }
    return segment_max(x, {0}, {static_cast<std::uint32_t>(rows(x))});
}

Tensor Tape::scale(Tensor x, double s) {
    const std::size_t n = rows(x) * cols(x);
    Tensor out = make_node(rows(x), cols(x), false);
    kernels::active().scale(nodes_[out.id].val.data(),
                            nodes_[x.id].val.data(), s, n);
    nodes_[out.id].back = [this, x, out, s, n]() {
        kernels::active().axpy(nodes_[x.id].grad.data(), s,
                               nodes_[out.id].grad.data(), n);
    };
    return out;
}

Tensor Tape::add(Tensor a, Tensor b) {
    if (rows(a) != rows(b) || cols(a) != cols(b)) {
        throw ShapeError("add shapes " + shape_str(rows(a), cols(a)) +
                         " and " + shape_str(rows(b), cols(b)) + " differ");
    }
    const std::size_t n = rows(a) * cols(a);
    Tensor out = make_node(rows(a), cols(a), false);
    kernels::active().add(nodes_[out.id].val.data(), nodes_[a.id].val.data(),
                          nodes_[b.id].val.data(), n);
    nodes_[out.id].back = [this, a, b, out, n]() {
        const auto& kt = kernels::active();
        kt.accum(nodes_[a.id].grad.data(), nodes_[out.id].grad.data(), n);
        kt.accum(nodes_[b.id].grad.data(), nodes_[out.id].grad.data(), n);
    };
    return out;
}

Tensor Tape::sub(Tensor a, Tensor b) {
    if (rows(a) != rows(b) || cols(a) != cols(b)) {
        throw ShapeError("sub shapes " + shape_str(rows(a), cols(a)) +
                         " and " + shape_str(rows(b), cols(b)) + " differ");
    }
    const std::size_t n = rows(a) * cols(a);
    Tensor out = make_node(rows(a), cols(a), false);
    kernels::active().sub(nodes_[out.id].val.data(), nodes_[a.id].val.data(),
                          nodes_[b.id].val.data(), n);
    nodes_[out.id].back = [this, a, b, out, n]() {
        const auto& kt = kernels::active();
        kt.accum(nodes_[a.id].grad.data(), nodes_[out.id].grad.data(), n);
        kt.axpy(nodes_[b.id].grad.data(), -1.0, nodes_[out.id].grad.data(), n);
    };
    return out;
}

Tensor Tape::sum(Tensor x) {
    const std::size_t n = rows(x) * cols(x);
    Tensor out = make_node(1, 1, false);
    nodes_[out.id].val[0] = kernels::sum(nodes_[x.id].val.data(), n);
    nodes_[out.id].back = [this, x, out, n]() {
        const double g = nodes_[out.id].grad[0];
        for (std::size_t i = 0; i < n; ++i) nodes_[x.id].grad[i] += g;
    };
    return out;
}

Tensor Tape::mean_squared_norm(Tensor x) {
    const std::size_t r = rows(x), c = cols(x);
    if (r == 0) throw EmptySetError("mean_squared_norm over zero rows");
    const std::size_t n = r * c;
    Tensor out = make_node(1, 1, false);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = nodes_[x.id].val[i];
        acc += v * v;
    }
    nodes_[out.id].val[0] = acc / static_cast<double>(r);
    nodes_[out.id].back = [this, x, out, r, n]() {
        const double s =
            2.0 * nodes_[out.id].grad[0] / static_cast<double>(r);
        kernels::active().axpy(nodes_[x.id].grad.data(), s,
                               nodes_[x.id].val.data(), n);
    };
    return out;
}

Tensor Tape::l2_normalize_rows(Tensor x) {
    const std::size_t r = rows(x), c = cols(x);
    Tensor out = make_node(r, c, false);
    auto norms = std::make_shared<std::vector<double>>(r);
    for (std::size_t i = 0; i < r; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            const double v = nodes_[x.id].val[i * c + j];
            acc += v * v;
        }
        const double nrm = std::sqrt(acc);
        if (nrm <= tol::kTinyNorm) {
            throw DegenerateInputError(
                "l2_normalize_rows: row " + std::to_string(i) +
                " has near-zero norm");
        }
        (*norms)[i] = nrm;
        for (std::size_t j = 0; j < c; ++j) {
            nodes_[out.id].val[i * c + j] = nodes_[x.id].val[i * c + j] / nrm;
        }
    }
    nodes_[out.id].back = [this, x, out, r, c, norms]() {
        // d(x/n)/dx applied to g: g/n - x (x . g) / n^3
        for (std::size_t i = 0; i < r; ++i) {
            const double nrm = (*norms)[i];
            double xg = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
                xg += nodes_[x.id].val[i * c + j] *
                      nodes_[out.id].grad[i * c + j];
            }
            const double inv = 1.0 / nrm;
            const double inv3 = inv * inv * inv;
            for (std::size_t j = 0; j < c; ++j) {
                nodes_[x.id].grad[i * c + j] +=
                    nodes_[out.id].grad[i * c + j] * inv -
                    nodes_[x.id].val[i * c + j] * xg * inv3;
            }
        }
    };
    return out;
}

void Tape::backward(Tensor loss) {
    const Node& ln = node(loss);
    if (ln.rows * ln.cols != 1) {
        throw InvalidArgumentError(
            "backward requires a scalar loss, got " +
            shape_str(ln.rows, ln.cols));
    }
    for (Node& n : nodes_) {
        if (!n.is_leaf) std::fill(n.grad.begin(), n.grad.end(), 0.0);
    }
    nodes_[loss.id].grad[0] += 1.0;
    for (std::size_t i = nodes_.size(); i-- > 0;) {
        if (nodes_[i].back) nodes_[i].back();
    }
}

}  // namespace pcreg::ad
