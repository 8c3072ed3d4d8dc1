#include "pcreg/kernels.hpp"

// Reference backend. The AVX2 backend mirrors these expression trees
// exactly; any change here must be made there as well.

namespace pcreg::kernels::scalar {

namespace {

void matmul_accum(double* dst, const double* a, const double* b, int m, int k,
                  int n) {
    for (int i = 0; i < m; ++i) {
        double* drow = dst + static_cast<std::size_t>(i) * n;
        const double* arow = a + static_cast<std::size_t>(i) * k;
        for (int kk = 0; kk < k; ++kk) {
            const double aik = arow[kk];
            const double* brow = b + static_cast<std::size_t>(kk) * n;
            for (int j = 0; j < n; ++j) {
                drow[j] += aik * brow[j];
            }
        }
    }
}

void add(double* out, const double* a, const double* b, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void sub(double* out, const double* a, const double* b, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void scale(double* out, const double* x, double s, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * s;
}

void axpy(double* y, double a, const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void accum(double* dst, const double* src, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] += src[i];
}

void relu(double* out, const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_grad_accum(double* gx, const double* x, const double* gy,
                     std::size_t n) {
    // Unconditional add of 0.0 in the masked case, matching the vector
    // backend's and-mask (turns -0.0 accumulators into +0.0 identically).
    for (std::size_t i = 0; i < n; ++i) gx[i] += x[i] > 0.0 ? gy[i] : 0.0;
}

void dist2(const double* xs, const double* ys, const double* zs, std::size_t n,
           double cx, double cy, double cz, double* out) {
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = xs[i] - cx;
        const double dy = ys[i] - cy;
        const double dz = zs[i] - cz;
        out[i] = ((dx * dx) + (dy * dy)) + (dz * dz);
    }
}

void min_update(double* acc, const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) acc[i] = x[i] < acc[i] ? x[i] : acc[i];
}

void transform_points(const double* r, const double* t, const double* xs,
                      const double* ys, const double* zs, std::size_t n,
                      double* ox, double* oy, double* oz) {
    for (std::size_t i = 0; i < n; ++i) {
        const double x = xs[i], y = ys[i], z = zs[i];
        ox[i] = (r[0] * x + r[1] * y) + (r[2] * z + t[0]);
        oy[i] = (r[3] * x + r[4] * y) + (r[5] * z + t[1]);
        oz[i] = (r[6] * x + r[7] * y) + (r[8] * z + t[2]);
    }
}

void segment_max(const double* x, int cols, const std::uint32_t* seg_begin,
                 const std::uint32_t* seg_end, int groups, double* out,
                 std::uint32_t* argrow) {
    for (int g = 0; g < groups; ++g) {
        const std::uint32_t beg = seg_begin[g];
        const std::uint32_t end = seg_end[g];
        double* orow = out + static_cast<std::size_t>(g) * cols;
        std::uint32_t* arow = argrow + static_cast<std::size_t>(g) * cols;
        if (beg >= end) {
            for (int c = 0; c < cols; ++c) {
                orow[c] = 0.0;
                arow[c] = UINT32_MAX;
            }
            continue;
        }
        const double* first = x + static_cast<std::size_t>(beg) * cols;
        for (int c = 0; c < cols; ++c) {
            orow[c] = first[c];
            arow[c] = beg;
        }
        for (std::uint32_t rrow = beg + 1; rrow < end; ++rrow) {
            const double* xr = x + static_cast<std::size_t>(rrow) * cols;
            for (int c = 0; c < cols; ++c) {
                if (xr[c] > orow[c]) {
                    orow[c] = xr[c];
                    arow[c] = rrow;
                }
            }
        }
    }
}

}  // namespace

const KernelTable table = {
    "scalar",        matmul_accum, add,        sub,
    scale,           axpy,         accum,      relu,
    relu_grad_accum, dist2,        min_update, transform_points,
    segment_max,
};

}  // namespace pcreg::kernels::scalar
