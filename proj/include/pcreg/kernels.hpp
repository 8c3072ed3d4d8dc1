#pragma once

#include <cstddef>
#include <cstdint>

// Data-parallel inner loops shared by the tensor ops, the spatial index and
// the geometry transforms. Every routine has a scalar reference
// implementation and, on x86-64, an AVX2 variant selected at runtime.
//
// The two backends are bit-identical by construction: no FMA contraction,
// identical per-element expression trees, and reduction orders that never
// depend on the vector width (matmul_accum accumulates k-outer, so each
// output element sees the same sequence of rounded mul/add steps in both
// backends). Tests assert exact equality between backends.

namespace pcreg::kernels {

struct KernelTable {
    const char* name;

    // dst[m x n] += a[m x k] * b[k x n], all row-major.
    // Accumulation order: for each row i, k ascending, n ascending.
    void (*matmul_accum)(double* dst, const double* a, const double* b,
                         int m, int k, int n);

    void (*add)(double* out, const double* a, const double* b, std::size_t n);
    void (*sub)(double* out, const double* a, const double* b, std::size_t n);
    void (*scale)(double* out, const double* x, double s, std::size_t n);
    // y[i] += a * x[i]
    void (*axpy)(double* y, double a, const double* x, std::size_t n);
    // dst[i] += src[i]
    void (*accum)(double* dst, const double* src, std::size_t n);

    void (*relu)(double* out, const double* x, std::size_t n);
    // gx[i] += (x[i] > 0 ? gy[i] : 0.0)
    void (*relu_grad_accum)(double* gx, const double* x, const double* gy,
                            std::size_t n);

    // out[i] = ((xs[i]-cx)^2 + (ys[i]-cy)^2) + (zs[i]-cz)^2
    void (*dist2)(const double* xs, const double* ys, const double* zs,
                  std::size_t n, double cx, double cy, double cz, double* out);
    // acc[i] = min(acc[i], x[i]); x compared first so NaN handling matches
    // the scalar ternary.
    void (*min_update)(double* acc, const double* x, std::size_t n);

    // Rigid transform of an SoA point list:
    //   ox[i] = ((r[0]*x + r[1]*y) + (r[2]*z + t[0])), rows 1/2 alike.
    void (*transform_points)(const double* r /*9, row-major*/,
                             const double* t /*3*/, const double* xs,
                             const double* ys, const double* zs, std::size_t n,
                             double* ox, double* oy, double* oz);

    // Per-group, per-channel max over row segments of x[rows x cols].
    // Group g covers rows [seg_begin[g], seg_end[g]). Ties keep the first
    // (lowest) row. Empty groups produce 0.0 with argrow = UINT32_MAX.
    void (*segment_max)(const double* x, int cols, const std::uint32_t* seg_begin,
                        const std::uint32_t* seg_end, int groups, double* out,
                        std::uint32_t* argrow);
};

namespace scalar {
extern const KernelTable table;
}

// Present only in x86-64 builds; null otherwise.
const KernelTable* avx2_table();
bool avx2_supported();

// Backend picked once per process: PCREG_KERNELS=scalar|avx2 overrides the
// default (avx2 when supported, scalar otherwise). Forcing avx2 on an
// unsupported CPU is an error.
const KernelTable& active();

// Plain helpers without a vector variant.
void transpose(double* dst, const double* src, int rows, int cols);
double sum(const double* x, std::size_t n);  // left-to-right

}  // namespace pcreg::kernels
