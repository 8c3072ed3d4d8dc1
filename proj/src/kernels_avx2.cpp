#include "pcreg/kernels.hpp"

#if defined(__x86_64__) || defined(__i386__)

#include <immintrin.h>

// AVX2 backend, 4 doubles per lane. Compiled with -mavx2 -ffp-contract=off;
// every expression tree matches the scalar backend so results are
// bit-identical. Tails fall back to the scalar expressions.

namespace pcreg::kernels::avx2 {

namespace {

void matmul_accum(double* dst, const double* a, const double* b, int m, int k,
                  int n) {
    for (int i = 0; i < m; ++i) {
        double* drow = dst + static_cast<std::size_t>(i) * n;
        const double* arow = a + static_cast<std::size_t>(i) * k;
        for (int kk = 0; kk < k; ++kk) {
            const double aik = arow[kk];
            const double* brow = b + static_cast<std::size_t>(kk) * n;
            const __m256d va = _mm256_set1_pd(aik);
            int j = 0;
            for (; j + 4 <= n; j += 4) {
                __m256d d = _mm256_loadu_pd(drow + j);
                __m256d vb = _mm256_loadu_pd(brow + j);
                d = _mm256_add_pd(d, _mm256_mul_pd(va, vb));
                _mm256_storeu_pd(drow + j, d);
            }
            for (; j < n; ++j) drow[j] += aik * brow[j];
        }
    }
}

void add(double* out, const double* a, const double* b, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i),
                                                _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void sub(double* out, const double* a, const double* b, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i),
                                                _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] - b[i];
}

void scale(double* out, const double* x, double s, std::size_t n) {
    const __m256d vs = _mm256_set1_pd(s);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), vs));
    }
    for (; i < n; ++i) out[i] = x[i] * s;
}

void axpy(double* y, double a, const double* x, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        vy = _mm256_add_pd(vy, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void accum(double* dst, const double* src, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(dst + i, _mm256_add_pd(_mm256_loadu_pd(dst + i),
                                                _mm256_loadu_pd(src + i)));
    }
    for (; i < n; ++i) dst[i] += src[i];
}

void relu(double* out, const double* x, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        // maxpd(x, 0) returns the second operand unless x > 0, matching the
        // scalar ternary for -0.0 and NaN inputs.
        _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
    }
    for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_grad_accum(double* gx, const double* x, const double* gy,
                     std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d mask =
            _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
        const __m256d contrib = _mm256_and_pd(mask, _mm256_loadu_pd(gy + i));
        _mm256_storeu_pd(gx + i,
                         _mm256_add_pd(_mm256_loadu_pd(gx + i), contrib));
    }
    for (; i < n; ++i) gx[i] += x[i] > 0.0 ? gy[i] : 0.0;
}

void dist2(const double* xs, const double* ys, const double* zs, std::size_t n,
           double cx, double cy, double cz, double* out) {
    const __m256d vcx = _mm256_set1_pd(cx);
    const __m256d vcy = _mm256_set1_pd(cy);
    const __m256d vcz = _mm256_set1_pd(cz);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d dx = _mm256_sub_pd(_mm256_loadu_pd(xs + i), vcx);
        const __m256d dy = _mm256_sub_pd(_mm256_loadu_pd(ys + i), vcy);
        const __m256d dz = _mm256_sub_pd(_mm256_loadu_pd(zs + i), vcz);
        const __m256d s = _mm256_add_pd(
            _mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy)),
            _mm256_mul_pd(dz, dz));
        _mm256_storeu_pd(out + i, s);
    }
    for (; i < n; ++i) {
        const double dx = xs[i] - cx;
        const double dy = ys[i] - cy;
        const double dz = zs[i] - cz;
        out[i] = ((dx * dx) + (dy * dy)) + (dz * dz);
    }
}

void min_update(double* acc, const double* x, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        // minpd(x, acc) = x < acc ? x : acc
        _mm256_storeu_pd(acc + i, _mm256_min_pd(_mm256_loadu_pd(x + i),
                                                _mm256_loadu_pd(acc + i)));
    }
    for (; i < n; ++i) acc[i] = x[i] < acc[i] ? x[i] : acc[i];
}

void transform_points(const double* r, const double* t, const double* xs,
                      const double* ys, const double* zs, std::size_t n,
                      double* ox, double* oy, double* oz) {
    __m256d vr[9];
    for (int j = 0; j < 9; ++j) vr[j] = _mm256_set1_pd(r[j]);
    const __m256d vt0 = _mm256_set1_pd(t[0]);
    const __m256d vt1 = _mm256_set1_pd(t[1]);
    const __m256d vt2 = _mm256_set1_pd(t[2]);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d x = _mm256_loadu_pd(xs + i);
        const __m256d y = _mm256_loadu_pd(ys + i);
        const __m256d z = _mm256_loadu_pd(zs + i);
        _mm256_storeu_pd(
            ox + i, _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(vr[0], x),
                                                _mm256_mul_pd(vr[1], y)),
                                  _mm256_add_pd(_mm256_mul_pd(vr[2], z), vt0)));
        _mm256_storeu_pd(
            oy + i, _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(vr[3], x),
                                                _mm256_mul_pd(vr[4], y)),
                                  _mm256_add_pd(_mm256_mul_pd(vr[5], z), vt1)));
        _mm256_storeu_pd(
            oz + i, _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(vr[6], x),
                                                _mm256_mul_pd(vr[7], y)),
                                  _mm256_add_pd(_mm256_mul_pd(vr[8], z), vt2)));
    }
    for (; i < n; ++i) {
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
        int c = 0;
        for (; c + 4 <= cols; c += 4) {
            const double* first = x + static_cast<std::size_t>(beg) * cols + c;
            __m256d best = _mm256_loadu_pd(first);
            __m256d bestrow = _mm256_set1_pd(static_cast<double>(beg));
            for (std::uint32_t rrow = beg + 1; rrow < end; ++rrow) {
                const __m256d v = _mm256_loadu_pd(
                    x + static_cast<std::size_t>(rrow) * cols + c);
                const __m256d m = _mm256_cmp_pd(v, best, _CMP_GT_OQ);
                best = _mm256_blendv_pd(best, v, m);
                bestrow = _mm256_blendv_pd(
                    bestrow, _mm256_set1_pd(static_cast<double>(rrow)), m);
            }
            _mm256_storeu_pd(orow + c, best);
            double rows_d[4];
            _mm256_storeu_pd(rows_d, bestrow);
            for (int lane = 0; lane < 4; ++lane) {
                arow[c + lane] = static_cast<std::uint32_t>(rows_d[lane]);
            }
        }
        for (; c < cols; ++c) {
            double best = x[static_cast<std::size_t>(beg) * cols + c];
            std::uint32_t bestrow = beg;
            for (std::uint32_t rrow = beg + 1; rrow < end; ++rrow) {
                const double v = x[static_cast<std::size_t>(rrow) * cols + c];
                if (v > best) {
                    best = v;
                    bestrow = rrow;
                }
            }
            orow[c] = best;
            arow[c] = bestrow;
        }
    }
}

}  // namespace

extern const KernelTable table;
const KernelTable table = {
    "avx2",          matmul_accum, add,        sub,
    scale,           axpy,         accum,      relu,
    relu_grad_accum, dist2,        min_update, transform_points,
    segment_max,
};

}  // namespace pcreg::kernels::avx2

#endif  // x86
