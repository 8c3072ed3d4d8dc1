#include "pcreg/kernels.hpp"

#include <cstdlib>
#include <string>

#include "pcreg/errors.hpp"

namespace pcreg::kernels {

#if defined(__x86_64__) || defined(__i386__)
namespace avx2 {
extern const KernelTable table;
}

bool avx2_supported() { return __builtin_cpu_supports("avx2") != 0; }

const KernelTable* avx2_table() { return &avx2::table; }
#else
bool avx2_supported() { return false; }
const KernelTable* avx2_table() { return nullptr; }
#endif

namespace {

const KernelTable& select() {
    const char* env = std::getenv("PCREG_KERNELS");
    if (env != nullptr && env[0] != '\0') {
        const std::string want(env);
        if (want == "scalar") return scalar::table;
        if (want == "avx2") {
            if (avx2_table() == nullptr || !avx2_supported()) {
                throw InvalidArgumentError(
                    "PCREG_KERNELS=avx2 requested but AVX2 is not available "
                    "on this CPU");
            }
            return *avx2_table();
        }
        throw InvalidArgumentError("unknown PCREG_KERNELS backend '" + want +
                                   "' (expected scalar or avx2)");
    }
    if (avx2_table() != nullptr && avx2_supported()) return *avx2_table();
    return scalar::table;
}

}  // namespace

const KernelTable& active() {
    static const KernelTable& picked = select();
    return picked;
}

void transpose(double* dst, const double* src, int rows, int cols) {
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            dst[static_cast<std::size_t>(j) * rows + i] =
                src[static_cast<std::size_t>(i) * cols + j];
        }
    }
}

double sum(const double* x, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
}

}  // namespace pcreg::kernels
