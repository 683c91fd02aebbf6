#include "twsf/kernels.hpp"

#include <cstring>

namespace twsf::kernels {

namespace {
constexpr int64_t kParallelFlops = 1 << 17;

// Shared inner body: accumulates row i of c in ascending-k order.
inline void matmul_row(const double* a, const double* b, double* c,
                       int64_t i, int64_t k, int64_t n) {
    double* ci = c + i * n;
    for (int64_t j = 0; j < n; ++j) ci[j] = 0.0;
    const double* ai = a + i * k;
    for (int64_t kk = 0; kk < k; ++kk) {
        const double aik = ai[kk];
        const double* bk = b + kk * n;
        for (int64_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
    }
}
}  // namespace

int64_t parallel_flop_threshold() { return kParallelFlops; }

void matmul_serial(const double* a, const double* b, double* c,
                   int64_t m, int64_t k, int64_t n) {
    for (int64_t i = 0; i < m; ++i) matmul_row(a, b, c, i, k, n);
}

void matmul_parallel(const double* a, const double* b, double* c,
                     int64_t m, int64_t k, int64_t n) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < m; ++i) matmul_row(a, b, c, i, k, n);
}

void matmul(const double* a, const double* b, double* c,
            int64_t m, int64_t k, int64_t n) {
#ifdef _OPENMP
    if (m * k * n >= kParallelFlops) {
        matmul_parallel(a, b, c, m, k, n);
        return;
    }
#endif
    matmul_serial(a, b, c, m, k, n);
}

void transpose(const double* a, double* out, int64_t m, int64_t n) {
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
}

}  // namespace twsf::kernels
