#pragma once

#include <cstdint>

namespace twsf::kernels {

// Dense row-major kernels. The parallel variants partition output rows with
// OpenMP; each output element is accumulated in ascending-k order in both
// paths, so parallel and serial results are bit-identical.

// c[m x n] = a[m x k] * b[k x n]; c must not alias a or b.
void matmul_serial(const double* a, const double* b, double* c,
                   int64_t m, int64_t k, int64_t n);
void matmul_parallel(const double* a, const double* b, double* c,
                     int64_t m, int64_t k, int64_t n);
// Dispatches to the parallel kernel above the flop threshold.
void matmul(const double* a, const double* b, double* c,
            int64_t m, int64_t k, int64_t n);

// out[n x m] = transpose of a[m x n].
void transpose(const double* a, double* out, int64_t m, int64_t n);

// m*k*n at or above this uses the parallel path.
int64_t parallel_flop_threshold();

}  // namespace twsf::kernels
