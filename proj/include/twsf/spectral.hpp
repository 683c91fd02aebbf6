#pragma once

#include "twsf/tensor.hpp"

namespace twsf {

// Eigenpairs of a symmetric matrix, eigenvalues descending; column i of
// eigenvectors pairs with eigenvalues[i]. Columns are orthonormal and each
// column's largest-magnitude component is positive (ties broken by lowest
// index), giving a deterministic sign convention.
struct EigenDecomposition {
    std::vector<double> eigenvalues;
    Tensor eigenvectors;  // N x N
};

// Sample covariance (1/(L-1)) * X * X^T of row-centered data X[N x L].
// Output is exactly symmetric (upper triangle mirrored). L >= 2 required.
Tensor covariance(const Tensor& centered);

// Cyclic Jacobi eigendecomposition. Input must be symmetric within 1e-9
// (it is symmetrized via (A + A^T)/2 before sweeping). Converges when the
// off-diagonal Frobenius norm drops below 1e-12 * ||A||_F; throws
// NumericError with the residual after 100 sweeps. Eigenvalues in
// [-1e-9, 0) are clamped to zero.
EigenDecomposition eigh(const Tensor& sym);

}  // namespace twsf
