#include "twsf/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace twsf {

Tensor covariance(const Tensor& centered) {
    if (centered.ndim() != 2)
        throw ShapeError("covariance: rank-2 input expected, got " + shape_str(centered.shape()));
    const int64_t n = centered.rows();
    const int64_t len = centered.cols();
    if (len < 2) throw ContractError("covariance: need at least 2 observations, got " +
                                     std::to_string(len));
    const double inv = 1.0 / static_cast<double>(len - 1);
    Tensor cov = Tensor::zeros({n, n});
    for (int64_t i = 0; i < n; ++i) {
        for (int64_t j = i; j < n; ++j) {
            double s = 0.0;
            for (int64_t t = 0; t < len; ++t) s += centered(i, t) * centered(j, t);
            cov.at(i, j) = s * inv;
            cov.at(j, i) = s * inv;
        }
    }
    return cov;
}

namespace {

double off_diagonal_frobenius(const Tensor& a, int64_t n) {
    double s = 0.0;
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < n; ++j)
            if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
}

double frobenius(const Tensor& a) {
    double s = 0.0;
    for (double x : a.values()) s += x * x;
    return std::sqrt(s);
}

}  // namespace

EigenDecomposition eigh(const Tensor& sym) {
    if (sym.ndim() != 2 || sym.rows() != sym.cols())
        throw ShapeError("eigh: square matrix expected, got " + shape_str(sym.shape()));
    const int64_t n = sym.rows();

    double max_asym = 0.0;
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = i + 1; j < n; ++j)
            max_asym = std::max(max_asym, std::abs(sym(i, j) - sym(j, i)));
    if (max_asym > 1e-9)
        throw ContractError("eigh: input asymmetric by " + std::to_string(max_asym));

    Tensor a = Tensor::zeros({n, n});
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < n; ++j) a.at(i, j) = 0.5 * (sym(i, j) + sym(j, i));

    Tensor v = Tensor::zeros({n, n});
    for (int64_t i = 0; i < n; ++i) v.at(i, i) = 1.0;

    const double tol = 1e-12 * frobenius(a);
    constexpr int kMaxSweeps = 100;
    bool converged = off_diagonal_frobenius(a, n) <= tol;
    for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
        for (int64_t p = 0; p < n - 1; ++p) {
            for (int64_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                // Rotate rows/columns p and q of A.
                const double app = a(p, p), aqq = a(q, q);
                a.at(p, p) = app - t * apq;
                a.at(q, q) = aqq + t * apq;
                a.at(p, q) = 0.0;
                a.at(q, p) = 0.0;
                for (int64_t r = 0; r < n; ++r) {
                    if (r != p && r != q) {
                        const double arp = a(r, p), arq = a(r, q);
                        a.at(r, p) = c * arp - s * arq;
                        a.at(p, r) = a(r, p);
                        a.at(r, q) = s * arp + c * arq;
                        a.at(q, r) = a(r, q);
                    }
                    const double vrp = v(r, p), vrq = v(r, q);
                    v.at(r, p) = c * vrp - s * vrq;
                    v.at(r, q) = s * vrp + c * vrq;
                }
            }
        }
        converged = off_diagonal_frobenius(a, n) <= tol;
    }
    if (!converged)
        throw NumericError("eigh: no convergence after 100 sweeps, off-diagonal residual " +
                           std::to_string(off_diagonal_frobenius(a, n)));

    std::vector<int64_t> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&a](int64_t x, int64_t y) { return a(x, x) > a(y, y); });

    EigenDecomposition dec;
    dec.eigenvalues.resize(static_cast<size_t>(n));
    dec.eigenvectors = Tensor::zeros({n, n});
    for (int64_t c = 0; c < n; ++c) {
        const int64_t src = order[static_cast<size_t>(c)];
        double lambda = a(src, src);
        if (lambda < 0.0 && lambda >= -1e-9) lambda = 0.0;
        dec.eigenvalues[static_cast<size_t>(c)] = lambda;

        // Sign convention: largest-magnitude component positive, ties by
        // lowest index.
        int64_t pivot = 0;
        double best = std::abs(v(0, src));
        for (int64_t r = 1; r < n; ++r) {
            const double m = std::abs(v(r, src));
            if (m > best) {
                best = m;
                pivot = r;
            }
        }
        const double flip = v(pivot, src) < 0.0 ? -1.0 : 1.0;
        for (int64_t r = 0; r < n; ++r) dec.eigenvectors.at(r, c) = flip * v(r, src);
    }
    return dec;
}

}  // namespace twsf
