#include <doctest.h>

#include "test_support.hpp"
#include "twsf/kernels.hpp"

using namespace twsf;

namespace {

// Independent oracle: per-element dot product, j-major.
std::vector<double> naive_matmul(const std::vector<double>& a, const std::vector<double>& b,
                                 int64_t m, int64_t k, int64_t n) {
    std::vector<double> c(static_cast<size_t>(m * n), 0.0);
    for (int64_t j = 0; j < n; ++j)
        for (int64_t i = 0; i < m; ++i) {
            double s = 0.0;
            for (int64_t kk = 0; kk < k; ++kk) s += a[i * k + kk] * b[kk * n + j];
            c[static_cast<size_t>(i * n + j)] = s;
        }
    return c;
}

}  // namespace

TEST_CASE("matmul kernel matches naive oracle") {
    CounterRng rng(11);
    for (auto [m, k, n] : {std::tuple<int64_t, int64_t, int64_t>{3, 4, 5},
                           {1, 7, 1},
                           {16, 16, 16},
                           {5, 1, 9}}) {
        std::vector<double> a(static_cast<size_t>(m * k)), b(static_cast<size_t>(k * n));
        for (auto& x : a) x = rng.next_uniform(-2.0, 2.0);
        for (auto& x : b) x = rng.next_uniform(-2.0, 2.0);
        std::vector<double> c(static_cast<size_t>(m * n));
        kernels::matmul(a.data(), b.data(), c.data(), m, k, n);
        const auto want = naive_matmul(a, b, m, k, n);
        for (size_t i = 0; i < c.size(); ++i)
            CHECK(std::abs(c[i] - want[i]) < 1e-12);
    }
}

TEST_CASE("parallel matmul is bit-identical to the serial reference") {
    CounterRng rng(12);
    // Sizes straddling the dispatch threshold, including odd shapes.
    for (auto [m, k, n] : {std::tuple<int64_t, int64_t, int64_t>{17, 31, 13},
                           {64, 64, 64},
                           {97, 53, 71},
                           {128, 128, 128}}) {
        std::vector<double> a(static_cast<size_t>(m * k)), b(static_cast<size_t>(k * n));
        for (auto& x : a) x = rng.next_uniform(-1.0, 1.0);
        for (auto& x : b) x = rng.next_uniform(-1.0, 1.0);
        std::vector<double> cs(static_cast<size_t>(m * n)), cp(static_cast<size_t>(m * n));
        kernels::matmul_serial(a.data(), b.data(), cs.data(), m, k, n);
        kernels::matmul_parallel(a.data(), b.data(), cp.data(), m, k, n);
        for (size_t i = 0; i < cs.size(); ++i) CHECK(cs[i] == cp[i]);
    }
}

TEST_CASE("transpose kernel") {
    CounterRng rng(13);
    const int64_t m = 5, n = 3;
    std::vector<double> a(static_cast<size_t>(m * n));
    for (auto& x : a) x = rng.next_uniform(-1.0, 1.0);
    std::vector<double> t(static_cast<size_t>(m * n));
    kernels::transpose(a.data(), t.data(), m, n);
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) CHECK(t[j * m + i] == a[i * n + j]);
}
