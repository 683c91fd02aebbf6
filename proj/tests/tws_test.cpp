#include <doctest.h>

#include <sstream>

#include "test_support.hpp"
#include "twsf/tws.hpp"

using namespace twsf;
using namespace twsf::testing;

namespace {

// Explicit-loop projection oracle, independent of the kernel path.
Tensor oracle_whiten(const TwsWhitener& w, const Tensor& window) {
    const int64_t n = window.rows(), len = window.cols(), k = w.k();
    Tensor centered = Tensor::zeros({n, len});
    for (int64_t i = 0; i < n; ++i)
        for (int64_t t = 0; t < len; ++t)
            centered.at(i, t) =
                window(i, t) - (w.centered_projection() ? w.mean()[static_cast<size_t>(i)] : 0.0);
    Tensor psi = Tensor::zeros({k, len});
    for (int64_t c = 0; c < k; ++c)
        for (int64_t t = 0; t < len; ++t) {
            double s = 0.0;
            for (int64_t i = 0; i < n; ++i) s += w.basis()(i, c) * centered(i, t);
            psi.at(c, t) = s;
        }
    Tensor out = Tensor::zeros({n, len});
    for (int64_t i = 0; i < n; ++i)
        for (int64_t t = 0; t < len; ++t) {
            double s = 0.0;
            for (int64_t c = 0; c < k; ++c) s += w.basis()(i, c) * psi(c, t);
            out.at(i, t) = s + w.mean()[static_cast<size_t>(i)];
        }
    return out;
}

Tensor synthetic_series(int64_t n, int64_t len, CounterRng& rng) {
    Tensor x = Tensor::zeros({n, len});
    for (int64_t i = 0; i < n; ++i)
        for (int64_t t = 0; t < len; ++t)
            x.at(i, t) = std::sin(0.01 * static_cast<double>(t * (i + 1))) +
                         0.5 * rng.next_normal() + static_cast<double>(i);
    return x;
}

}  // namespace

TEST_CASE("select_k: threshold boundary is inclusive") {
    const std::vector<double> spectrum{5, 3, 1, 1};
    CHECK(select_k(spectrum, 0.90) == 3);  // cumulative ratios .5, .8, .9, 1.0
    CHECK(select_k(spectrum, 0.79) == 2);
    CHECK(select_k(spectrum, 1.0) == 4);
    CHECK(select_k(spectrum, 0.01) == 1);
}

TEST_CASE("fit: exact rank-2 series selects k=2 at threshold 0.90") {
    CounterRng rng(31);
    const int64_t len = 400;
    Tensor series = Tensor::zeros({3, len});
    for (int64_t t = 0; t < len; ++t) {
        const double s1 = rng.next_normal(0.0, std::sqrt(1.4));
        const double s2 = rng.next_normal(0.0, std::sqrt(3.0));
        series.at(0, t) = s1;
        series.at(1, t) = 2.0 * s1;  // exact linear dependence: rank 2 overall
        series.at(2, t) = s2;
    }
    const TwsWhitener w = TwsWhitener::fit(series, 0.90);
    CHECK(w.k() == 2);
    CHECK_FALSE(w.degenerate());
    CHECK(w.captured_variance_ratio() >= 0.90);
    CHECK(w.captured_variance_ratio() <= 1.0 + 1e-12);
}

TEST_CASE("fit: threshold 1.0 keeps every component") {
    CounterRng rng(32);
    const Tensor series = synthetic_series(4, 200, rng);
    const TwsWhitener w = TwsWhitener::fit(series, 1.0);
    CHECK(w.k() == 4);
    CHECK(w.captured_variance_ratio() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("fit: zero-variance series degrades gracefully") {
    const TwsWhitener w = TwsWhitener::fit(Tensor::full({3, 50}, 2.5), 0.9);
    CHECK(w.degenerate());
    CHECK(w.k() == 1);
    CHECK(w.basis()(0, 0) == 1.0);
    CHECK(w.basis()(1, 0) == 0.0);
    CHECK(w.captured_variance_ratio() == 1.0);
    // Whitening a constant window equal to the mean returns it unchanged.
    const Tensor window = Tensor::full({3, 8}, 2.5);
    CHECK(max_abs_diff(w.whiten_window(window), window) < 1e-12);
}

TEST_CASE("whiten_window: matches the explicit-loop oracle") {
    CounterRng rng(33);
    const TwsWhitener w = TwsWhitener::fit(synthetic_series(5, 300, rng), 0.9);
    const Tensor window = random_tensor({5, 96}, rng, -2.0, 2.0);
    CHECK(max_abs_diff(w.whiten_window(window), oracle_whiten(w, window)) < 1e-9);
}

TEST_CASE("whiten_window: full basis is the identity, centered mode") {
    CounterRng rng(34);
    const TwsWhitener w = TwsWhitener::fit(synthetic_series(4, 250, rng), 1.0);
    CHECK(w.k() == 4);
    const Tensor window = random_tensor({4, 30}, rng);
    CHECK(max_abs_diff(w.whiten_window(window), window) < 1e-8);
}

TEST_CASE("whiten_window: constant window at the mean is a fixed point") {
    CounterRng rng(35);
    const Tensor series = synthetic_series(4, 250, rng);
    const TwsWhitener w = TwsWhitener::fit(series, 0.8);
    Tensor window = Tensor::zeros({4, 12});
    for (int64_t i = 0; i < 4; ++i)
        for (int64_t t = 0; t < 12; ++t) window.at(i, t) = w.mean()[static_cast<size_t>(i)];
    CHECK(max_abs_diff(w.whiten_window(window), window) < 1e-9);
}

TEST_CASE("whitener invariants: idempotence, non-expansion, residual orthogonality") {
    CounterRng rng(36);
    const TwsWhitener w = TwsWhitener::fit(synthetic_series(7, 500, rng), 0.9);
    for (int trial = 0; trial < 10; ++trial) {
        const Tensor window = random_tensor({7, 96}, rng, -3.0, 3.0);
        const Tensor once = w.whiten_window(window);
        const Tensor twice = w.whiten_window(once);
        CHECK(max_abs_diff(twice, once) < 1e-8);

        double in_energy = 0.0, out_energy = 0.0;
        for (int64_t i = 0; i < 7; ++i)
            for (int64_t t = 0; t < 96; ++t) {
                const double ci = window(i, t) - w.mean()[static_cast<size_t>(i)];
                const double co = once(i, t) - w.mean()[static_cast<size_t>(i)];
                in_energy += ci * ci;
                out_energy += co * co;
            }
        CHECK(std::sqrt(out_energy) <= std::sqrt(in_energy) + 1e-9);

        // V^T (window - whitened) vanishes: the removed part is orthogonal
        // to the kept subspace.
        for (int64_t c = 0; c < w.k(); ++c)
            for (int64_t t = 0; t < 96; ++t) {
                double dot = 0.0;
                for (int64_t i = 0; i < 7; ++i)
                    dot += w.basis()(i, c) * (window(i, t) - once(i, t));
                CHECK(std::abs(dot) < 1e-8);
            }
    }
}

TEST_CASE("whitener: windows one at a time equal the concatenated pass") {
    CounterRng rng(37);
    const TwsWhitener w = TwsWhitener::fit(synthetic_series(4, 300, rng), 0.9);
    const Tensor w1 = random_tensor({4, 10}, rng);
    const Tensor w2 = random_tensor({4, 14}, rng);
    Tensor joined = Tensor::zeros({4, 24});
    for (int64_t i = 0; i < 4; ++i) {
        for (int64_t t = 0; t < 10; ++t) joined.at(i, t) = w1(i, t);
        for (int64_t t = 0; t < 14; ++t) joined.at(i, 10 + t) = w2(i, t);
    }
    const Tensor a1 = w.whiten_window(w1);
    const Tensor a2 = w.whiten_window(w2);
    const Tensor aj = w.whiten_window(joined);
    for (int64_t i = 0; i < 4; ++i) {
        for (int64_t t = 0; t < 10; ++t) CHECK(std::abs(a1(i, t) - aj(i, t)) < 1e-12);
        for (int64_t t = 0; t < 14; ++t) CHECK(std::abs(a2(i, t) - aj(i, 10 + t)) < 1e-12);
    }
}

TEST_CASE("whitener: literal projection mode") {
    CounterRng rng(38);
    const Tensor series = synthetic_series(5, 300, rng);
    const TwsWhitener w = TwsWhitener::fit(series, 0.9, /*centered_projection=*/false);
    CHECK_FALSE(w.centered_projection());
    const Tensor window = random_tensor({5, 20}, rng);
    CHECK(max_abs_diff(w.whiten_window(window), oracle_whiten(w, window)) < 1e-9);
}

TEST_CASE("whitener: captured ratio equals the recomputed sum") {
    CounterRng rng(39);
    const TwsWhitener w = TwsWhitener::fit(synthetic_series(6, 400, rng), 0.9);
    double kept = 0.0, total = 0.0;
    for (size_t i = 0; i < w.eigenvalues().size(); ++i) {
        total += w.eigenvalues()[i];
        if (static_cast<int64_t>(i) < w.k()) kept += w.eigenvalues()[i];
    }
    CHECK(std::abs(w.captured_variance_ratio() - kept / total) < 1e-12);
}

TEST_CASE("whitener: persistence round trip is exact") {
    CounterRng rng(40);
    const TwsWhitener w = TwsWhitener::fit(synthetic_series(5, 200, rng), 0.85);
    std::stringstream ss;
    w.save(ss);
    const TwsWhitener r = TwsWhitener::load(ss);
    CHECK(r.feature_count() == w.feature_count());
    CHECK(r.k() == w.k());
    CHECK(r.threshold() == w.threshold());
    CHECK(r.centered_projection() == w.centered_projection());
    CHECK(r.degenerate() == w.degenerate());
    CHECK(r.mean() == w.mean());
    CHECK(r.eigenvalues() == w.eigenvalues());
    CHECK(bit_equal(r.basis(), w.basis()));

    std::stringstream bad("not a whitener\n");
    CHECK_THROWS_AS(TwsWhitener::load(bad), ParseError);
}

TEST_CASE("whitener: feature-count mismatch is a shape error") {
    CounterRng rng(41);
    const TwsWhitener w = TwsWhitener::fit(synthetic_series(4, 100, rng), 0.9);
    CHECK_THROWS_AS(w.whiten_window(Tensor::zeros({5, 10})), ShapeError);
}
