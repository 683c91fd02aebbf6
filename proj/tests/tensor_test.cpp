#include <doctest.h>

#include <array>

#include "test_support.hpp"

using namespace twsf;
using namespace twsf::testing;

TEST_CASE("tensor construction validates shape") {
    CHECK_THROWS_AS(Tensor({2, 3}, {1.0, 2.0}), ShapeError);
    CHECK_THROWS_AS(Tensor({0, 3}, {}), ShapeError);
    CHECK_THROWS_AS(Tensor({-1}, {1.0}), ShapeError);
    const Tensor t({2, 2}, {1, 2, 3, 4});
    CHECK(t(1, 0) == 3.0);
}

TEST_CASE("matmul: identity and hand values") {
    Tensor eye = Tensor::zeros({3, 3});
    for (int64_t i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
    CounterRng rng(1);
    const Tensor x = random_tensor({3, 4}, rng);
    CHECK(bit_equal(matmul(eye, x), x));

    const Tensor a({2, 2}, {1, 2, 3, 4});
    const Tensor b({2, 1}, {0, 1});
    const Tensor c = matmul(a, b);
    CHECK(c(0, 0) == 2.0);
    CHECK(c(1, 0) == 4.0);

    CHECK_THROWS_AS(matmul(a, Tensor::zeros({3, 2})), ShapeError);
}

TEST_CASE("softmax: symmetry, saturation, row sums") {
    const Tensor flat = softmax(Tensor({3}, {0, 0, 0}), 0);
    for (int64_t i = 0; i < 3; ++i) CHECK(flat(i) == doctest::Approx(1.0 / 3).epsilon(1e-12));

    const Tensor sat = softmax(Tensor({3}, {1000, 0, 0}), 0);
    CHECK(std::abs(sat(0) - 1.0) < 1e-12);
    CHECK(std::abs(sat(1)) < 1e-12);
    CHECK(std::abs(sat(2)) < 1e-12);

    CounterRng rng(2);
    const Tensor x = random_tensor({3, 4}, rng, -5.0, 5.0);
    const Tensor rows = softmax(x, 1);
    for (int64_t i = 0; i < 3; ++i) {
        double s = 0.0;
        for (int64_t j = 0; j < 4; ++j) {
            CHECK(rows(i, j) >= 0.0);
            s += rows(i, j);
        }
        CHECK(std::abs(s - 1.0) < 1e-9);
    }
    const Tensor cols = softmax(x, 0);
    for (int64_t j = 0; j < 4; ++j) {
        double s = 0.0;
        for (int64_t i = 0; i < 3; ++i) s += cols(i, j);
        CHECK(std::abs(s - 1.0) < 1e-9);
    }
}

TEST_CASE("layer_norm: degenerate and hand-computed values") {
    const Tensor gain = Tensor::full({3}, 1.0);
    const Tensor bias = Tensor::zeros({3});

    const Tensor constant = layer_norm(Tensor({3}, {5, 5, 5}), gain, bias, 1e-5);
    for (int64_t i = 0; i < 3; ++i) CHECK(std::abs(constant(i)) < 1e-12);

    // mean 2, population std sqrt(2/3)
    const Tensor y = layer_norm(Tensor({3}, {1, 2, 3}), gain, bias, 1e-12);
    CHECK(y(0) == doctest::Approx(-1.2247).epsilon(1e-3));
    CHECK(std::abs(y(1)) < 1e-9);
    CHECK(y(2) == doctest::Approx(1.2247).epsilon(1e-3));

    CounterRng rng(3);
    const Tensor x = random_tensor({4, 6}, rng);
    const Tensor out = layer_norm(x, Tensor::full({6}, 1.0), Tensor::zeros({6}), 1e-5);
    for (int64_t r = 0; r < 4; ++r) {
        double m = 0.0;
        for (int64_t j = 0; j < 6; ++j) m += out(r, j);
        CHECK(std::abs(m / 6.0) < 1e-6);
    }
}

TEST_CASE("backward: linear and quadratic hand cases") {
    Tensor x = Tensor({2, 2}, {1, 2, 3, 4}).set_requires_grad(true);
    {
        Tape tape;
        const Tensor loss = sum(x);
        tape.backward(loss);
    }
    for (int64_t i = 0; i < 4; ++i) CHECK(x.grad()[static_cast<size_t>(i)] == 1.0);

    Tensor y = Tensor({2}, {1, -2}).set_requires_grad(true);
    {
        Tape tape;
        const Tensor loss = sum(mul(y, y));
        tape.backward(loss);
    }
    CHECK(y.grad()[0] == doctest::Approx(2.0));
    CHECK(y.grad()[1] == doctest::Approx(-4.0));
}

TEST_CASE("backward: contract errors and unused leaves") {
    Tensor x = Tensor({2}, {1, 2}).set_requires_grad(true);
    Tensor unused = Tensor({2}, {7, 8}).set_requires_grad(true);
    Tape tape;
    const Tensor v = mul(x, x);  // not scalar
    CHECK_THROWS_AS(tape.backward(v), ContractError);

    const Tensor loss = sum(v);
    tape.backward(loss);
    CHECK(unused.grad()[0] == 0.0);
    CHECK(unused.grad()[1] == 0.0);

    const Tensor off_tape = Tensor::scalar(1.0).set_requires_grad(true);
    CHECK_THROWS_AS(tape.backward(off_tape), ContractError);
}

TEST_CASE("reshape, slice, concat round trips") {
    CounterRng rng(4);
    const Tensor x = random_tensor({2, 6}, rng);
    CHECK(bit_equal(reshape(reshape(x, {3, 4}), {2, 6}), x));
    CHECK_THROWS_AS(reshape(x, {5, 5}), ShapeError);

    const Tensor top = slice(x, 0, 0, 1);
    const Tensor bottom = slice(x, 0, 1, 1);
    const std::array<Tensor, 2> rows{top, bottom};
    CHECK(bit_equal(concat(rows, 0), x));

    const Tensor left = slice(x, 1, 0, 2);
    const Tensor right = slice(x, 1, 2, 4);
    const std::array<Tensor, 2> cols{left, right};
    CHECK(bit_equal(concat(cols, 1), x));

    CHECK_THROWS_AS(slice(x, 0, 0, 3), ShapeError);
    CHECK_THROWS_AS(slice(x, 1, 5, 2), ShapeError);
}

TEST_CASE("transpose is an involution") {
    CounterRng rng(5);
    const Tensor x = random_tensor({3, 5}, rng);
    CHECK(bit_equal(transpose(transpose(x)), x));
}

TEST_CASE("dropout: eval identity, seeded train masks") {
    CounterRng rng(6);
    const Tensor x = random_tensor({4, 4}, rng);

    CounterRng d1(99);
    const Tensor eval_out = dropout(x, 0.5, d1, /*training=*/false);
    CHECK(eval_out.node() == x.node());
    CHECK(d1.counter() == 0);  // no draws in eval mode

    CounterRng d2(99);
    CounterRng d3(99);
    const Tensor a = dropout(x, 0.5, d2, true);
    const Tensor b = dropout(x, 0.5, d3, true);
    CHECK(bit_equal(a, b));
    // Surviving entries are scaled by 1/(1-rate).
    for (int64_t i = 0; i < a.numel(); ++i) {
        const double v = a.values()[static_cast<size_t>(i)];
        const double orig = x.values()[static_cast<size_t>(i)];
        CHECK((v == 0.0 || v == doctest::Approx(orig * 2.0)));
    }
    CHECK_THROWS_AS(dropout(x, 1.0, d2, true), ContractError);
}

TEST_CASE("forward determinism: same seed, same bits") {
    auto run = [] {
        CounterRng rng(42);
        const Tensor a = random_tensor({4, 4}, rng);
        const Tensor b = random_tensor({4, 4}, rng);
        CounterRng drop(7);
        return dropout(gelu(matmul(a, softmax(b, 1))), 0.3, drop, true);
    };
    CHECK(bit_equal(run(), run()));
}

TEST_CASE("ensure_finite flags NaN") {
    Tensor x = Tensor::zeros({2});
    x.mutable_values()[1] = std::nan("");
    CHECK_THROWS_AS(ensure_finite(x, "probe"), NumericError);
}
