#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "twsf/errors.hpp"
#include "twsf/rng.hpp"

namespace twsf {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

struct TensorNode {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // same length as value iff requires_grad, else empty
    bool requires_grad = false;
    bool is_leaf = true;  // false once produced by a recorded operation
};

// Dense n-dimensional array of 64-bit floats, row-major, shared-storage
// handle. Copying a Tensor aliases the same node; detached_copy() clones.
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> values);

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double v);
    static Tensor scalar(double v);  // shape {1}
    static Tensor uniform(Shape shape, double lo, double hi, CounterRng& rng);
    static Tensor normal(Shape shape, double mean, double stddev, CounterRng& rng);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int64_t ndim() const { return static_cast<int64_t>(node_->shape.size()); }
    int64_t numel() const { return static_cast<int64_t>(node_->value.size()); }
    int64_t rows() const;  // rank-2 only
    int64_t cols() const;
    double item() const;  // numel == 1

    std::span<const double> values() const { return node_->value; }
    std::span<double> mutable_values() { return node_->value; }
    double operator()(int64_t i) const { return node_->value[static_cast<size_t>(i)]; }
    double operator()(int64_t i, int64_t j) const {
        return node_->value[static_cast<size_t>(i * cols() + j)];
    }
    double& at(int64_t i, int64_t j) {
        return node_->value[static_cast<size_t>(i * cols() + j)];
    }

    Tensor& set_requires_grad(bool b);
    bool requires_grad() const { return node_->requires_grad; }
    std::span<const double> grad() const { return node_->grad; }
    std::span<double> mutable_grad() { return node_->grad; }
    void zero_grad();

    Tensor detached_copy() const;

    const std::shared_ptr<TensorNode>& node() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}
    std::shared_ptr<TensorNode> node_;

    friend Tensor make_op_output(Shape shape, std::vector<double> values, bool track);
};

// Wengert list of recorded operations. Constructing a Tape activates it on
// the current thread (previous tape restored on destruction); operations
// record themselves while a tape is active and an input requires grad.
// One tape per training run; arrays may be shared read-only across threads,
// the tape itself may not.
class Tape {
public:
    struct Entry {
        const char* op;
        std::vector<std::shared_ptr<TensorNode>> inputs;
        std::shared_ptr<TensorNode> output;
        std::function<void(const Entry&)> backprop;
    };

    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* active();

    void record(Entry e);
    std::size_t size() const { return entries_.size(); }
    void clear() { entries_.clear(); }

    // Seeds d(loss)/d(loss) = 1 and replays entries in reverse, visiting each
    // exactly once. Leaf gradients accumulate; intermediate gradients are
    // reset first, so calling backward twice on one tape double-counts leaves
    // only (matching the usual zero-grad-per-step discipline).
    void backward(const Tensor& loss);

private:
    std::vector<Entry> entries_;
    Tape* prev_ = nullptr;
};

// --- operations -------------------------------------------------------
// All of these record on the active tape when gradients are being tracked.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor shift(const Tensor& a, double s);
// a[m x n] + bias[n], broadcast over rows
Tensor add_row(const Tensor& a, const Tensor& bias);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);
Tensor concat(std::span<const Tensor> parts, int axis);
Tensor slice(const Tensor& a, int axis, int64_t start, int64_t len);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor softmax(const Tensor& a, int axis);
// Normalizes each last-axis slice to zero mean / unit variance (population
// variance, eps inside the sqrt), then applies gain and bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps);
Tensor gelu(const Tensor& a);
// Inverted dropout: keeps with probability 1-rate and scales by 1/(1-rate).
// Draws numel() uniforms from rng when training and rate > 0; identity in
// eval mode (returns the input handle unchanged).
Tensor dropout(const Tensor& a, double rate, CounterRng& rng, bool training);

// Throws NumericError when any element is NaN/Inf.
void ensure_finite(const Tensor& a, const char* what);

}  // namespace twsf
