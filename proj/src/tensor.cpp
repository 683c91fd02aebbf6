#include "twsf/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "twsf/kernels.hpp"

namespace twsf {

int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

// --- Tensor -----------------------------------------------------------

Tensor::Tensor(Shape shape, std::vector<double> values) {
    if (shape.empty()) throw ShapeError("tensor: empty shape");
    for (int64_t d : shape)
        if (d <= 0) throw ShapeError("tensor: non-positive dimension in " + shape_str(shape));
    if (shape_numel(shape) != static_cast<int64_t>(values.size()))
        throw ShapeError("tensor: " + shape_str(shape) + " does not hold " +
                         std::to_string(values.size()) + " values");
    node_ = std::make_shared<TensorNode>();
    node_->shape = std::move(shape);
    node_->value = std::move(values);
}

Tensor Tensor::zeros(Shape shape) {
    auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(static_cast<size_t>(n), 0.0));
}

Tensor Tensor::full(Shape shape, double v) {
    auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(static_cast<size_t>(n), v));
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::uniform(Shape shape, double lo, double hi, CounterRng& rng) {
    auto n = shape_numel(shape);
    std::vector<double> v(static_cast<size_t>(n));
    for (auto& x : v) x = rng.next_uniform(lo, hi);
    return Tensor(std::move(shape), std::move(v));
}

Tensor Tensor::normal(Shape shape, double mean, double stddev, CounterRng& rng) {
    auto n = shape_numel(shape);
    std::vector<double> v(static_cast<size_t>(n));
    for (auto& x : v) x = rng.next_normal(mean, stddev);
    return Tensor(std::move(shape), std::move(v));
}

int64_t Tensor::rows() const {
    if (ndim() != 2) throw ShapeError("rows(): tensor is not rank-2, shape " + shape_str(shape()));
    return node_->shape[0];
}

int64_t Tensor::cols() const {
    if (ndim() != 2) throw ShapeError("cols(): tensor is not rank-2, shape " + shape_str(shape()));
    return node_->shape[1];
}

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("item(): tensor has " + std::to_string(numel()) + " elements");
    return node_->value[0];
}

Tensor& Tensor::set_requires_grad(bool b) {
    node_->requires_grad = b;
    if (b)
        node_->grad.assign(node_->value.size(), 0.0);
    else
        node_->grad.clear();
    return *this;
}

void Tensor::zero_grad() {
    std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detached_copy() const {
    return Tensor(node_->shape, node_->value);
}

// --- Tape -------------------------------------------------------------

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape::Tape() : prev_(g_active_tape) { g_active_tape = this; }

Tape::~Tape() { g_active_tape = prev_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::record(Entry e) { entries_.push_back(std::move(e)); }

void Tape::backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1)
        throw ContractError("backward: loss must be a defined scalar");
    const auto& ln = loss.node();
    bool on_tape = false;
    for (const auto& e : entries_)
        if (e.output == ln) {
            on_tape = true;
            break;
        }
    if (!on_tape) throw ContractError("backward: loss was not recorded on this tape");

    for (auto& e : entries_)
        std::fill(e.output->grad.begin(), e.output->grad.end(), 0.0);
    ln->grad[0] = 1.0;
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) it->backprop(*it);
}

// --- op plumbing ------------------------------------------------------

namespace {

bool tracking(std::initializer_list<const Tensor*> inputs) {
    if (!Tape::active()) return false;
    for (const Tensor* t : inputs)
        if (t->requires_grad()) return true;
    return false;
}

// Adds src into node's grad when it participates in differentiation.
void accum(const std::shared_ptr<TensorNode>& node, const std::vector<double>& src) {
    if (!node->requires_grad) return;
    for (size_t i = 0; i < src.size(); ++i) node->grad[i] += src[i];
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

}  // namespace

Tensor make_op_output(Shape shape, std::vector<double> values, bool track) {
    Tensor out(std::move(shape), std::move(values));
    if (track) {
        out.node()->is_leaf = false;
        out.set_requires_grad(true);
    }
    return out;
}

namespace {

using Entry = Tape::Entry;

void record_op(const char* op, std::initializer_list<Tensor> inputs, const Tensor& out,
               std::function<void(const Entry&)> backprop) {
    Entry e;
    e.op = op;
    for (const Tensor& t : inputs) e.inputs.push_back(t.node());
    e.output = out.node();
    e.backprop = std::move(backprop);
    Tape::active()->record(std::move(e));
}

}  // namespace

// --- elementwise ------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    const bool track = tracking({&a, &b});
    std::vector<double> v(a.values().begin(), a.values().end());
    for (size_t i = 0; i < v.size(); ++i) v[i] += b.values()[i];
    Tensor out = make_op_output(a.shape(), std::move(v), track);
    if (track)
        record_op("add", {a, b}, out, [](const Entry& e) {
            accum(e.inputs[0], e.output->grad);
            accum(e.inputs[1], e.output->grad);
        });
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    const bool track = tracking({&a, &b});
    std::vector<double> v(a.values().begin(), a.values().end());
    for (size_t i = 0; i < v.size(); ++i) v[i] -= b.values()[i];
    Tensor out = make_op_output(a.shape(), std::move(v), track);
    if (track)
        record_op("sub", {a, b}, out, [](const Entry& e) {
            accum(e.inputs[0], e.output->grad);
            if (e.inputs[1]->requires_grad)
                for (size_t i = 0; i < e.output->grad.size(); ++i)
                    e.inputs[1]->grad[i] -= e.output->grad[i];
        });
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    const bool track = tracking({&a, &b});
    std::vector<double> v(a.values().begin(), a.values().end());
    for (size_t i = 0; i < v.size(); ++i) v[i] *= b.values()[i];
    Tensor out = make_op_output(a.shape(), std::move(v), track);
    if (track)
        record_op("mul", {a, b}, out, [](const Entry& e) {
            const auto& g = e.output->grad;
            if (e.inputs[0]->requires_grad)
                for (size_t i = 0; i < g.size(); ++i)
                    e.inputs[0]->grad[i] += g[i] * e.inputs[1]->value[i];
            if (e.inputs[1]->requires_grad)
                for (size_t i = 0; i < g.size(); ++i)
                    e.inputs[1]->grad[i] += g[i] * e.inputs[0]->value[i];
        });
    return out;
}

Tensor scale(const Tensor& a, double s) {
    const bool track = tracking({&a});
    std::vector<double> v(a.values().begin(), a.values().end());
    for (auto& x : v) x *= s;
    Tensor out = make_op_output(a.shape(), std::move(v), track);
    if (track)
        record_op("scale", {a}, out, [s](const Entry& e) {
            if (e.inputs[0]->requires_grad)
                for (size_t i = 0; i < e.output->grad.size(); ++i)
                    e.inputs[0]->grad[i] += s * e.output->grad[i];
        });
    return out;
}

Tensor shift(const Tensor& a, double s) {
    const bool track = tracking({&a});
    std::vector<double> v(a.values().begin(), a.values().end());
    for (auto& x : v) x += s;
    Tensor out = make_op_output(a.shape(), std::move(v), track);
    if (track)
        record_op("shift", {a}, out,
                  [](const Entry& e) { accum(e.inputs[0], e.output->grad); });
    return out;
}

Tensor add_row(const Tensor& a, const Tensor& bias) {
    if (a.ndim() != 2 || bias.ndim() != 1 || bias.shape()[0] != a.cols())
        throw ShapeError("add_row: expected [m x n] + [n], got " + shape_str(a.shape()) + " + " +
                         shape_str(bias.shape()));
    const bool track = tracking({&a, &bias});
    const int64_t m = a.rows(), n = a.cols();
    std::vector<double> v(a.values().begin(), a.values().end());
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) v[static_cast<size_t>(i * n + j)] += bias(j);
    Tensor out = make_op_output(a.shape(), std::move(v), track);
    if (track)
        record_op("add_row", {a, bias}, out, [m, n](const Entry& e) {
            const auto& g = e.output->grad;
            accum(e.inputs[0], g);
            if (e.inputs[1]->requires_grad)
                for (int64_t i = 0; i < m; ++i)
                    for (int64_t j = 0; j < n; ++j)
                        e.inputs[1]->grad[static_cast<size_t>(j)] += g[static_cast<size_t>(i * n + j)];
        });
    return out;
}

// --- linear algebra ---------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.cols() != b.rows())
        throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    const bool track = tracking({&a, &b});
    const int64_t m = a.rows(), k = a.cols(), n = b.cols();
    std::vector<double> v(static_cast<size_t>(m * n));
    kernels::matmul(a.values().data(), b.values().data(), v.data(), m, k, n);
    Tensor out = make_op_output({m, n}, std::move(v), track);
    if (track)
        record_op("matmul", {a, b}, out, [m, k, n](const Entry& e) {
            const auto& g = e.output->grad;
            if (e.inputs[0]->requires_grad) {
                // da += g * b^T
                std::vector<double> bt(static_cast<size_t>(n * k));
                kernels::transpose(e.inputs[1]->value.data(), bt.data(), k, n);
                std::vector<double> da(static_cast<size_t>(m * k));
                kernels::matmul(g.data(), bt.data(), da.data(), m, n, k);
                accum(e.inputs[0], da);
            }
            if (e.inputs[1]->requires_grad) {
                // db += a^T * g
                std::vector<double> at(static_cast<size_t>(k * m));
                kernels::transpose(e.inputs[0]->value.data(), at.data(), m, k);
                std::vector<double> db(static_cast<size_t>(k * n));
                kernels::matmul(at.data(), g.data(), db.data(), k, m, n);
                accum(e.inputs[1], db);
            }
        });
    return out;
}

Tensor transpose(const Tensor& a) {
    if (a.ndim() != 2) throw ShapeError("transpose: rank-2 expected, got " + shape_str(a.shape()));
    const bool track = tracking({&a});
    const int64_t m = a.rows(), n = a.cols();
    std::vector<double> v(static_cast<size_t>(m * n));
    kernels::transpose(a.values().data(), v.data(), m, n);
    Tensor out = make_op_output({n, m}, std::move(v), track);
    if (track)
        record_op("transpose", {a}, out, [m, n](const Entry& e) {
            if (!e.inputs[0]->requires_grad) return;
            std::vector<double> gt(static_cast<size_t>(m * n));
            kernels::transpose(e.output->grad.data(), gt.data(), n, m);
            accum(e.inputs[0], gt);
        });
    return out;
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_numel(shape) != a.numel())
        throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
    const bool track = tracking({&a});
    std::vector<double> v(a.values().begin(), a.values().end());
    Tensor out = make_op_output(std::move(shape), std::move(v), track);
    if (track)
        record_op("reshape", {a}, out,
                  [](const Entry& e) { accum(e.inputs[0], e.output->grad); });
    return out;
}

Tensor concat(std::span<const Tensor> parts, int axis) {
    if (parts.empty()) throw ContractError("concat: no inputs");
    const int64_t rank = parts[0].ndim();
    if (rank == 1) {
        if (axis != 0) throw ContractError("concat: rank-1 tensors only support axis 0");
    } else if (rank == 2) {
        if (axis != 0 && axis != 1) throw ContractError("concat: axis must be 0 or 1");
    } else {
        throw ShapeError("concat: rank-1 or rank-2 only");
    }
    bool track = false;
    for (const auto& p : parts) {
        if (p.ndim() != rank) throw ShapeError("concat: mixed ranks");
        if (tracking({&p})) track = true;
    }

    Tensor out;
    if (rank == 1) {
        int64_t total = 0;
        for (const auto& p : parts) total += p.numel();
        std::vector<double> v;
        v.reserve(static_cast<size_t>(total));
        for (const auto& p : parts) v.insert(v.end(), p.values().begin(), p.values().end());
        out = make_op_output({total}, std::move(v), track);
    } else if (axis == 0) {
        const int64_t n = parts[0].cols();
        int64_t m = 0;
        for (const auto& p : parts) {
            if (p.cols() != n) throw ShapeError("concat axis 0: column counts differ");
            m += p.rows();
        }
        std::vector<double> v;
        v.reserve(static_cast<size_t>(m * n));
        for (const auto& p : parts) v.insert(v.end(), p.values().begin(), p.values().end());
        out = make_op_output({m, n}, std::move(v), track);
    } else {
        const int64_t m = parts[0].rows();
        int64_t n = 0;
        for (const auto& p : parts) {
            if (p.rows() != m) throw ShapeError("concat axis 1: row counts differ");
            n += p.cols();
        }
        std::vector<double> v(static_cast<size_t>(m * n));
        int64_t col0 = 0;
        for (const auto& p : parts) {
            const int64_t pc = p.cols();
            for (int64_t i = 0; i < m; ++i)
                for (int64_t j = 0; j < pc; ++j)
                    v[static_cast<size_t>(i * n + col0 + j)] = p(i, j);
            col0 += pc;
        }
        out = make_op_output({m, n}, std::move(v), track);
    }

    if (track) {
        std::vector<Tensor> ins(parts.begin(), parts.end());
        Entry e;
        e.op = "concat";
        for (const auto& t : ins) e.inputs.push_back(t.node());
        e.output = out.node();
        e.backprop = [rank, axis](const Entry& en) {
            const auto& g = en.output->grad;
            if (rank == 1 || axis == 0) {
                size_t off = 0;
                for (auto& in : en.inputs) {
                    if (in->requires_grad)
                        for (size_t i = 0; i < in->value.size(); ++i) in->grad[i] += g[off + i];
                    off += in->value.size();
                }
            } else {
                const int64_t m = en.inputs[0]->shape[0];
                int64_t n = 0;
                for (auto& in : en.inputs) n += in->shape[1];
                int64_t col0 = 0;
                for (auto& in : en.inputs) {
                    const int64_t pc = in->shape[1];
                    if (in->requires_grad)
                        for (int64_t i = 0; i < m; ++i)
                            for (int64_t j = 0; j < pc; ++j)
                                in->grad[static_cast<size_t>(i * pc + j)] +=
                                    g[static_cast<size_t>(i * n + col0 + j)];
                    col0 += pc;
                }
            }
        };
        Tape::active()->record(std::move(e));
    }
    return out;
}

Tensor slice(const Tensor& a, int axis, int64_t start, int64_t len) {
    if (a.ndim() == 1) {
        if (axis != 0) throw ContractError("slice: rank-1 tensors only support axis 0");
        if (start < 0 || len <= 0 || start + len > a.numel())
            throw ShapeError("slice: range out of bounds");
        const bool track = tracking({&a});
        std::vector<double> v(a.values().begin() + start, a.values().begin() + start + len);
        Tensor out = make_op_output({len}, std::move(v), track);
        if (track)
            record_op("slice", {a}, out, [start](const Entry& e) {
                if (!e.inputs[0]->requires_grad) return;
                for (size_t i = 0; i < e.output->grad.size(); ++i)
                    e.inputs[0]->grad[static_cast<size_t>(start) + i] += e.output->grad[i];
            });
        return out;
    }
    if (a.ndim() != 2 || (axis != 0 && axis != 1)) throw ContractError("slice: bad axis/rank");
    const int64_t m = a.rows(), n = a.cols();
    const int64_t dim = axis == 0 ? m : n;
    if (start < 0 || len <= 0 || start + len > dim) throw ShapeError("slice: range out of bounds");
    const bool track = tracking({&a});
    std::vector<double> v;
    if (axis == 0) {
        v.assign(a.values().begin() + start * n, a.values().begin() + (start + len) * n);
    } else {
        v.resize(static_cast<size_t>(m * len));
        for (int64_t i = 0; i < m; ++i)
            for (int64_t j = 0; j < len; ++j) v[static_cast<size_t>(i * len + j)] = a(i, start + j);
    }
    Tensor out = make_op_output(axis == 0 ? Shape{len, n} : Shape{m, len}, std::move(v), track);
    if (track)
        record_op("slice", {a}, out, [axis, start, m, n, len](const Entry& e) {
            if (!e.inputs[0]->requires_grad) return;
            const auto& g = e.output->grad;
            if (axis == 0) {
                for (size_t i = 0; i < g.size(); ++i)
                    e.inputs[0]->grad[static_cast<size_t>(start * n) + i] += g[i];
            } else {
                for (int64_t i = 0; i < m; ++i)
                    for (int64_t j = 0; j < len; ++j)
                        e.inputs[0]->grad[static_cast<size_t>(i * n + start + j)] +=
                            g[static_cast<size_t>(i * len + j)];
            }
        });
    return out;
}

// --- reductions -------------------------------------------------------

Tensor sum(const Tensor& a) {
    const bool track = tracking({&a});
    double s = 0.0;
    for (double x : a.values()) s += x;
    Tensor out = make_op_output({1}, {s}, track);
    if (track)
        record_op("sum", {a}, out, [](const Entry& e) {
            if (!e.inputs[0]->requires_grad) return;
            const double g = e.output->grad[0];
            for (auto& d : e.inputs[0]->grad) d += g;
        });
    return out;
}

Tensor mean(const Tensor& a) {
    const bool track = tracking({&a});
    double s = 0.0;
    for (double x : a.values()) s += x;
    const double inv = 1.0 / static_cast<double>(a.numel());
    Tensor out = make_op_output({1}, {s * inv}, track);
    if (track)
        record_op("mean", {a}, out, [inv](const Entry& e) {
            if (!e.inputs[0]->requires_grad) return;
            const double g = e.output->grad[0] * inv;
            for (auto& d : e.inputs[0]->grad) d += g;
        });
    return out;
}

// --- nonlinearities ---------------------------------------------------

namespace {

// Slice iteration for rank-2 axis ops: axis 1 walks rows, axis 0 walks
// columns. base + i*step addresses element i of the slice.
struct SliceIter {
    int64_t count, len, base_stride, step;
};

SliceIter slices_for(const Shape& shape, int axis) {
    if (shape.size() == 1) {
        if (axis != 0) throw ContractError("axis out of range for rank-1 tensor");
        return {1, shape[0], 0, 1};
    }
    if (shape.size() != 2) throw ShapeError("axis ops support rank-1/rank-2 only");
    if (axis == 1) return {shape[0], shape[1], shape[1], 1};
    if (axis == 0) return {shape[1], shape[0], 1, shape[1]};
    throw ContractError("axis must be 0 or 1");
}

}  // namespace

Tensor softmax(const Tensor& a, int axis) {
    ensure_finite(a, "softmax input");
    const SliceIter it = slices_for(a.shape(), axis);
    const bool track = tracking({&a});
    std::vector<double> v(a.values().begin(), a.values().end());
    for (int64_t s = 0; s < it.count; ++s) {
        double* p = v.data() + s * it.base_stride;
        double mx = p[0];
        for (int64_t i = 1; i < it.len; ++i) mx = std::max(mx, p[i * it.step]);
        double total = 0.0;
        for (int64_t i = 0; i < it.len; ++i) {
            double e = std::exp(p[i * it.step] - mx);
            p[i * it.step] = e;
            total += e;
        }
        for (int64_t i = 0; i < it.len; ++i) p[i * it.step] /= total;
    }
    Tensor out = make_op_output(a.shape(), std::move(v), track);
    if (track)
        record_op("softmax", {a}, out, [it](const Entry& e) {
            if (!e.inputs[0]->requires_grad) return;
            const auto& y = e.output->value;
            const auto& g = e.output->grad;
            for (int64_t s = 0; s < it.count; ++s) {
                const size_t off = static_cast<size_t>(s * it.base_stride);
                double dot = 0.0;
                for (int64_t i = 0; i < it.len; ++i) {
                    const size_t idx = off + static_cast<size_t>(i * it.step);
                    dot += g[idx] * y[idx];
                }
                for (int64_t i = 0; i < it.len; ++i) {
                    const size_t idx = off + static_cast<size_t>(i * it.step);
                    e.inputs[0]->grad[idx] += y[idx] * (g[idx] - dot);
                }
            }
        });
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    if (eps <= 0.0) throw ContractError("layer_norm: eps must be positive");
    const int64_t d = x.ndim() == 1 ? x.shape()[0] : x.shape()[x.shape().size() - 1];
    const int64_t rows = x.numel() / d;
    if (gain.ndim() != 1 || bias.ndim() != 1 || gain.shape()[0] != d || bias.shape()[0] != d)
        throw ShapeError("layer_norm: gain/bias must match last axis length " + std::to_string(d));
    const bool track = tracking({&x, &gain, &bias});

    std::vector<double> v(static_cast<size_t>(rows * d));
    auto xhat = std::make_shared<std::vector<double>>(static_cast<size_t>(rows * d));
    auto inv_std = std::make_shared<std::vector<double>>(static_cast<size_t>(rows));
    for (int64_t r = 0; r < rows; ++r) {
        const double* xr = x.values().data() + r * d;
        double m = 0.0;
        for (int64_t j = 0; j < d; ++j) m += xr[j];
        m /= static_cast<double>(d);
        double var = 0.0;
        for (int64_t j = 0; j < d; ++j) var += (xr[j] - m) * (xr[j] - m);
        var /= static_cast<double>(d);
        const double is = 1.0 / std::sqrt(var + eps);
        (*inv_std)[static_cast<size_t>(r)] = is;
        for (int64_t j = 0; j < d; ++j) {
            const double xh = (xr[j] - m) * is;
            (*xhat)[static_cast<size_t>(r * d + j)] = xh;
            v[static_cast<size_t>(r * d + j)] = xh * gain(j) + bias(j);
        }
    }
    Tensor out = make_op_output(x.shape(), std::move(v), track);
    if (track)
        record_op("layer_norm", {x, gain, bias}, out, [rows, d, xhat, inv_std](const Entry& e) {
            const auto& g = e.output->grad;
            const auto& gamma = e.inputs[1]->value;
            if (e.inputs[1]->requires_grad || e.inputs[2]->requires_grad) {
                for (int64_t r = 0; r < rows; ++r)
                    for (int64_t j = 0; j < d; ++j) {
                        const size_t idx = static_cast<size_t>(r * d + j);
                        if (e.inputs[1]->requires_grad)
                            e.inputs[1]->grad[static_cast<size_t>(j)] += g[idx] * (*xhat)[idx];
                        if (e.inputs[2]->requires_grad)
                            e.inputs[2]->grad[static_cast<size_t>(j)] += g[idx];
                    }
            }
            if (!e.inputs[0]->requires_grad) return;
            for (int64_t r = 0; r < rows; ++r) {
                double mean_gh = 0.0, mean_ghx = 0.0;
                for (int64_t j = 0; j < d; ++j) {
                    const size_t idx = static_cast<size_t>(r * d + j);
                    const double gh = g[idx] * gamma[static_cast<size_t>(j)];
                    mean_gh += gh;
                    mean_ghx += gh * (*xhat)[idx];
                }
                mean_gh /= static_cast<double>(d);
                mean_ghx /= static_cast<double>(d);
                const double is = (*inv_std)[static_cast<size_t>(r)];
                for (int64_t j = 0; j < d; ++j) {
                    const size_t idx = static_cast<size_t>(r * d + j);
                    const double gh = g[idx] * gamma[static_cast<size_t>(j)];
                    e.inputs[0]->grad[idx] += is * (gh - mean_gh - (*xhat)[idx] * mean_ghx);
                }
            }
        });
    return out;
}

Tensor gelu(const Tensor& a) {
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    const bool track = tracking({&a});
    std::vector<double> v(a.values().begin(), a.values().end());
    for (auto& x : v) x = 0.5 * x * (1.0 + std::erf(x * inv_sqrt2));
    Tensor out = make_op_output(a.shape(), std::move(v), track);
    if (track)
        record_op("gelu", {a}, out, [](const Entry& e) {
            if (!e.inputs[0]->requires_grad) return;
            constexpr double inv_sqrt2 = 0.70710678118654752440;
            constexpr double inv_sqrt_2pi = 0.3989422804014326779;
            const auto& x = e.inputs[0]->value;
            const auto& g = e.output->grad;
            for (size_t i = 0; i < x.size(); ++i) {
                const double cdf = 0.5 * (1.0 + std::erf(x[i] * inv_sqrt2));
                const double pdf = inv_sqrt_2pi * std::exp(-0.5 * x[i] * x[i]);
                e.inputs[0]->grad[i] += g[i] * (cdf + x[i] * pdf);
            }
        });
    return out;
}

Tensor dropout(const Tensor& a, double rate, CounterRng& rng, bool training) {
    if (rate < 0.0 || rate >= 1.0) throw ContractError("dropout: rate must be in [0, 1)");
    if (!training || rate == 0.0) return a;
    const double keep_scale = 1.0 / (1.0 - rate);
    auto mask = std::make_shared<std::vector<double>>(a.values().size());
    for (auto& m : *mask) m = rng.next_uniform() >= rate ? keep_scale : 0.0;
    const bool track = tracking({&a});
    std::vector<double> v(a.values().begin(), a.values().end());
    for (size_t i = 0; i < v.size(); ++i) v[i] *= (*mask)[i];
    Tensor out = make_op_output(a.shape(), std::move(v), track);
    if (track)
        record_op("dropout", {a}, out, [mask](const Entry& e) {
            if (!e.inputs[0]->requires_grad) return;
            for (size_t i = 0; i < mask->size(); ++i)
                e.inputs[0]->grad[i] += e.output->grad[i] * (*mask)[i];
        });
    return out;
}

void ensure_finite(const Tensor& a, const char* what) {
    for (double x : a.values())
        if (!std::isfinite(x)) throw NumericError(std::string(what) + ": non-finite value");
}

}  // namespace twsf
