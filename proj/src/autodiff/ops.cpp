// SPDX-License-Identifier: Apache-2.0
#include "metalearn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "metalearn/errors.hpp"

namespace metalearn {
namespace {

[[noreturn]] void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
    throw DimensionError(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " +
                         shape_string(b));
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) shape_mismatch(op, a.shape(), b.shape());
}

void require_rank2(const char* op, const Tensor& a) {
    if (a.rank() != 2) {
        throw DimensionError(std::string(op) + ": expected a matrix, got shape " +
                             shape_string(a.shape()));
    }
}

template <typename F>
Tensor elementwise(const Tensor& a, const Tensor& b, F f) {
    const auto x = a.data();
    const auto y = b.data();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[i], y[i]);
    return Tensor(a.shape(), std::move(out));
}

template <typename F>
Tensor unary(const Tensor& a, F f) {
    const auto x = a.data();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[i]);
    return Tensor(a.shape(), std::move(out));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape("add", a, b);
    return Tape::record(OpKind::Add, {a, b}, elementwise(a, b, std::plus<>()));
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape("sub", a, b);
    return Tape::record(OpKind::Sub, {a, b}, elementwise(a, b, std::minus<>()));
}

Tensor scale(const Tensor& a, double factor) {
    OpAttrs attrs;
    attrs.scalar = factor;
    return Tape::record(OpKind::Scale, {a}, unary(a, [factor](double v) { return factor * v; }),
                        std::move(attrs));
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape("mul", a, b);
    return Tape::record(OpKind::Mul, {a, b}, elementwise(a, b, std::multiplies<>()));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
        shape_mismatch("matmul", a.shape(), b.shape());
    }
    const std::size_t n = a.shape()[0];
    const std::size_t k = a.shape()[1];
    const std::size_t p = b.shape()[1];
    const auto x = a.data();
    const auto y = b.data();
    std::vector<double> out(n * p, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double* row = out.data() + i * p;
        for (std::size_t l = 0; l < k; ++l) {
            const double s = x[i * k + l];
            const double* brow = y.data() + l * p;
            for (std::size_t j = 0; j < p; ++j) row[j] += s * brow[j];
        }
    }
    return Tape::record(OpKind::MatMul, {a, b}, Tensor({n, p}, std::move(out)));
}

Tensor transpose(const Tensor& a) {
    require_rank2("transpose", a);
    const std::size_t r = a.shape()[0];
    const std::size_t c = a.shape()[1];
    const auto x = a.data();
    std::vector<double> out(r * c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x[i * c + j];
    return Tape::record(OpKind::Transpose, {a}, Tensor({c, r}, std::move(out)));
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_size(shape) != a.size()) shape_mismatch("reshape", a.shape(), shape);
    std::vector<double> values(a.data().begin(), a.data().end());
    OpAttrs attrs;
    attrs.shape = shape;
    return Tape::record(OpKind::Reshape, {a}, Tensor(std::move(shape), std::move(values)),
                        std::move(attrs));
}

Tensor expand(const Tensor& a, Shape shape) {
    if (a.size() != 1) shape_mismatch("expand", a.shape(), shape);
    OpAttrs attrs;
    attrs.shape = shape;
    return Tape::record(OpKind::Expand, {a}, Tensor::filled(std::move(shape), a.data()[0]),
                        std::move(attrs));
}

Tensor relu(const Tensor& a) {
    return Tape::record(OpKind::Relu, {a}, unary(a, [](double v) { return v > 0.0 ? v : 0.0; }));
}

Tensor sign(const Tensor& a) {
    // Branch-free: gradient signs are close to random, so a branch mispredicts often.
    return Tape::record(OpKind::Sign, {a}, unary(a, [](double v) {
                            return static_cast<double>(static_cast<int>(v > 0.0) - static_cast<int>(v < 0.0));
                        }));
}

Tensor sum(const Tensor& a) {
    double total = 0.0;
    for (double v : a.data()) total += v;
    return Tape::record(OpKind::Sum, {a}, Tensor::scalar(total));
}

Tensor mean(const Tensor& a) {
    double total = 0.0;
    for (double v : a.data()) total += v;
    return Tape::record(OpKind::Mean, {a},
                        Tensor::scalar(total / static_cast<double>(a.size())));
}

Tensor softmax(const Tensor& logits) {
    require_rank2("softmax", logits);
    const std::size_t rows = logits.shape()[0];
    const std::size_t cols = logits.shape()[1];
    const auto z = logits.data();
    std::vector<double> out(z.size());
    for (std::size_t i = 0; i < rows; ++i) {
        const double* zr = z.data() + i * cols;
        const double top = *std::max_element(zr, zr + cols);
        double norm = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            out[i * cols + j] = std::exp(zr[j] - top);
            norm += out[i * cols + j];
        }
        for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] /= norm;
    }
    return Tape::record(OpKind::Softmax, {logits}, Tensor(logits.shape(), std::move(out)));
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const std::int32_t> labels) {
    require_rank2("softmax_cross_entropy", logits);
    const std::size_t rows = logits.shape()[0];
    const std::size_t cols = logits.shape()[1];
    if (labels.size() != rows) {
        throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                             " labels for logits of shape " + shape_string(logits.shape()));
    }
    const auto z = logits.data();
    double total = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        const std::int32_t label = labels[i];
        if (label < 0 || static_cast<std::size_t>(label) >= cols) {
            throw DataError("softmax_cross_entropy: label " + std::to_string(label) +
                            " out of range for " + std::to_string(cols) + " classes");
        }
        const double* zr = z.data() + i * cols;
        const double top = *std::max_element(zr, zr + cols);
        double norm = 0.0;
        for (std::size_t j = 0; j < cols; ++j) norm += std::exp(zr[j] - top);
        total += top + std::log(norm) - zr[label];
    }
    OpAttrs attrs;
    attrs.labels = std::make_shared<const std::vector<std::int32_t>>(labels.begin(), labels.end());
    return Tape::record(OpKind::SoftmaxCrossEntropy, {logits},
                        Tensor::scalar(total / static_cast<double>(rows)), std::move(attrs));
}

Tensor squared_error(const Tensor& prediction, const Tensor& target) {
    require_same_shape("squared_error", prediction, target);
    const auto p = prediction.data();
    const auto t = target.data();
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = p[i] - t[i];
        total += d * d;
    }
    return Tape::record(OpKind::SquaredError, {prediction, target},
                        Tensor::scalar(total / static_cast<double>(p.size())));
}

Tensor dot(const Tensor& a, const Tensor& b) { return sum(mul(a, b)); }

Tensor forward_op(OpKind op, std::span<const Tensor> inputs, const OpAttrs& attrs) {
    auto arity = [&](std::size_t n) {
        if (inputs.size() != n) {
            throw ContractError(std::string(op_name(op)) + ": expects " + std::to_string(n) +
                                " inputs, got " + std::to_string(inputs.size()));
        }
    };
    switch (op) {
        case OpKind::Add: arity(2); return add(inputs[0], inputs[1]);
        case OpKind::Sub: arity(2); return sub(inputs[0], inputs[1]);
        case OpKind::Scale: arity(1); return scale(inputs[0], attrs.scalar);
        case OpKind::Mul: arity(2); return mul(inputs[0], inputs[1]);
        case OpKind::MatMul: arity(2); return matmul(inputs[0], inputs[1]);
        case OpKind::Transpose: arity(1); return transpose(inputs[0]);
        case OpKind::Reshape: arity(1); return reshape(inputs[0], attrs.shape);
        case OpKind::Expand: arity(1); return expand(inputs[0], attrs.shape);
        case OpKind::Relu: arity(1); return relu(inputs[0]);
        case OpKind::Sign: arity(1); return sign(inputs[0]);
        case OpKind::Sum: arity(1); return sum(inputs[0]);
        case OpKind::Mean: arity(1); return mean(inputs[0]);
        case OpKind::Softmax: arity(1); return softmax(inputs[0]);
        case OpKind::SoftmaxCrossEntropy:
            arity(1);
            if (!attrs.labels) throw ContractError("softmax_cross_entropy: labels missing");
            return softmax_cross_entropy(inputs[0], *attrs.labels);
        case OpKind::SquaredError: arity(2); return squared_error(inputs[0], inputs[1]);
        case OpKind::Leaf: break;
    }
    throw ContractError(std::string("forward_op: ") + op_name(op) + " is not a computation");
}

}  // namespace metalearn
