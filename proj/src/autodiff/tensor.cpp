// SPDX-License-Identifier: Apache-2.0
#include "metalearn/tensor.hpp"

#include <functional>
#include <numeric>

#include "metalearn/errors.hpp"

namespace metalearn {

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) out += ",";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

Tensor::Tensor() : data_(std::make_shared<const std::vector<double>>(1, 0.0)) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)) {
    if (shape_size(shape_) != data.size()) {
        throw DimensionError("tensor: shape " + shape_string(shape_) + " holds " +
                             std::to_string(shape_size(shape_)) + " values, got " +
                             std::to_string(data.size()));
    }
    data_ = std::make_shared<const std::vector<double>>(std::move(data));
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::zeros(Shape shape) { return filled(std::move(shape), 0.0); }

Tensor Tensor::filled(Shape shape, double value) {
    const std::size_t n = shape_size(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
    return Tensor({rows, cols}, std::move(data));
}

double Tensor::at(std::size_t row, std::size_t col) const {
    if (rank() != 2 || row >= shape_[0] || col >= shape_[1]) {
        throw DimensionError("at(" + std::to_string(row) + "," + std::to_string(col) +
                             ") on shape " + shape_string(shape_));
    }
    return (*data_)[row * shape_[1] + col];
}

double Tensor::item() const {
    if (size() != 1) {
        throw DimensionError("item() on shape " + shape_string(shape_));
    }
    return (*data_)[0];
}

Tensor Tensor::detached() const {
    Tensor out = *this;
    out.tape_ = nullptr;
    out.node_ = 0;
    return out;
}

}  // namespace metalearn
