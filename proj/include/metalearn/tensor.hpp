// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace metalearn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

class Tape;

/// Dense row-major tensor of doubles.
///
/// A tensor optionally references the node of a Tape that produced it. Tensors
/// without a node are constants and take no part in differentiation. The value
/// buffer is immutable and shared, so copies are cheap.
class Tensor {
public:
    /// Rank-0 zero.
    Tensor();
    Tensor(Shape shape, std::vector<double> data);

    static Tensor scalar(double value);
    static Tensor zeros(Shape shape);
    static Tensor filled(Shape shape, double value);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_->size(); }
    std::span<const double> data() const noexcept { return *data_; }

    /// Element access for rank-2 tensors.
    double at(std::size_t row, std::size_t col) const;
    /// Value of a tensor holding exactly one element.
    double item() const;

    bool recorded() const noexcept { return tape_ != nullptr; }
    Tape* tape() const noexcept { return tape_; }
    std::size_t node() const noexcept { return node_; }

    /// Same values, no provenance.
    Tensor detached() const;

private:
    friend class Tape;

    Shape shape_;
    std::shared_ptr<const std::vector<double>> data_;
    Tape* tape_ = nullptr;
    std::size_t node_ = 0;
};

}  // namespace metalearn
