// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "metalearn/tensor.hpp"

namespace metalearn {

struct Segment {
    std::string name;
    Shape shape;
    std::size_t offset = 0;

    bool operator==(const Segment&) const = default;
};

/// Ordered named segments tiling a flat buffer.
class ParamLayout {
public:
    ParamLayout() = default;
    /// Offsets are assigned in order, so the segments tile the buffer exactly.
    explicit ParamLayout(const std::vector<std::pair<std::string, Shape>>& entries);

    const std::vector<Segment>& segments() const noexcept { return segments_; }
    std::size_t size() const noexcept { return segments_.size(); }
    std::size_t total() const noexcept { return total_; }

    bool operator==(const ParamLayout&) const = default;

private:
    std::vector<Segment> segments_;
    std::size_t total_ = 0;
};

/// Flat view of all model parameters: the meta-initialization and the adapted
/// weights of the inner loop are both ParamVectors.
class ParamVector {
public:
    ParamVector() = default;
    /// Zero-filled.
    explicit ParamVector(ParamLayout layout);
    ParamVector(ParamLayout layout, std::vector<double> values);

    const ParamLayout& layout() const noexcept { return layout_; }
    std::size_t size() const noexcept { return values_.size(); }
    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }
    std::span<const double> segment(std::size_t i) const;
    std::span<double> segment(std::size_t i);

    /// One constant tensor per segment.
    std::vector<Tensor> unflatten() const;
    /// Inverse of unflatten; tensor shapes must match the layout.
    static ParamVector flatten(const ParamLayout& layout, std::span<const Tensor> tensors);

    bool operator==(const ParamVector&) const = default;

private:
    ParamLayout layout_;
    std::vector<double> values_;
};

/// y + factor * x; layouts must match.
ParamVector axpy(const ParamVector& y, double factor, const ParamVector& x);
double norm2(std::span<const double> v);

}  // namespace metalearn
