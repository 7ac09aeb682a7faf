// SPDX-License-Identifier: Apache-2.0
#include "metalearn/param_vector.hpp"

#include <cmath>

#include "metalearn/errors.hpp"

namespace metalearn {

ParamLayout::ParamLayout(const std::vector<std::pair<std::string, Shape>>& entries) {
    for (const auto& [name, shape] : entries) {
        segments_.push_back(Segment{name, shape, total_});
        total_ += shape_size(shape);
    }
}

ParamVector::ParamVector(ParamLayout layout)
    : layout_(std::move(layout)), values_(layout_.total(), 0.0) {}

ParamVector::ParamVector(ParamLayout layout, std::vector<double> values)
    : layout_(std::move(layout)), values_(std::move(values)) {
    if (values_.size() != layout_.total()) {
        throw DimensionError("ParamVector: layout holds " + std::to_string(layout_.total()) +
                             " values, got " + std::to_string(values_.size()));
    }
}

std::span<const double> ParamVector::segment(std::size_t i) const {
    const Segment& s = layout_.segments().at(i);
    return std::span<const double>(values_).subspan(s.offset, shape_size(s.shape));
}

std::span<double> ParamVector::segment(std::size_t i) {
    const Segment& s = layout_.segments().at(i);
    return std::span<double>(values_).subspan(s.offset, shape_size(s.shape));
}

std::vector<Tensor> ParamVector::unflatten() const {
    std::vector<Tensor> out;
    out.reserve(layout_.size());
    for (std::size_t i = 0; i < layout_.size(); ++i) {
        const auto seg = segment(i);
        out.emplace_back(layout_.segments()[i].shape, std::vector<double>(seg.begin(), seg.end()));
    }
    return out;
}

ParamVector ParamVector::flatten(const ParamLayout& layout, std::span<const Tensor> tensors) {
    if (tensors.size() != layout.size()) {
        throw DimensionError("flatten: layout has " + std::to_string(layout.size()) +
                             " segments, got " + std::to_string(tensors.size()) + " tensors");
    }
    std::vector<double> values;
    values.reserve(layout.total());
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        const Segment& s = layout.segments()[i];
        if (tensors[i].shape() != s.shape) {
            throw DimensionError("flatten: segment '" + s.name + "' expects " +
                                 shape_string(s.shape) + ", got " +
                                 shape_string(tensors[i].shape()));
        }
        values.insert(values.end(), tensors[i].data().begin(), tensors[i].data().end());
    }
    return ParamVector(layout, std::move(values));
}

ParamVector axpy(const ParamVector& y, double factor, const ParamVector& x) {
    if (!(y.layout() == x.layout())) throw DimensionError("axpy: layouts differ");
    std::vector<double> out(y.values().begin(), y.values().end());
    const auto xs = x.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += factor * xs[i];
    return ParamVector(y.layout(), std::move(out));
}

double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace metalearn
