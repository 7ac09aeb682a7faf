// SPDX-License-Identifier: Apache-2.0
#include "metalearn/objective.hpp"

#include <cmath>

#include "metalearn/errors.hpp"
#include "metalearn/ops.hpp"

namespace metalearn {

MlpObjective::MlpObjective(const MlpSpec& spec, const Task& task)
    : spec_(spec), task_(task), layout_(mlp_layout(spec)) {
    if (task.support.inputs.shape().at(1) != spec.input_dim()) {
        throw DimensionError("MlpObjective: task inputs have width " +
                             std::to_string(task.support.inputs.shape()[1]) +
                             ", model expects " + std::to_string(spec.input_dim()));
    }
}

Tensor MlpObjective::support_loss(std::span<const Tensor> weights) const {
    return mlp_loss(spec_, weights, task_.loss, task_.support);
}

Tensor MlpObjective::query_loss(std::span<const Tensor> weights) const {
    return mlp_loss(spec_, weights, task_.loss, task_.query_set);
}

std::optional<double> MlpObjective::query_accuracy(const ParamVector& weights) const {
    if (task_.loss != LossKind::CrossEntropy) return std::nullopt;
    return accuracy(spec_, weights, task_.query_set.inputs, task_.query_set.labels());
}

QuadraticObjective::QuadraticObjective(std::vector<double> a, std::vector<double> c,
                                       std::vector<double> g)
    : c_(c) {
    const std::size_t n = c.size();
    if (a.size() != n * n || g.size() != n || n == 0) {
        throw DimensionError("QuadraticObjective: A must be n x n and c, g of length n");
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            if (a[i * n + j] != a[j * n + i]) throw ContractError("QuadraticObjective: A must be symmetric");
        }
    }
    a_ = Tensor({n, n}, std::move(a));
    c_col_ = Tensor({n, 1}, std::move(c));
    g_row_ = Tensor({1, n}, std::move(g));
    layout_ = ParamLayout({{"y", Shape{n, 1}}});
}

Tensor QuadraticObjective::support_loss(std::span<const Tensor> weights) const {
    const Tensor d = sub(weights[0], c_col_);
    return scale(reshape(matmul(transpose(d), matmul(a_, d)), {}), 0.5);
}

Tensor QuadraticObjective::query_loss(std::span<const Tensor> weights) const {
    return reshape(matmul(g_row_, weights[0]), {});
}

}  // namespace metalearn
