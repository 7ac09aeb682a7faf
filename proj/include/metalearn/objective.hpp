// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>

#include "metalearn/mlp.hpp"
#include "metalearn/param_vector.hpp"
#include "metalearn/task.hpp"
#include "metalearn/tensor.hpp"

namespace metalearn {

/// The two losses of one task as functions of the model weights: the support
/// loss drives inner-loop adaptation, the query loss scores adapted weights.
/// Losses are built from the weight tensors with differentiable ops so they
/// land on whatever tape the weights are recorded on.
class TaskObjective {
public:
    virtual ~TaskObjective() = default;

    virtual const ParamLayout& layout() const = 0;
    virtual Tensor support_loss(std::span<const Tensor> weights) const = 0;
    virtual Tensor query_loss(std::span<const Tensor> weights) const = 0;
    /// Query accuracy for classification objectives.
    virtual std::optional<double> query_accuracy(const ParamVector&) const { return std::nullopt; }
};

/// An MLP on a sampled task. Holds references: spec and task must outlive it.
class MlpObjective final : public TaskObjective {
public:
    MlpObjective(const MlpSpec& spec, const Task& task);

    const ParamLayout& layout() const override { return layout_; }
    Tensor support_loss(std::span<const Tensor> weights) const override;
    Tensor query_loss(std::span<const Tensor> weights) const override;
    std::optional<double> query_accuracy(const ParamVector& weights) const override;

    const MlpSpec& spec() const noexcept { return spec_; }
    const Task& task() const noexcept { return task_; }

private:
    const MlpSpec& spec_;
    const Task& task_;
    ParamLayout layout_;
};

/// Identity model with support loss 1/2 (y - c)^T A (y - c) and query loss g^T y.
/// The support Hessian is the constant A, so the MAML meta-gradient has the
/// closed form (I - beta A)^m g. Weights are one segment "y" of shape [n, 1].
class QuadraticObjective final : public TaskObjective {
public:
    /// `a` is n x n row-major; `c` and `g` have length n.
    QuadraticObjective(std::vector<double> a, std::vector<double> c, std::vector<double> g);

    const ParamLayout& layout() const override { return layout_; }
    Tensor support_loss(std::span<const Tensor> weights) const override;
    Tensor query_loss(std::span<const Tensor> weights) const override;

    std::size_t dim() const noexcept { return c_.size(); }

private:
    Tensor a_;
    Tensor c_col_;
    Tensor g_row_;
    std::vector<double> c_;
    ParamLayout layout_;
};

}  // namespace metalearn
