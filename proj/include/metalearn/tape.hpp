// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <span>
#include <vector>

#include "metalearn/tensor.hpp"

namespace metalearn {

enum class OpKind {
    Leaf,
    Add,
    Sub,
    Scale,
    Mul,
    MatMul,
    Transpose,
    Reshape,
    Expand,
    Relu,
    Sign,
    Sum,
    Mean,
    Softmax,
    SoftmaxCrossEntropy,
    SquaredError,
};

const char* op_name(OpKind op);

/// Op-specific attributes saved alongside a node.
struct OpAttrs {
    double scalar = 0.0;
    Shape shape;
    std::shared_ptr<const std::vector<std::int32_t>> labels;
};

/// Append-only record of the operations applied to recorded tensors.
///
/// A tape of order 2 can run backward with `create_graph`, recording the
/// gradient computation itself so that a second backward yields second
/// derivatives. Nodes appended while a create_graph backward runs get a level
/// one above the deepest node that backward traversed; all other nodes have
/// level 0. A backward that traverses nodes up to level L needs L + 1 <= order,
/// and L + 2 <= order when it creates a graph, so third derivatives are refused.
///
/// A Tape and its tensors belong to one thread. Tensors keep a raw pointer to
/// their tape, so the tape must outlive every tensor recorded on it.
class Tape {
public:
    explicit Tape(int order = 1);

    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    int order() const noexcept { return order_; }
    std::size_t size() const noexcept { return nodes_.size(); }

    /// Records a differentiable input.
    Tensor leaf(const Tensor& value);
    std::vector<Tensor> leaves(std::span<const Tensor> values);

    /// Derivatives of a scalar `output` with respect to each of `wrt`.
    ///
    /// Inputs that do not influence `output` get a zero tensor. With
    /// `create_graph` the results are recorded on this tape.
    std::vector<Tensor> backward(const Tensor& output, std::span<const Tensor> wrt,
                                 bool create_graph = false);

    /// Used by ops: appends a node for `result` computed from `inputs`.
    /// Returns `result` unchanged when no input is recorded.
    static Tensor record(OpKind op, std::vector<Tensor> inputs, Tensor result, OpAttrs attrs = {});

    int level_of(const Tensor& t) const;

private:
    struct Node {
        OpKind op;
        std::vector<Tensor> inputs;
        OpAttrs attrs;
        Shape shape;
        int level;
    };

    Tensor append(OpKind op, std::vector<Tensor> inputs, Tensor result, OpAttrs attrs);
    void check_owned(const Tensor& t, const char* role) const;

    int order_;
    int recording_level_ = 0;
    std::deque<Node> nodes_;  // stable references while backward appends
};

/// Hessian-vector products (d^2 loss / d wrt^2) v, one per wrt segment.
/// Needs a tape of order >= 2.
std::vector<Tensor> hvp(Tape& tape, const Tensor& scalar_loss, std::span<const Tensor> wrt,
                        std::span<const Tensor> v);
Tensor hvp(Tape& tape, const Tensor& scalar_loss, const Tensor& wrt, const Tensor& v);

}  // namespace metalearn
