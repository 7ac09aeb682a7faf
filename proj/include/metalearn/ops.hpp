// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "metalearn/tape.hpp"
#include "metalearn/tensor.hpp"

// Differentiable tensor ops. Each result is recorded on the inputs' tape when
// any input is recorded. Elementwise ops require identical shapes; there is
// no implicit broadcasting.
namespace metalearn {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor mul(const Tensor& a, const Tensor& b);

/// [n,k] x [k,p] -> [n,p]
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);
/// Broadcasts a one-element tensor to `shape`.
Tensor expand(const Tensor& a, Shape shape);

/// max(x, 0); derivative at 0 is 0.
Tensor relu(const Tensor& a);
/// Elementwise sign with sign(0) = 0. Its derivative is identically zero.
Tensor sign(const Tensor& a);

/// Rank-0 reductions over all elements.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

/// Row-wise softmax of a rank-2 tensor.
Tensor softmax(const Tensor& logits);
/// Mean over rows of -log softmax(logits)[row, label]; log-sum-exp stabilized.
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const std::int32_t> labels);
/// Mean over all elements of (prediction - target)^2.
Tensor squared_error(const Tensor& prediction, const Tensor& target);

/// Sum of elementwise products, as a rank-0 tensor.
Tensor dot(const Tensor& a, const Tensor& b);

/// Generic dispatcher over the op kinds above.
Tensor forward_op(OpKind op, std::span<const Tensor> inputs, const OpAttrs& attrs = {});

}  // namespace metalearn
