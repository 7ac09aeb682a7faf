// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "metalearn/param_vector.hpp"
#include "metalearn/tensor.hpp"

namespace metalearn {

/// Fully connected network: widths run from input dim to output dim, relu
/// between hidden layers, identity at the output.
struct MlpSpec {
    std::vector<std::size_t> widths;

    void validate() const;
    std::size_t input_dim() const { return widths.front(); }
    std::size_t output_dim() const { return widths.back(); }
    std::size_t layers() const { return widths.size() - 1; }
    std::size_t parameter_count() const;
};

enum class LossKind { CrossEntropy, MeanSquaredError };

const char* loss_kind_name(LossKind kind);

using Labels = std::vector<std::int32_t>;

/// Inputs [rows, d] with either integer class labels or real targets [rows, out].
struct Batch {
    Tensor inputs;
    std::variant<Labels, Tensor> targets;

    std::size_t rows() const { return inputs.shape().at(0); }
    bool has_labels() const { return std::holds_alternative<Labels>(targets); }
    const Labels& labels() const { return std::get<Labels>(targets); }
    const Tensor& values() const { return std::get<Tensor>(targets); }
};

/// Segments w0, b0, w1, b1, ...; weights are [fan_in, fan_out], biases [1, fan_out].
ParamLayout mlp_layout(const MlpSpec& spec);

/// Glorot-uniform weights, zero biases, deterministic in `seed`.
ParamVector init_params(const MlpSpec& spec, std::uint64_t seed);

/// Output activations for every row of `inputs`. `params` follows mlp_layout.
Tensor mlp_forward(const MlpSpec& spec, std::span<const Tensor> params, const Tensor& inputs);

/// Batch-mean loss, recorded on the tape of `params` when they are recorded.
Tensor mlp_loss(const MlpSpec& spec, std::span<const Tensor> params, LossKind kind,
                const Batch& batch);

/// Fraction of rows whose argmax logit equals the label; ties go to the lowest index.
double accuracy_from_logits(const Tensor& logits, std::span<const std::int32_t> labels);
double accuracy(const MlpSpec& spec, const ParamVector& params, const Tensor& inputs,
                std::span<const std::int32_t> labels);

}  // namespace metalearn
