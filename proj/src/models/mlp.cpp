// SPDX-License-Identifier: Apache-2.0
#include "metalearn/mlp.hpp"

#include <cmath>
#include <string>

#include "metalearn/errors.hpp"
#include "metalearn/ops.hpp"
#include "metalearn/rng.hpp"

namespace metalearn {

void MlpSpec::validate() const {
    if (widths.size() < 2) {
        throw ContractError("MlpSpec: needs at least input and output widths");
    }
    for (std::size_t w : widths) {
        if (w == 0) throw ContractError("MlpSpec: widths must be positive");
    }
}

std::size_t MlpSpec::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) n += (widths[l] + 1) * widths[l + 1];
    return n;
}

const char* loss_kind_name(LossKind kind) {
    return kind == LossKind::CrossEntropy ? "cross-entropy" : "mse";
}

ParamLayout mlp_layout(const MlpSpec& spec) {
    spec.validate();
    std::vector<std::pair<std::string, Shape>> entries;
    for (std::size_t l = 0; l < spec.layers(); ++l) {
        entries.emplace_back("w" + std::to_string(l), Shape{spec.widths[l], spec.widths[l + 1]});
        entries.emplace_back("b" + std::to_string(l), Shape{1, spec.widths[l + 1]});
    }
    return ParamLayout(entries);
}

ParamVector init_params(const MlpSpec& spec, std::uint64_t seed) {
    ParamVector params(mlp_layout(spec));
    Rng rng(Rng::key({seed}));
    for (std::size_t l = 0; l < spec.layers(); ++l) {
        const double fan = static_cast<double>(spec.widths[l] + spec.widths[l + 1]);
        const double bound = std::sqrt(6.0 / fan);
        for (double& w : params.segment(2 * l)) w = rng.uniform(-bound, bound);
    }
    return params;
}

Tensor mlp_forward(const MlpSpec& spec, std::span<const Tensor> params, const Tensor& inputs) {
    if (params.size() != 2 * spec.layers()) {
        throw DimensionError("mlp_forward: expected " + std::to_string(2 * spec.layers()) +
                             " parameter tensors, got " + std::to_string(params.size()));
    }
    if (inputs.rank() != 2 || inputs.shape()[1] != spec.input_dim()) {
        throw DimensionError("mlp_forward: inputs of shape " + shape_string(inputs.shape()) +
                             " for input width " + std::to_string(spec.input_dim()));
    }
    const Tensor ones = Tensor::filled({inputs.shape()[0], 1}, 1.0);
    Tensor h = inputs;
    for (std::size_t l = 0; l < spec.layers(); ++l) {
        // The bias row is broadcast over the batch as ones[rows,1] x b[1,out].
        h = add(matmul(h, params[2 * l]), matmul(ones, params[2 * l + 1]));
        if (l + 1 < spec.layers()) h = relu(h);
    }
    return h;
}

Tensor mlp_loss(const MlpSpec& spec, std::span<const Tensor> params, LossKind kind,
                const Batch& batch) {
    const Tensor out = mlp_forward(spec, params, batch.inputs);
    if (kind == LossKind::CrossEntropy) {
        if (!batch.has_labels()) throw DataError("cross-entropy loss needs integer labels");
        if (batch.labels().size() != batch.rows()) {
            throw DataError("cross-entropy loss: " + std::to_string(batch.labels().size()) +
                            " labels for " + std::to_string(batch.rows()) + " inputs");
        }
        return softmax_cross_entropy(out, batch.labels());
    }
    if (batch.has_labels()) throw DataError("mse loss needs real-valued targets");
    if (batch.values().shape() != out.shape()) {
        throw DataError("mse loss: targets of shape " + shape_string(batch.values().shape()) +
                        " for predictions of shape " + shape_string(out.shape()));
    }
    return squared_error(out, batch.values());
}

double accuracy_from_logits(const Tensor& logits, std::span<const std::int32_t> labels) {
    if (logits.rank() != 2 || logits.shape()[0] != labels.size()) {
        throw DimensionError("accuracy: logits " + shape_string(logits.shape()) + " for " +
                             std::to_string(labels.size()) + " labels");
    }
    if (labels.empty()) return 0.0;
    const std::size_t cols = logits.shape()[1];
    const auto z = logits.data();
    std::size_t hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < cols; ++j) {
            if (z[i * cols + j] > z[i * cols + best]) best = j;
        }
        if (static_cast<std::int64_t>(best) == labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double accuracy(const MlpSpec& spec, const ParamVector& params, const Tensor& inputs,
                std::span<const std::int32_t> labels) {
    const auto tensors = params.unflatten();
    return accuracy_from_logits(mlp_forward(spec, tensors, inputs), labels);
}

}  // namespace metalearn
