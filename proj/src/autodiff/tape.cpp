// SPDX-License-Identifier: Apache-2.0
#include "metalearn/tape.hpp"

#include <algorithm>
#include <optional>
#include <string>

#include "metalearn/errors.hpp"
#include "metalearn/ops.hpp"

namespace metalearn {

const char* op_name(OpKind op) {
    switch (op) {
        case OpKind::Leaf: return "leaf";
        case OpKind::Add: return "add";
        case OpKind::Sub: return "sub";
        case OpKind::Scale: return "scale";
        case OpKind::Mul: return "mul";
        case OpKind::MatMul: return "matmul";
        case OpKind::Transpose: return "transpose";
        case OpKind::Reshape: return "reshape";
        case OpKind::Expand: return "expand";
        case OpKind::Relu: return "relu";
        case OpKind::Sign: return "sign";
        case OpKind::Sum: return "sum";
        case OpKind::Mean: return "mean";
        case OpKind::Softmax: return "softmax";
        case OpKind::SoftmaxCrossEntropy: return "softmax_cross_entropy";
        case OpKind::SquaredError: return "squared_error";
    }
    return "unknown";
}

namespace {

using Grad = std::optional<Tensor>;

Tensor relu_mask(const Tensor& a) {
    std::vector<double> m(a.size());
    const auto x = a.data();
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = x[i] > 0.0 ? 1.0 : 0.0;
    return Tensor(a.shape(), std::move(m));
}

Tensor one_hot(std::span<const std::int32_t> labels, std::size_t classes) {
    std::vector<double> v(labels.size() * classes, 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) v[i * classes + labels[i]] = 1.0;
    return Tensor({labels.size(), classes}, std::move(v));
}

// Vector-Jacobian products. Every rule is written with differentiable ops, so
// when `in` holds recorded tensors the rule's own computation lands on the tape.
// An empty optional is an identically zero contribution.
std::vector<Grad> vjp(OpKind op, const std::vector<Tensor>& in, const OpAttrs& attrs,
                      const Tensor& g, const std::vector<char>& wanted) {
    std::vector<Grad> out(in.size());
    auto want = [&](std::size_t i) { return wanted[i] != 0; };
    switch (op) {
        case OpKind::Leaf:
            break;
        case OpKind::Add:
            if (want(0)) out[0] = g;
            if (want(1)) out[1] = g;
            break;
        case OpKind::Sub:
            if (want(0)) out[0] = g;
            if (want(1)) out[1] = scale(g, -1.0);
            break;
        case OpKind::Scale:
            out[0] = scale(g, attrs.scalar);
            break;
        case OpKind::Mul:
            if (want(0)) out[0] = mul(g, in[1]);
            if (want(1)) out[1] = mul(g, in[0]);
            break;
        case OpKind::MatMul:
            if (want(0)) out[0] = matmul(g, transpose(in[1]));
            if (want(1)) out[1] = matmul(transpose(in[0]), g);
            break;
        case OpKind::Transpose:
            out[0] = transpose(g);
            break;
        case OpKind::Reshape:
            out[0] = reshape(g, in[0].shape());
            break;
        case OpKind::Expand:
            out[0] = reshape(sum(g), in[0].shape());
            break;
        case OpKind::Relu:
            out[0] = mul(g, relu_mask(in[0]));
            break;
        case OpKind::Sign:
            // Piecewise constant: the local derivative is zero everywhere it exists.
            break;
        case OpKind::Sum:
            out[0] = expand(g, in[0].shape());
            break;
        case OpKind::Mean:
            out[0] = scale(expand(g, in[0].shape()), 1.0 / static_cast<double>(in[0].size()));
            break;
        case OpKind::Softmax: {
            const Tensor s = softmax(in[0]);
            const std::size_t cols = in[0].shape()[1];
            const Tensor ones = Tensor::filled({cols, cols}, 1.0);
            // s * (g - rowsum(g * s)) with the row sum broadcast through a ones matrix.
            out[0] = mul(s, sub(g, matmul(mul(g, s), ones)));
            break;
        }
        case OpKind::SoftmaxCrossEntropy: {
            const std::size_t rows = in[0].shape()[0];
            const std::size_t cols = in[0].shape()[1];
            const Tensor residual = sub(softmax(in[0]), one_hot(*attrs.labels, cols));
            out[0] = mul(expand(g, in[0].shape()),
                         scale(residual, 1.0 / static_cast<double>(rows)));
            break;
        }
        case OpKind::SquaredError: {
            const Tensor d = scale(sub(in[0], in[1]), 2.0 / static_cast<double>(in[0].size()));
            const Tensor gp = mul(expand(g, in[0].shape()), d);
            if (want(0)) out[0] = gp;
            if (want(1)) out[1] = scale(gp, -1.0);
            break;
        }
    }
    return out;
}

class RecordingLevel {
public:
    RecordingLevel(int& slot, int value) : slot_(slot), saved_(slot) { slot_ = value; }
    ~RecordingLevel() { slot_ = saved_; }
    RecordingLevel(const RecordingLevel&) = delete;
    RecordingLevel& operator=(const RecordingLevel&) = delete;

private:
    int& slot_;
    int saved_;
};

}  // namespace

Tape::Tape(int order) : order_(order) {
    if (order != 1 && order != 2) {
        throw CapabilityError("tape order must be 1 or 2, got " + std::to_string(order));
    }
}

Tensor Tape::leaf(const Tensor& value) {
    return append(OpKind::Leaf, {}, value.detached(), {});
}

std::vector<Tensor> Tape::leaves(std::span<const Tensor> values) {
    std::vector<Tensor> out;
    out.reserve(values.size());
    for (const auto& v : values) out.push_back(leaf(v));
    return out;
}

Tensor Tape::record(OpKind op, std::vector<Tensor> inputs, Tensor result, OpAttrs attrs) {
    Tape* tape = nullptr;
    for (const auto& t : inputs) {
        if (!t.recorded()) continue;
        if (tape != nullptr && t.tape() != tape) {
            throw ProvenanceError(std::string(op_name(op)) + ": inputs recorded on different tapes");
        }
        tape = t.tape();
    }
    if (tape == nullptr) return result;
    return tape->append(op, std::move(inputs), std::move(result), std::move(attrs));
}

Tensor Tape::append(OpKind op, std::vector<Tensor> inputs, Tensor result, OpAttrs attrs) {
    nodes_.push_back(Node{op, std::move(inputs), std::move(attrs), result.shape(), recording_level_});
    result.tape_ = this;
    result.node_ = nodes_.size() - 1;
    return result;
}

int Tape::level_of(const Tensor& t) const {
    check_owned(t, "tensor");
    return nodes_[t.node()].level;
}

void Tape::check_owned(const Tensor& t, const char* role) const {
    if (t.tape() != this || t.node() >= nodes_.size()) {
        throw ProvenanceError(std::string("backward: ") + role + " of shape " +
                              shape_string(t.shape()) + " is not recorded on this tape");
    }
}

std::vector<Tensor> Tape::backward(const Tensor& output, std::span<const Tensor> wrt,
                                   bool create_graph) {
    if (output.size() != 1) {
        throw ContractError("backward: output must be scalar, got shape " +
                            shape_string(output.shape()));
    }
    check_owned(output, "output");
    for (const auto& w : wrt) check_owned(w, "wrt tensor");

    std::vector<Tensor> result;
    result.reserve(wrt.size());
    if (wrt.empty()) return result;

    const std::size_t hi = output.node();
    std::size_t lo = hi;
    for (const auto& w : wrt) lo = std::min(lo, w.node());

    // relevant[i]: node lo + i depends on some wrt tensor.
    std::vector<char> relevant(hi >= lo ? hi - lo + 1 : 0, 0);
    for (const auto& w : wrt)
        if (w.node() <= hi) relevant[w.node() - lo] = 1;
    auto is_relevant = [&](const Tensor& t) {
        return t.tape() == this && t.node() >= lo && t.node() <= hi && relevant[t.node() - lo];
    };
    int deepest = 0;
    for (std::size_t id = lo; id <= hi; ++id) {
        if (!relevant[id - lo]) {
            for (const auto& t : nodes_[id].inputs) {
                if (is_relevant(t)) {
                    relevant[id - lo] = 1;
                    break;
                }
            }
        }
        if (relevant[id - lo]) deepest = std::max(deepest, nodes_[id].level);
    }

    const int needed = deepest + (create_graph ? 2 : 1);
    if (needed > order_) {
        throw CapabilityError("backward: needs a tape of order " + std::to_string(needed) +
                              ", this tape has order " + std::to_string(order_));
    }

    std::vector<Grad> grads(hi - lo + 1);
    if (relevant[hi - lo]) {
        grads[hi - lo] = Tensor::filled(output.shape(), 1.0);
        RecordingLevel guard(recording_level_, deepest + 1);

        for (std::size_t id = hi + 1; id-- > lo;) {
            Grad& g = grads[id - lo];
            if (!g || !relevant[id - lo]) continue;
            const Node& node = nodes_[id];
            if (node.op == OpKind::Leaf) continue;

            std::vector<char> wanted(node.inputs.size());
            for (std::size_t i = 0; i < node.inputs.size(); ++i) wanted[i] = is_relevant(node.inputs[i]);

            std::vector<Tensor> inputs = node.inputs;
            Tensor upstream = *g;
            if (!create_graph) {
                for (auto& t : inputs) t = t.detached();
                upstream = upstream.detached();
            }
            auto contributions = vjp(node.op, inputs, node.attrs, upstream, wanted);
            for (std::size_t i = 0; i < contributions.size(); ++i) {
                if (!wanted[i] || !contributions[i]) continue;
                Grad& target = grads[node.inputs[i].node() - lo];
                target = target ? add(*target, *contributions[i]) : *contributions[i];
            }
        }
    }

    for (const auto& w : wrt) {
        const Grad& g = grads[w.node() - lo];
        result.push_back(g ? (create_graph ? *g : g->detached()) : Tensor::zeros(w.shape()));
    }
    return result;
}

std::vector<Tensor> hvp(Tape& tape, const Tensor& scalar_loss, std::span<const Tensor> wrt,
                        std::span<const Tensor> v) {
    if (tape.order() < 2) {
        throw CapabilityError("hvp: needs a tape of order 2, this tape has order " +
                              std::to_string(tape.order()));
    }
    if (wrt.size() != v.size()) {
        throw ContractError("hvp: " + std::to_string(wrt.size()) + " wrt tensors but " +
                            std::to_string(v.size()) + " directions");
    }
    for (std::size_t i = 0; i < wrt.size(); ++i) {
        if (wrt[i].shape() != v[i].shape()) {
            throw DimensionError("hvp: direction shape " + shape_string(v[i].shape()) +
                                 " does not match " + shape_string(wrt[i].shape()));
        }
    }
    const auto grads = tape.backward(scalar_loss, wrt, /*create_graph=*/true);
    std::optional<Tensor> directional;
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!grads[i].recorded()) continue;  // gradient independent of wrt: zero Hessian block
        const Tensor term = dot(grads[i], v[i].detached());
        directional = directional ? add(*directional, term) : term;
    }
    if (!directional) {
        std::vector<Tensor> zeros;
        for (const auto& w : wrt) zeros.push_back(Tensor::zeros(w.shape()));
        return zeros;
    }
    return tape.backward(*directional, wrt, /*create_graph=*/false);
}

Tensor hvp(Tape& tape, const Tensor& scalar_loss, const Tensor& wrt, const Tensor& v) {
    return hvp(tape, scalar_loss, std::span<const Tensor>(&wrt, 1), std::span<const Tensor>(&v, 1))
        .front();
}

}  // namespace metalearn
