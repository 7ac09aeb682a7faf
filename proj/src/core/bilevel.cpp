// SPDX-License-Identifier: Apache-2.0
#include "metalearn/bilevel.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <thread>

#include "metalearn/errors.hpp"
#include "metalearn/ops.hpp"
#include "metalearn/tape.hpp"

namespace metalearn {

const char* inner_kind_name(InnerKind kind) { return kind == InnerKind::Sgd ? "sgd" : "signsgd"; }

void InnerOptimizer::validate() const {
    if (!std::isfinite(beta) || beta < 0.0) {
        throw ConfigError("inner optimizer: beta must be finite and >= 0");
    }
}

const char* method_name(MetaMethod method) {
    switch (method) {
        case MetaMethod::MamlProduct: return "maml-product";
        case MetaMethod::MamlAutodiff: return "maml-autodiff";
        case MetaMethod::FoMaml: return "fo-maml";
        case MetaMethod::SignMaml: return "sign-maml";
    }
    return "unknown";
}

MetaMethod parse_method(const std::string& name) {
    if (name == "maml-product") return MetaMethod::MamlProduct;
    if (name == "maml-autodiff" || name == "maml") return MetaMethod::MamlAutodiff;
    if (name == "fo-maml") return MetaMethod::FoMaml;
    if (name == "sign-maml") return MetaMethod::SignMaml;
    throw ConfigError("unknown meta method '" + name + "'");
}

InnerKind inner_kind_for(MetaMethod method) {
    return method == MetaMethod::SignMaml ? InnerKind::SignSgd : InnerKind::Sgd;
}

void MetaConfig::validate() const {
    inner.validate();
    if (!std::isfinite(alpha) || alpha < 0.0) throw ConfigError("meta config: alpha must be finite and >= 0");
    if (meta_batch < 1) throw ConfigError("meta config: meta batch must be >= 1");
    if (inner.kind != inner_kind_for(method)) {
        throw ConfigError(std::string("meta config: ") + method_name(method) + " needs a " +
                          inner_kind_name(inner_kind_for(method)) + " inner optimizer");
    }
}

namespace {

bool all_finite(std::span<const double> values) {
    for (double v : values)
        if (!std::isfinite(v)) return false;
    return true;
}

void check_loss(const Tensor& loss, std::size_t step, const char* what) {
    if (!std::isfinite(loss.item())) throw DivergenceError(step, std::string("non-finite ") + what);
}

void check_grads(std::span<const Tensor> grads, std::size_t step) {
    for (const auto& g : grads)
        if (!all_finite(g.data())) throw DivergenceError(step, "non-finite support gradient");
}

// y - beta * g (or y - beta * sign(g)) in one pass over constants. Gives the
// same bits as the composed ops below, which the collapse check relies on.
Tensor fused_update(const Tensor& y, const Tensor& g, InnerKind kind, double beta) {
    const auto yv = y.data();
    const auto gv = g.data();
    std::vector<double> out(yv.size());
    if (kind == InnerKind::Sgd) {
        for (std::size_t j = 0; j < out.size(); ++j) out[j] = yv[j] - beta * gv[j];
    } else {
        for (std::size_t j = 0; j < out.size(); ++j) {
            const double step = gv[j] > 0.0 ? beta : 0.0;
            const double back = gv[j] < 0.0 ? beta : 0.0;
            out[j] = yv[j] - (step - back);
        }
    }
    return Tensor(y.shape(), std::move(out));
}

// One lower-level update on tensors. Shared by the constant unroll and the
// recorded unroll so both produce the same floating-point values.
std::vector<Tensor> inner_update(std::span<const Tensor> y, std::span<const Tensor> grads,
                                 InnerKind kind, double beta) {
    std::vector<Tensor> next;
    next.reserve(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (!y[i].recorded() && !grads[i].recorded()) {
            next.push_back(fused_update(y[i], grads[i], kind, beta));
            continue;
        }
        const Tensor direction = kind == InnerKind::Sgd ? grads[i] : sign(grads[i]);
        next.push_back(sub(y[i], scale(direction, beta)));
    }
    return next;
}

AdaptTrace run_unroll(const ParamVector& x, const TaskObjective& task, const InnerOptimizer& inner) {
    inner.validate();
    if (!(x.layout() == task.layout())) throw DimensionError("unroll: parameter layout mismatch");
    AdaptTrace trace{inner, {x}};
    trace.iterates.reserve(inner.steps + 1);
    for (std::size_t step = 0; step < inner.steps; ++step) {
        Tape tape(1);
        const auto y = tape.leaves(trace.iterates.back().unflatten());
        const Tensor loss = task.support_loss(y);
        check_loss(loss, step, "support loss");
        const auto grads = tape.backward(loss, y);
        check_grads(grads, step);
        const auto constants = trace.iterates.back().unflatten();
        trace.iterates.push_back(
            ParamVector::flatten(x.layout(), inner_update(constants, grads, inner.kind, inner.beta)));
    }
    return trace;
}

void require_trace(const AdaptTrace& trace, InnerKind kind, const char* engine) {
    if (trace.optimizer.kind != kind) {
        throw MethodMismatchError(std::string(engine) + ": trace was produced by " +
                                  inner_kind_name(trace.optimizer.kind) + ", expected " +
                                  inner_kind_name(kind));
    }
    if (trace.iterates.size() != trace.optimizer.steps + 1) {
        throw ContractError(std::string(engine) + ": trace length does not match its step count");
    }
}

// Query gradient plus the engine-specific correction; returns the adapted weights too.
TaskMetaGradient autodiff_through_unroll(const ParamVector& x, const TaskObjective& task,
                                         const InnerOptimizer& inner) {
    inner.validate();
    Tape tape(2);
    const auto xs = tape.leaves(x.unflatten());
    std::vector<Tensor> y = xs;
    for (std::size_t step = 0; step < inner.steps; ++step) {
        const Tensor loss = task.support_loss(y);
        check_loss(loss, step, "support loss");
        const auto grads = tape.backward(loss, y, /*create_graph=*/true);
        check_grads(grads, step);
        y = inner_update(y, grads, inner.kind, inner.beta);
    }
    const Tensor query = task.query_loss(y);
    check_loss(query, inner.steps, "query loss");
    const auto grads = tape.backward(query, xs);
    std::vector<Tensor> adapted;
    for (const auto& t : y) adapted.push_back(t.detached());
    return {ParamVector::flatten(x.layout(), grads), ParamVector::flatten(x.layout(), adapted),
            query.item()};
}

ParamVector pull_back_through_hessians(const AdaptTrace& trace, const TaskObjective& task,
                                       ParamVector v) {
    const double beta = trace.optimizer.beta;
    for (std::size_t n = trace.optimizer.steps; n-- > 0;) {
        Tape tape(2);
        const auto y = tape.leaves(trace.iterates[n].unflatten());
        const Tensor loss = task.support_loss(y);
        const auto vs = v.unflatten();
        const auto hv = hvp(tape, loss, y, vs);
        std::vector<Tensor> next;
        for (std::size_t i = 0; i < vs.size(); ++i) next.push_back(sub(vs[i], scale(hv[i], beta)));
        v = ParamVector::flatten(v.layout(), next);
        if (!all_finite(v.values())) throw DivergenceError(n, "non-finite Hessian-vector product");
    }
    return v;
}

}  // namespace

AdaptTrace unroll_sgd(const ParamVector& x, const TaskObjective& task, double beta,
                      std::size_t steps) {
    return run_unroll(x, task, {InnerKind::Sgd, beta, steps});
}

AdaptTrace unroll_signsgd(const ParamVector& x, const TaskObjective& task, double beta,
                          std::size_t steps) {
    return run_unroll(x, task, {InnerKind::SignSgd, beta, steps});
}

AdaptTrace unroll(const ParamVector& x, const TaskObjective& task, const InnerOptimizer& inner) {
    return run_unroll(x, task, inner);
}

QueryGradient query_gradient(const TaskObjective& task, const ParamVector& weights) {
    Tape tape(1);
    const auto y = tape.leaves(weights.unflatten());
    const Tensor loss = task.query_loss(y);
    const auto grads = tape.backward(loss, y);
    QueryGradient out{ParamVector::flatten(weights.layout(), grads), loss.item()};
    if (!std::isfinite(out.loss) || !all_finite(out.gradient.values())) {
        throw DivergenceError(0, "non-finite query loss or gradient");
    }
    return out;
}

ParamVector meta_grad_maml_product(const AdaptTrace& trace, const TaskObjective& task) {
    require_trace(trace, InnerKind::Sgd, "maml-product");
    return pull_back_through_hessians(trace, task, query_gradient(task, trace.adapted()).gradient);
}

ParamVector meta_grad_maml_autodiff(const ParamVector& x, const TaskObjective& task,
                                    const InnerOptimizer& inner) {
    return autodiff_through_unroll(x, task, inner).gradient;
}

ParamVector meta_grad_fomaml(const AdaptTrace& trace, const TaskObjective& task) {
    return query_gradient(task, trace.adapted()).gradient;
}

ParamVector meta_grad_signmaml(const AdaptTrace& trace, const TaskObjective& task) {
    require_trace(trace, InnerKind::SignSgd, "sign-maml");
    return query_gradient(task, trace.adapted()).gradient;
}

TaskMetaGradient task_meta_gradient(const ParamVector& x, const TaskObjective& task,
                                    MetaMethod method, const InnerOptimizer& inner) {
    if (inner.kind != inner_kind_for(method)) {
        throw MethodMismatchError(std::string(method_name(method)) + " cannot run on a " +
                                  inner_kind_name(inner.kind) + " inner loop");
    }
    if (method == MetaMethod::MamlAutodiff) return autodiff_through_unroll(x, task, inner);

    AdaptTrace trace = run_unroll(x, task, inner);
    QueryGradient q = query_gradient(task, trace.adapted());
    if (!std::isfinite(q.loss)) throw DivergenceError(inner.steps, "non-finite query loss");
    ParamVector g = method == MetaMethod::MamlProduct
                        ? pull_back_through_hessians(trace, task, std::move(q.gradient))
                        : std::move(q.gradient);
    return {std::move(g), std::move(trace.iterates.back()), q.loss};
}

MetaStepResult meta_step(const ParamVector& x, std::span<const TaskObjective* const> episode,
                         const MetaConfig& cfg) {
    cfg.validate();
    if (episode.size() != cfg.meta_batch) {
        throw ContractError("meta_step: episode has " + std::to_string(episode.size()) +
                            " tasks, meta batch is " + std::to_string(cfg.meta_batch));
    }
    const std::size_t tasks = episode.size();
    std::vector<std::optional<TaskMetaGradient>> outcomes(tasks);
    std::vector<std::exception_ptr> failures(tasks);
    auto run = [&](std::size_t i) {
        try {
            outcomes[i] = task_meta_gradient(x, *episode[i], cfg.method, cfg.inner);
        } catch (...) {
            failures[i] = std::current_exception();
        }
    };

    const auto start = std::chrono::steady_clock::now();
    const std::size_t workers = std::min(std::max<std::size_t>(cfg.workers, 1), tasks);
    if (workers == 1) {
        for (std::size_t i = 0; i < tasks; ++i) run(i);
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < tasks; i += workers) run(i);
            });
        }
        pool.clear();
    }
    for (std::size_t i = 0; i < tasks; ++i) {
        if (!failures[i]) continue;
        try {
            std::rethrow_exception(failures[i]);
        } catch (const DivergenceError& e) {
            throw TaskDivergenceError(i, e);
        }
    }

    std::vector<double> total(x.size(), 0.0);
    double loss = 0.0;
    for (std::size_t i = 0; i < tasks; ++i) {
        const auto g = outcomes[i]->gradient.values();
        for (std::size_t j = 0; j < total.size(); ++j) total[j] += g[j];
        loss += outcomes[i]->query_loss;
    }
    std::vector<double> next(x.values().begin(), x.values().end());
    const double count = static_cast<double>(tasks);
    for (std::size_t j = 0; j < next.size(); ++j) next[j] -= cfg.alpha * (total[j] / count);
    const auto stop = std::chrono::steady_clock::now();

    MetaStepResult result{ParamVector(x.layout(), std::move(next)), {}};
    result.record.mean_query_loss = loss / count;
    result.record.seconds = std::chrono::duration<double>(stop - start).count();
    double acc = 0.0;
    bool scored = true;
    for (std::size_t i = 0; i < tasks && scored; ++i) {
        const auto a = episode[i]->query_accuracy(outcomes[i]->adapted);
        scored = a.has_value();
        if (scored) acc += *a;
    }
    if (scored) result.record.mean_query_accuracy = acc / count;
    return result;
}

}  // namespace metalearn
