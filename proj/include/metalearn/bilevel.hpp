// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "metalearn/objective.hpp"
#include "metalearn/param_vector.hpp"

// Bilevel solvers for MAML-style meta-learning.
//
// The lower level adapts the meta-initialization x to one task with m steps of
// SGD or signSGD on the support loss. The upper level moves x along the
// averaged derivative of the query loss at the adapted weights. Four engines
// compute that derivative:
//
//   maml-product   query gradient pulled back through prod_n (I - beta H_n),
//                  one Hessian-vector product per inner step
//   maml-autodiff  reverse-mode through the whole SGD unroll on one tape
//   fo-maml        query gradient at the adapted weights (inner Hessians dropped)
//   sign-maml      same formula on a signSGD unroll, where it is exact because
//                  the sign step has zero derivative
namespace metalearn {

enum class InnerKind { Sgd, SignSgd };

const char* inner_kind_name(InnerKind kind);

struct InnerOptimizer {
    InnerKind kind = InnerKind::Sgd;
    double beta = 0.0;
    std::size_t steps = 0;

    /// beta must be finite and non-negative.
    void validate() const;
};

/// Iterates y^(0) = x, ..., y^(m) of one inner-loop run.
///
/// Second-order engines rebuild each step's tape from the stored iterate
/// rather than keeping m tapes alive.
struct AdaptTrace {
    InnerOptimizer optimizer;
    std::vector<ParamVector> iterates;

    const ParamVector& initial() const { return iterates.front(); }
    const ParamVector& adapted() const { return iterates.back(); }
};

AdaptTrace unroll_sgd(const ParamVector& x, const TaskObjective& task, double beta,
                      std::size_t steps);
AdaptTrace unroll_signsgd(const ParamVector& x, const TaskObjective& task, double beta,
                          std::size_t steps);
AdaptTrace unroll(const ParamVector& x, const TaskObjective& task, const InnerOptimizer& inner);

/// Gradient of the query loss at `weights`, with the loss value.
struct QueryGradient {
    ParamVector gradient;
    double loss = 0.0;
};
QueryGradient query_gradient(const TaskObjective& task, const ParamVector& weights);

ParamVector meta_grad_maml_product(const AdaptTrace& trace, const TaskObjective& task);
ParamVector meta_grad_maml_autodiff(const ParamVector& x, const TaskObjective& task,
                                    const InnerOptimizer& inner);
ParamVector meta_grad_fomaml(const AdaptTrace& trace, const TaskObjective& task);
ParamVector meta_grad_signmaml(const AdaptTrace& trace, const TaskObjective& task);

enum class MetaMethod { MamlProduct, MamlAutodiff, FoMaml, SignMaml };

const char* method_name(MetaMethod method);
MetaMethod parse_method(const std::string& name);
/// sign-maml adapts with signSGD, every other method with SGD.
InnerKind inner_kind_for(MetaMethod method);

struct MetaConfig {
    MetaMethod method = MetaMethod::SignMaml;
    double alpha = 0.001;
    InnerOptimizer inner{InnerKind::SignSgd, 0.005, 1};
    std::size_t meta_batch = 4;
    std::size_t test_steps = 10;
    /// Tasks of an episode processed concurrently; the reduction order is fixed.
    std::size_t workers = 1;

    /// Rates finite and non-negative, method and inner optimizer paired.
    void validate() const;
};

/// Outcome of adapting to one task and differentiating its query loss.
struct TaskMetaGradient {
    ParamVector gradient;
    ParamVector adapted;
    double query_loss = 0.0;
};

/// Runs `method` on one task: unroll with the paired optimizer, then the engine.
TaskMetaGradient task_meta_gradient(const ParamVector& x, const TaskObjective& task,
                                    MetaMethod method, const InnerOptimizer& inner);

struct StepRecord {
    double mean_query_loss = 0.0;
    std::optional<double> mean_query_accuracy;
    /// Adaptation + meta-gradients + update; excludes accuracy scoring.
    double seconds = 0.0;
};

struct MetaStepResult {
    ParamVector params;
    StepRecord record;
};

/// x - alpha * (1/P) sum_i meta-gradient_i, summed in episode order.
MetaStepResult meta_step(const ParamVector& x, std::span<const TaskObjective* const> episode,
                         const MetaConfig& cfg);

}  // namespace metalearn
