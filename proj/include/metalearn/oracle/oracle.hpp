// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "metalearn/bilevel.hpp"
#include "metalearn/errors.hpp"
#include "metalearn/mlp.hpp"
#include "metalearn/param_vector.hpp"
#include "metalearn/task.hpp"

// Ground truth for the meta-gradient engines.
//
// The finite-difference and closed-form oracles run on plain straight-line
// arithmetic over std::vector<double>; nothing here calls into the tensor or
// tape code, so agreement with the engines is independent evidence.
namespace metalearn::oracle {

/// A finite-difference evaluation landed close enough to a relu or sign kink
/// that differencing is unreliable; the caller should draw another instance.
class KinkProximityError : public Error {
public:
    using Error::Error;
};

enum class FdDirections { CoordinateWise, RandomDirections };

struct FdSpec {
    double epsilon = 1e-4;
    FdDirections directions = FdDirections::CoordinateWise;
    /// Random-direction mode: number of unit directions and their seed.
    std::size_t samples = 8;
    std::uint64_t seed = 0;
    /// Minimum distance of every relu pre-activation and every signSGD
    /// gradient coordinate from zero at the base point.
    double kink_margin = 1e-6;
};

/// Central difference (f(x + eps e_i) - f(x - eps e_i)) / 2 eps for every i.
std::vector<double> central_difference(const std::function<double(std::span<const double>)>& f,
                                       std::span<const double> x, double epsilon);

/// Central difference of f along a unit direction.
double directional_difference(const std::function<double(std::span<const double>)>& f,
                              std::span<const double> x, std::span<const double> direction,
                              double epsilon);

// Straight-line MLP with hand-written backprop. Parameters follow mlp_layout.
double reference_loss(const MlpSpec& spec, std::span<const double> params, LossKind kind,
                      const Batch& batch);
std::vector<double> reference_gradient(const MlpSpec& spec, std::span<const double> params,
                                       LossKind kind, const Batch& batch, double* loss = nullptr);

/// Query loss after m inner steps, computed with the reference MLP.
double reference_unrolled_loss(const MlpSpec& spec, std::span<const double> x, const Task& task,
                               const InnerOptimizer& inner);

struct DirectionalEstimate {
    std::vector<double> direction;
    double value = 0.0;
};

struct FdResult {
    /// Coordinate-wise mode.
    std::vector<double> gradient;
    /// Random-direction mode: estimates of <grad F, u>.
    std::vector<DirectionalEstimate> directional;
};

/// Central differences of F(x) = query loss of the unrolled inner loop.
/// Throws KinkProximityError when the base point is within `kink_margin` of a
/// kink or when a perturbed evaluation switches any relu or sign pattern.
FdResult fd_meta_grad(const MlpSpec& spec, const ParamVector& x, const Task& task,
                      const InnerOptimizer& inner, const FdSpec& fd = {});

/// (I - beta A)^m g by repeated multiplication; A is n x n row-major and symmetric.
std::vector<double> quadratic_bilevel_oracle(std::span<const double> a, std::span<const double> c,
                                             std::span<const double> g, double beta,
                                             std::size_t steps);

/// Largest relative coordinate gap between reverse-mode differentiation
/// through a signSGD unroll and the sign-maml first-order meta-gradient.
double collapse_check(const ParamVector& x, const TaskObjective& task, double beta,
                      std::size_t steps);

/// max_i |a_i - b_i| / max(|a_i|, |b_i|), with 0/0 read as 0.
double max_relative_deviation(std::span<const double> a, std::span<const double> b);
/// ||a - b|| / ||b||, or ||a - b|| when b = 0.
double relative_error(std::span<const double> a, std::span<const double> b);

/// A small random meta-learning problem: <= 200 parameters, both loss kinds.
struct Instance {
    MlpSpec spec;
    Task task;
    ParamVector x;
    double beta = 0.0;
    std::size_t steps = 0;
};

/// Even seeds draw Gaussian-blob classification, odd seeds sinusoid regression.
/// `sign_scale` picks a beta suited to signSGD rather than SGD.
Instance random_instance(std::uint64_t seed, std::size_t steps, bool sign_scale = false);

}  // namespace metalearn::oracle
