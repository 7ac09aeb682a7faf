// SPDX-License-Identifier: Apache-2.0
#include "metalearn/oracle/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "metalearn/objective.hpp"
#include "metalearn/rng.hpp"

namespace metalearn::oracle {

std::vector<double> central_difference(const std::function<double(std::span<const double>)>& f,
                                       std::span<const double> x, double epsilon) {
    if (!(epsilon > 0.0)) throw ContractError("central_difference: epsilon must be > 0");
    std::vector<double> point(x.begin(), x.end());
    std::vector<double> grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        point[i] = x[i] + epsilon;
        const double up = f(point);
        point[i] = x[i] - epsilon;
        const double down = f(point);
        point[i] = x[i];
        grad[i] = (up - down) / (2.0 * epsilon);
    }
    return grad;
}

double directional_difference(const std::function<double(std::span<const double>)>& f,
                              std::span<const double> x, std::span<const double> direction,
                              double epsilon) {
    if (!(epsilon > 0.0)) throw ContractError("directional_difference: epsilon must be > 0");
    std::vector<double> up(x.begin(), x.end());
    std::vector<double> down(x.begin(), x.end());
    for (std::size_t i = 0; i < x.size(); ++i) {
        up[i] += epsilon * direction[i];
        down[i] -= epsilon * direction[i];
    }
    return (f(up) - f(down)) / (2.0 * epsilon);
}

namespace {

// Records which side of every kink an evaluation sits on, and how close it came.
struct KinkProbe {
    std::vector<char> pattern;
    double margin = std::numeric_limits<double>::infinity();

    void note(double v) {
        pattern.push_back(v > 0.0 ? 1 : (v < 0.0 ? -1 : 0));
        margin = std::min(margin, std::abs(v));
    }
};

struct LayerOffsets {
    std::size_t w;
    std::size_t b;
};

std::vector<LayerOffsets> offsets(const MlpSpec& spec) {
    std::vector<LayerOffsets> out;
    std::size_t at = 0;
    for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
        const std::size_t w = at;
        at += spec.widths[l] * spec.widths[l + 1];
        out.push_back({w, at});
        at += spec.widths[l + 1];
    }
    return out;
}

struct ForwardPass {
    std::vector<std::vector<double>> inputs;  // input of each layer, rows x width
    std::vector<std::vector<double>> pre;     // pre-activation of each layer
};

ForwardPass run_forward(const MlpSpec& spec, std::span<const double> params, const Batch& batch,
                        KinkProbe* probe) {
    const auto offs = offsets(spec);
    const std::size_t rows = batch.rows();
    ForwardPass pass;
    std::vector<double> h(batch.inputs.data().begin(), batch.inputs.data().end());
    for (std::size_t l = 0; l < offs.size(); ++l) {
        const std::size_t in = spec.widths[l];
        const std::size_t out = spec.widths[l + 1];
        std::vector<double> z(rows * out);
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < out; ++j) {
                double acc = 0.0;
                for (std::size_t k = 0; k < in; ++k) acc += h[r * in + k] * params[offs[l].w + k * out + j];
                z[r * out + j] = acc + params[offs[l].b + j];
            }
        }
        pass.inputs.push_back(h);
        const bool hidden = l + 1 < offs.size();
        if (hidden) {
            h.assign(z.size(), 0.0);
            for (std::size_t i = 0; i < z.size(); ++i) {
                if (probe) probe->note(z[i]);
                h[i] = z[i] > 0.0 ? z[i] : 0.0;
            }
        }
        pass.pre.push_back(std::move(z));
    }
    return pass;
}

// Loss value and d loss / d output for the final pre-activation.
double output_loss(const std::vector<double>& out, std::size_t cols, LossKind kind,
                   const Batch& batch, std::vector<double>* d_out) {
    const std::size_t rows = batch.rows();
    double total = 0.0;
    if (d_out) d_out->assign(out.size(), 0.0);
    if (kind == LossKind::CrossEntropy) {
        const auto& labels = batch.labels();
        for (std::size_t r = 0; r < rows; ++r) {
            const double* z = &out[r * cols];
            double top = z[0];
            for (std::size_t j = 1; j < cols; ++j) top = std::max(top, z[j]);
            double norm = 0.0;
            for (std::size_t j = 0; j < cols; ++j) norm += std::exp(z[j] - top);
            total += top + std::log(norm) - z[labels[r]];
            if (d_out) {
                for (std::size_t j = 0; j < cols; ++j) {
                    const double p = std::exp(z[j] - top) / norm;
                    (*d_out)[r * cols + j] =
                        (p - (static_cast<std::int32_t>(j) == labels[r] ? 1.0 : 0.0)) / static_cast<double>(rows);
                }
            }
        }
        return total / static_cast<double>(rows);
    }
    const auto t = batch.values().data();
    const double n = static_cast<double>(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double d = out[i] - t[i];
        total += d * d;
        if (d_out) (*d_out)[i] = 2.0 * d / n;
    }
    return total / n;
}

std::vector<double> backprop(const MlpSpec& spec, std::span<const double> params, LossKind kind,
                             const Batch& batch, double* loss, KinkProbe* probe) {
    const auto offs = offsets(spec);
    const std::size_t rows = batch.rows();
    const ForwardPass pass = run_forward(spec, params, batch, probe);
    std::vector<double> dz;
    const double value = output_loss(pass.pre.back(), spec.output_dim(), kind, batch, &dz);
    if (loss) *loss = value;

    std::vector<double> grad(params.size(), 0.0);
    for (std::size_t l = offs.size(); l-- > 0;) {
        const std::size_t in = spec.widths[l];
        const std::size_t out = spec.widths[l + 1];
        const auto& h = pass.inputs[l];
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < out; ++j) {
                const double d = dz[r * out + j];
                grad[offs[l].b + j] += d;
                for (std::size_t k = 0; k < in; ++k) grad[offs[l].w + k * out + j] += h[r * in + k] * d;
            }
        }
        if (l == 0) break;
        std::vector<double> dh(rows * in, 0.0);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t k = 0; k < in; ++k) {
                double acc = 0.0;
                for (std::size_t j = 0; j < out; ++j) acc += dz[r * out + j] * params[offs[l].w + k * out + j];
                dh[r * in + k] = pass.pre[l - 1][r * in + k] > 0.0 ? acc : 0.0;
            }
        dz = std::move(dh);
    }
    return grad;
}

double unrolled_loss(const MlpSpec& spec, std::span<const double> x, const Task& task,
                     const InnerOptimizer& inner, KinkProbe* probe) {
    std::vector<double> y(x.begin(), x.end());
    for (std::size_t step = 0; step < inner.steps; ++step) {
        const auto g = backprop(spec, y, task.loss, task.support, nullptr, probe);
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (inner.kind == InnerKind::Sgd) {
                y[i] -= inner.beta * g[i];
            } else {
                if (probe) probe->note(g[i]);
                const double s = g[i] > 0.0 ? 1.0 : (g[i] < 0.0 ? -1.0 : 0.0);
                y[i] -= inner.beta * s;
            }
        }
    }
    const ForwardPass pass = run_forward(spec, y, task.query_set, probe);
    return output_loss(pass.pre.back(), spec.output_dim(), task.loss, task.query_set, nullptr);
}

}  // namespace

double reference_loss(const MlpSpec& spec, std::span<const double> params, LossKind kind,
                      const Batch& batch) {
    const ForwardPass pass = run_forward(spec, params, batch, nullptr);
    return output_loss(pass.pre.back(), spec.output_dim(), kind, batch, nullptr);
}

std::vector<double> reference_gradient(const MlpSpec& spec, std::span<const double> params,
                                       LossKind kind, const Batch& batch, double* loss) {
    return backprop(spec, params, kind, batch, loss, nullptr);
}

double reference_unrolled_loss(const MlpSpec& spec, std::span<const double> x, const Task& task,
                               const InnerOptimizer& inner) {
    return unrolled_loss(spec, x, task, inner, nullptr);
}

FdResult fd_meta_grad(const MlpSpec& spec, const ParamVector& x, const Task& task,
                      const InnerOptimizer& inner, const FdSpec& fd) {
    if (!(fd.epsilon > 0.0)) throw ContractError("fd_meta_grad: epsilon must be > 0");
    KinkProbe base;
    unrolled_loss(spec, x.values(), task, inner, &base);
    if (base.margin < fd.kink_margin) {
        throw KinkProximityError("fd_meta_grad: base point within " + std::to_string(base.margin) +
                                 " of a kink");
    }
    auto f = [&](std::span<const double> point) {
        KinkProbe probe;
        const double value = unrolled_loss(spec, point, task, inner, &probe);
        if (probe.pattern != base.pattern) {
            throw KinkProximityError("fd_meta_grad: perturbation crossed a kink");
        }
        return value;
    };

    FdResult result;
    if (fd.directions == FdDirections::CoordinateWise) {
        result.gradient = central_difference(f, x.values(), fd.epsilon);
        return result;
    }
    Rng rng(Rng::key({fd.seed, 0xfdULL}));
    for (std::size_t s = 0; s < fd.samples; ++s) {
        std::vector<double> u(x.size());
        double norm = 0.0;
        for (double& v : u) {
            v = rng.normal();
            norm += v * v;
        }
        norm = std::sqrt(norm);
        for (double& v : u) v /= norm;
        const double value = directional_difference(f, x.values(), u, fd.epsilon);
        result.directional.push_back({std::move(u), value});
    }
    return result;
}

std::vector<double> quadratic_bilevel_oracle(std::span<const double> a, std::span<const double> c,
                                             std::span<const double> g, double beta,
                                             std::size_t steps) {
    const std::size_t n = g.size();
    if (a.size() != n * n || c.size() != n) {
        throw DimensionError("quadratic_bilevel_oracle: A must be n x n and c, g of length n");
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (a[i * n + j] != a[j * n + i]) throw ContractError("quadratic_bilevel_oracle: A is not symmetric");

    std::vector<double> v(g.begin(), g.end());
    for (std::size_t step = 0; step < steps; ++step) {
        std::vector<double> next(n);
        for (std::size_t i = 0; i < n; ++i) {
            double av = 0.0;
            for (std::size_t j = 0; j < n; ++j) av += a[i * n + j] * v[j];
            next[i] = v[i] - beta * av;
        }
        v = std::move(next);
    }
    return v;
}

double max_relative_deviation(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionError("max_relative_deviation: length mismatch");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double scale = std::max(std::abs(a[i]), std::abs(b[i]));
        if (scale == 0.0) continue;
        worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
    }
    return worst;
}

double relative_error(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionError("relative_error: length mismatch");
    double diff = 0.0;
    double ref = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        ref += b[i] * b[i];
    }
    return ref > 0.0 ? std::sqrt(diff / ref) : std::sqrt(diff);
}

double collapse_check(const ParamVector& x, const TaskObjective& task, double beta,
                      std::size_t steps) {
    const InnerOptimizer inner{InnerKind::SignSgd, beta, steps};
    const ParamVector through_unroll = meta_grad_maml_autodiff(x, task, inner);
    const ParamVector first_order = meta_grad_signmaml(unroll(x, task, inner), task);
    return max_relative_deviation(through_unroll.values(), first_order.values());
}

Instance random_instance(std::uint64_t seed, std::size_t steps, bool sign_scale) {
    Rng rng(Rng::key({seed, 0x1257ULL}));
    Instance inst;
    inst.steps = steps;
    TaskDistribution dist;
    if (seed % 2 == 0) {
        dist.kind = TaskKind::GaussianBlobs;
        dist.dim = 4;
        dist.way = 3;
        dist.shot = 2;
        dist.query = 3;
        dist.separation = 2.0;
        dist.noise = 1.0;
        inst.spec = MlpSpec{{4, 8, 3}};
        inst.beta = sign_scale ? rng.uniform(0.005, 0.05) : rng.uniform(0.05, 0.5);
    } else {
        dist.kind = TaskKind::Sinusoid;
        dist.shot = 5;
        dist.query = 5;
        inst.spec = MlpSpec{{1, 12, 12, 1}};
        inst.beta = sign_scale ? rng.uniform(0.005, 0.05) : rng.uniform(0.002, 0.02);
    }
    inst.task = sample_task(dist, StreamKey{seed, StreamPurpose::Test, 0, 0});
    inst.x = init_params(inst.spec, seed);
    // Nonzero biases so no pre-activation starts at an exact tie.
    for (std::size_t l = 0; l < inst.spec.layers(); ++l)
        for (double& b : inst.x.segment(2 * l + 1)) b = rng.uniform(-0.5, 0.5);
    return inst;
}

}  // namespace metalearn::oracle
