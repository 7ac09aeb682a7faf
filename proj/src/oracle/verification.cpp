// SPDX-License-Identifier: Apache-2.0
#include "metalearn/oracle/verification.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "metalearn/bilevel.hpp"
#include "metalearn/objective.hpp"
#include "metalearn/oracle/oracle.hpp"
#include "metalearn/rng.hpp"

namespace metalearn::oracle {

void VerificationReport::set(const std::string& key, double value) {
    for (auto& [k, v] : entries_) {
        if (k == key) {
            v = value;
            return;
        }
    }
    entries_.emplace_back(key, value);
}

std::optional<double> VerificationReport::get(const std::string& key) const {
    for (const auto& [k, v] : entries_)
        if (k == key) return v;
    return std::nullopt;
}

double VerificationReport::at(const std::string& key) const {
    if (auto v = get(key)) return *v;
    throw DataError("verification report has no key '" + key + "'");
}

std::string VerificationReport::to_text() const {
    std::string out;
    char buf[64];
    for (const auto& [k, v] : entries_) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out += k + "=" + buf + "\n";
    }
    return out;
}

VerificationReport VerificationReport::parse(const std::string& text) {
    VerificationReport report;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw DataError("verification report: malformed line '" + line + "'");
        try {
            report.set(line.substr(0, eq), std::stod(line.substr(eq + 1)));
        } catch (const std::logic_error&) {
            throw DataError("verification report: bad value in '" + line + "'");
        }
    }
    return report;
}

void VerificationReport::merge(const VerificationReport& other) {
    for (const auto& [k, v] : other.entries_) set(k, v);
}

namespace {

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

bool bitwise_equal(const ParamVector& a, const ParamVector& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::bit_cast<std::uint64_t>(a.values()[i]) != std::bit_cast<std::uint64_t>(b.values()[i]))
            return false;
    return true;
}

}  // namespace

VerificationReport verify_collapse(const VerifyOptions& opts) {
    constexpr std::array<std::size_t, 4> kSteps{0, 1, 3, 10};
    Stopwatch clock;
    double worst = 0.0;
    double worst_m0 = 0.0;
    for (std::size_t i = 0; i < opts.collapse_instances; ++i) {
        const std::size_t m = kSteps[i % kSteps.size()];
        const Instance inst = random_instance(opts.seed + i, m, /*sign_scale=*/true);
        const MlpObjective task(inst.spec, inst.task);
        const double dev = collapse_check(inst.x, task, inst.beta, m);
        worst = std::max(worst, dev);
        if (m == 0) worst_m0 = std::max(worst_m0, dev);
    }
    VerificationReport r;
    r.set("collapse.instances", static_cast<double>(opts.collapse_instances));
    r.set("collapse.max_rel_dev", worst);
    r.set("collapse.max_rel_dev_m0", worst_m0);
    r.set("collapse.seconds", clock.seconds());
    return r;
}

VerificationReport verify_equivalence(const VerifyOptions& opts) {
    Stopwatch clock;
    double worst = 0.0;
    std::size_t max_params = 0;
    for (std::size_t i = 0; i < opts.equivalence_instances; ++i) {
        const std::size_t m = i % 4;
        const Instance inst = random_instance(opts.seed + 7919 + i, m);
        const MlpObjective task(inst.spec, inst.task);
        const InnerOptimizer inner{InnerKind::Sgd, inst.beta, m};
        const ParamVector product = meta_grad_maml_product(unroll(inst.x, task, inner), task);
        const ParamVector autodiff = meta_grad_maml_autodiff(inst.x, task, inner);
        worst = std::max(worst, relative_error(product.values(), autodiff.values()));
        max_params = std::max(max_params, inst.x.size());
    }
    VerificationReport r;
    r.set("equivalence.instances", static_cast<double>(opts.equivalence_instances));
    r.set("equivalence.max_params", static_cast<double>(max_params));
    r.set("equivalence.max_rel_err", worst);
    r.set("equivalence.seconds", clock.seconds());
    return r;
}

VerificationReport verify_finite_differences(const VerifyOptions& opts) {
    Stopwatch clock;
    double worst = 0.0;
    std::size_t resampled = 0;
    std::size_t accepted = 0;
    std::uint64_t seed = opts.seed + 104729;
    FdSpec fd;
    fd.epsilon = opts.fd_epsilon;
    while (accepted < opts.fd_instances) {
        const std::size_t m = accepted % 4;
        // Alternate loss kinds by seed parity; a resample keeps the parity.
        const Instance inst = random_instance(seed, m);
        seed += 2;
        const InnerOptimizer inner{InnerKind::Sgd, inst.beta, m};
        FdResult numeric;
        try {
            numeric = fd_meta_grad(inst.spec, inst.x, inst.task, inner, fd);
        } catch (const KinkProximityError&) {
            ++resampled;
            continue;
        }
        const MlpObjective task(inst.spec, inst.task);
        const ParamVector exact = meta_grad_maml_autodiff(inst.x, task, inner);
        worst = std::max(worst, relative_error(numeric.gradient, exact.values()));
        ++accepted;
        if (accepted % 2 == 0) seed += 1;  // switch loss kind
    }
    VerificationReport r;
    r.set("fd.instances", static_cast<double>(accepted));
    r.set("fd.resampled", static_cast<double>(resampled));
    r.set("fd.epsilon", fd.epsilon);
    r.set("fd.max_rel_err", worst);
    r.set("fd.seconds", clock.seconds());
    return r;
}

VerificationReport verify_quadratic(const VerifyOptions& opts) {
    Stopwatch clock;
    double worst_product = 0.0;
    double worst_autodiff = 0.0;
    double worst_fomaml = 0.0;
    double min_gap_ratio = std::numeric_limits<double>::infinity();
    std::size_t gap_cases = 0;
    for (std::size_t i = 0; i < opts.quadratic_instances; ++i) {
        Rng rng(Rng::key({opts.seed, 0x9dULL, i}));
        const std::size_t n = 2 + i % 4;
        const std::size_t m = i % 6;
        std::vector<double> b(n * n);
        for (double& v : b) v = rng.uniform(-1.0, 1.0);
        std::vector<double> a(n * n, 0.0);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < n; ++c) {
                for (std::size_t k = 0; k < n; ++k) a[r * n + c] += b[k * n + r] * b[k * n + c];
                if (r == c) a[r * n + c] += 0.1;
            }
        std::vector<double> c(n), g(n), x(n);
        for (double& v : c) v = rng.uniform(-2.0, 2.0);
        for (double& v : g) v = rng.uniform(-2.0, 2.0);
        for (double& v : x) v = rng.uniform(-2.0, 2.0);
        const double beta = rng.uniform(0.01, 0.3);

        const QuadraticObjective task(a, c, g);
        const ParamVector x0(task.layout(), x);
        const auto expected = quadratic_bilevel_oracle(a, c, g, beta, m);
        const AdaptTrace trace = unroll_sgd(x0, task, beta, m);
        const ParamVector product = meta_grad_maml_product(trace, task);
        const ParamVector autodiff = meta_grad_maml_autodiff(x0, task, {InnerKind::Sgd, beta, m});
        const ParamVector fo = meta_grad_fomaml(trace, task);
        worst_product = std::max(worst_product, relative_error(product.values(), expected));
        worst_autodiff = std::max(worst_autodiff, relative_error(autodiff.values(), expected));
        for (std::size_t k = 0; k < n; ++k) worst_fomaml = std::max(worst_fomaml, std::abs(fo.values()[k] - g[k]));

        if (m > 0) {
            // ||((I - beta A)^m - I) g||: the error of dropping the inner Hessians.
            std::vector<double> witness(n);
            for (std::size_t k = 0; k < n; ++k) witness[k] = expected[k] - g[k];
            const double bound = norm2(witness);
            std::vector<double> gap(n);
            for (std::size_t k = 0; k < n; ++k) gap[k] = fo.values()[k] - product.values()[k];
            if (bound > 0.0) {
                min_gap_ratio = std::min(min_gap_ratio, norm2(gap) / bound);
                ++gap_cases;
            }
        }
    }
    VerificationReport r;
    r.set("quadratic.instances", static_cast<double>(opts.quadratic_instances));
    r.set("quadratic.max_rel_err_product", worst_product);
    r.set("quadratic.max_rel_err_autodiff", worst_autodiff);
    r.set("quadratic.max_abs_err_fomaml", worst_fomaml);
    r.set("quadratic.gap_cases", static_cast<double>(gap_cases));
    r.set("quadratic.min_gap_ratio", gap_cases > 0 ? min_gap_ratio : 0.0);
    r.set("quadratic.seconds", clock.seconds());
    return r;
}

VerificationReport verify_degeneracies(const VerifyOptions& opts) {
    Stopwatch clock;
    std::size_t m0_mismatches = 0;
    std::size_t beta0_mismatches = 0;
    std::size_t alpha0_mismatches = 0;
    for (std::size_t i = 0; i < opts.degeneracy_instances; ++i) {
        const Instance inst = random_instance(opts.seed + 31337 + i, 0);
        const MlpObjective task(inst.spec, inst.task);

        const AdaptTrace sgd0 = unroll_sgd(inst.x, task, inst.beta, 0);
        const AdaptTrace sign0 = unroll_signsgd(inst.x, task, inst.beta, 0);
        const ParamVector reference = meta_grad_maml_product(sgd0, task);
        const bool m0_equal =
            bitwise_equal(reference, meta_grad_maml_autodiff(inst.x, task, {InnerKind::Sgd, inst.beta, 0})) &&
            bitwise_equal(reference, meta_grad_fomaml(sgd0, task)) &&
            bitwise_equal(reference, meta_grad_signmaml(sign0, task));
        if (!m0_equal) ++m0_mismatches;

        const std::size_t m = 1 + i % 3;
        const ParamVector p = meta_grad_maml_product(unroll_sgd(inst.x, task, 0.0, m), task);
        const ParamVector ad = meta_grad_maml_autodiff(inst.x, task, {InnerKind::Sgd, 0.0, m});
        if (!bitwise_equal(p, ad) || !bitwise_equal(p, reference)) ++beta0_mismatches;

        MetaConfig cfg;
        cfg.method = static_cast<MetaMethod>(i % 4);
        cfg.inner = {inner_kind_for(cfg.method), inst.beta, m};
        cfg.alpha = 0.0;
        cfg.meta_batch = 1;
        const TaskObjective* episode[] = {&task};
        if (!bitwise_equal(meta_step(inst.x, episode, cfg).params, inst.x)) ++alpha0_mismatches;
    }
    VerificationReport r;
    r.set("degeneracy.instances", static_cast<double>(opts.degeneracy_instances));
    r.set("degeneracy.m0_mismatches", static_cast<double>(m0_mismatches));
    r.set("degeneracy.beta0_mismatches", static_cast<double>(beta0_mismatches));
    r.set("degeneracy.alpha0_mismatches", static_cast<double>(alpha0_mismatches));
    r.set("degeneracy.seconds", clock.seconds());
    return r;
}

VerificationReport run_verification(const VerifyOptions& opts) {
    VerificationReport r;
    r.merge(verify_collapse(opts));
    r.merge(verify_equivalence(opts));
    r.merge(verify_finite_differences(opts));
    r.merge(verify_quadratic(opts));
    r.merge(verify_degeneracies(opts));
    return r;
}

}  // namespace metalearn::oracle
