// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

// Batch runs of the oracles over seeded random instances, summarized as a flat
// key=value report. The `verify` CLI command prints it; the acceptance suite
// parses it back.
namespace metalearn::oracle {

class VerificationReport {
public:
    void set(const std::string& key, double value);
    std::optional<double> get(const std::string& key) const;
    double at(const std::string& key) const;
    const std::vector<std::pair<std::string, double>>& entries() const noexcept { return entries_; }

    /// One `key=value` line per entry, values with 17 significant digits.
    std::string to_text() const;
    static VerificationReport parse(const std::string& text);

    void merge(const VerificationReport& other);

private:
    std::vector<std::pair<std::string, double>> entries_;
};

struct VerifyOptions {
    std::uint64_t seed = 0;
    std::size_t collapse_instances = 1000;
    std::size_t equivalence_instances = 500;
    std::size_t fd_instances = 100;
    std::size_t quadratic_instances = 200;
    std::size_t degeneracy_instances = 50;
    double fd_epsilon = 1e-4;
};

/// collapse.*: autodiff through signSGD unrolls (m cycling 0, 1, 3, 10) against sign-maml.
VerificationReport verify_collapse(const VerifyOptions& opts);
/// equivalence.*: maml-product against maml-autodiff, m cycling 0..3.
VerificationReport verify_equivalence(const VerifyOptions& opts);
/// fd.*: maml-autodiff against central differences of the reference unroll.
VerificationReport verify_finite_differences(const VerifyOptions& opts);
/// quadratic.*: engines against (I - beta A)^m g, and the fo-maml gap.
VerificationReport verify_quadratic(const VerifyOptions& opts);
/// degeneracy.*: m = 0, beta = 0 and alpha = 0 special cases.
VerificationReport verify_degeneracies(const VerifyOptions& opts);

VerificationReport run_verification(const VerifyOptions& opts);

}  // namespace metalearn::oracle
