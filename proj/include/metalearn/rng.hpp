// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace metalearn {

/// Deterministic random stream selected by a key.
///
/// Streams are addressed by mixing a tuple such as (seed, purpose, episode,
/// task) into a 64-bit key, so any stream can be regenerated without replaying
/// the ones before it. The engine is std::mt19937_64, whose output sequence is
/// fixed by the standard; the real-valued transforms are done here rather than
/// through <random> distributions, whose algorithms are implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t key) : engine_(key) {}

    static std::uint64_t key(std::initializer_list<std::uint64_t> parts);

    std::uint64_t next() { return engine_(); }
    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Standard normal via Box-Muller.
    double normal();

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace metalearn
