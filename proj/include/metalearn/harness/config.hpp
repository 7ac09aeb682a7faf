// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metalearn/bilevel.hpp"
#include "metalearn/mlp.hpp"
#include "metalearn/task.hpp"

namespace metalearn::harness {

/// Everything that determines an experiment. Defaults follow the reference
/// setup: alpha 0.001, one inner step in training, ten at test time, four
/// tasks per episode and 1000 test tasks.
struct ExperimentConfig {
    TaskDistribution task;
    std::vector<std::size_t> hidden{64, 64};

    MetaMethod method = MetaMethod::SignMaml;
    double alpha = 0.001;
    /// Inner learning rate per method; `beta()` reads the active method's entry.
    std::map<MetaMethod, double> betas{{MetaMethod::MamlProduct, 0.1},
                                       {MetaMethod::MamlAutodiff, 0.1},
                                       {MetaMethod::FoMaml, 0.1},
                                       {MetaMethod::SignMaml, 0.0065}};
    std::size_t m_train = 1;
    std::size_t m_test = 10;
    std::size_t meta_batch = 4;

    std::size_t iterations = 1000;
    /// Validate every this many iterations; 0 disables validation during training.
    std::size_t val_interval = 0;
    std::size_t val_tasks = 200;
    std::size_t test_tasks = 1000;
    /// Leading iterations left out of timing statistics.
    std::size_t timing_warmup = 10;

    std::uint64_t seed = 0;
    std::size_t workers = 1;
    std::string output_dir = "results";

    double beta() const;
    void set_beta(double beta) { betas[method] = beta; }

    MlpSpec model() const;
    MetaConfig meta_config() const;
    InnerOptimizer test_optimizer() const;

    /// Harness-level invariants, stricter than the library's: rates must be positive.
    void validate() const;
};

/// Unknown keys are errors, so typos in config files do not pass silently.
ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base = {});
nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::string& path);

}  // namespace metalearn::harness
