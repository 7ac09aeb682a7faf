// SPDX-License-Identifier: Apache-2.0
#include "metalearn/harness/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "metalearn/errors.hpp"

namespace metalearn::harness {

using nlohmann::json;

double ExperimentConfig::beta() const {
    const auto it = betas.find(method);
    if (it == betas.end()) throw ConfigError(std::string("no beta configured for ") + method_name(method));
    return it->second;
}

MlpSpec ExperimentConfig::model() const {
    MlpSpec spec;
    spec.widths.push_back(task.input_dim());
    spec.widths.insert(spec.widths.end(), hidden.begin(), hidden.end());
    spec.widths.push_back(task.output_dim());
    spec.validate();
    return spec;
}

MetaConfig ExperimentConfig::meta_config() const {
    MetaConfig cfg;
    cfg.method = method;
    cfg.alpha = alpha;
    cfg.inner = {inner_kind_for(method), beta(), m_train};
    cfg.meta_batch = meta_batch;
    cfg.test_steps = m_test;
    cfg.workers = workers;
    return cfg;
}

InnerOptimizer ExperimentConfig::test_optimizer() const { return {inner_kind_for(method), beta(), m_test}; }

void ExperimentConfig::validate() const {
    task.validate();
    model();
    meta_config().validate();
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be positive and finite");
    for (const auto& [m, b] : betas) {
        if (!(b > 0.0) || !std::isfinite(b))
            throw ConfigError(std::string("beta for ") + method_name(m) + " must be positive and finite");
    }
    if (test_tasks < 2) throw ConfigError("test_tasks must be at least 2 for a confidence interval");
    if (val_interval > 0 && val_tasks < 1) throw ConfigError("val_tasks must be positive when validating");
    if (workers < 1) throw ConfigError("workers must be at least 1");
}

namespace {

template <typename T>
T get(const json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) throw ConfigError("unknown config key '" + key + "' in " + where);
    }
}

std::pair<double, double> range(const json& j, const char* key) {
    const auto v = get<std::vector<double>>(j, key);
    if (v.size() != 2) throw ConfigError(std::string("config key '") + key + "' must be [lo, hi]");
    return {v[0], v[1]};
}

void read_task(const json& j, TaskDistribution& t) {
    check_keys(j, {"kind", "dim", "way", "shot", "query", "separation", "noise", "amplitude", "phase", "x_range"},
               "task");
    if (j.contains("kind")) {
        t.kind = parse_task_kind(get<std::string>(j, "kind"));
        if (t.kind == TaskKind::Sinusoid) {
            t.dim = 1;
            t.way = 1;
        }
    }
    if (j.contains("dim")) t.dim = get<std::size_t>(j, "dim");
    if (j.contains("way")) t.way = get<std::size_t>(j, "way");
    if (j.contains("shot")) t.shot = get<std::size_t>(j, "shot");
    if (j.contains("query")) t.query = get<std::size_t>(j, "query");
    if (j.contains("separation")) t.separation = get<double>(j, "separation");
    if (j.contains("noise")) t.noise = get<double>(j, "noise");
    if (j.contains("amplitude")) std::tie(t.amplitude_min, t.amplitude_max) = range(j, "amplitude");
    if (j.contains("phase")) std::tie(t.phase_min, t.phase_max) = range(j, "phase");
    if (j.contains("x_range")) std::tie(t.x_min, t.x_max) = range(j, "x_range");
}

}  // namespace

ExperimentConfig config_from_json(const json& j, ExperimentConfig cfg) {
    check_keys(j,
               {"task", "hidden", "method", "alpha", "beta", "betas", "m_train", "m_test", "meta_batch",
                "iterations", "val_interval", "val_tasks", "test_tasks", "timing_warmup", "seed", "workers",
                "output_dir"},
               "config");
    if (j.contains("task")) read_task(j.at("task"), cfg.task);
    if (j.contains("hidden")) cfg.hidden = get<std::vector<std::size_t>>(j, "hidden");
    if (j.contains("method")) cfg.method = parse_method(get<std::string>(j, "method"));
    if (j.contains("alpha")) cfg.alpha = get<double>(j, "alpha");
    if (j.contains("betas")) {
        const json& b = j.at("betas");
        if (!b.is_object()) throw ConfigError("config key 'betas' must map method names to rates");
        for (const auto& [name, value] : b.items()) {
            const MetaMethod m = parse_method(name);
            cfg.betas[m] = value.get<double>();
            // "maml" names both second-order engines.
            if (name == "maml") cfg.betas[MetaMethod::MamlProduct] = value.get<double>();
        }
    }
    if (j.contains("beta")) cfg.set_beta(get<double>(j, "beta"));
    if (j.contains("m_train")) cfg.m_train = get<std::size_t>(j, "m_train");
    if (j.contains("m_test")) cfg.m_test = get<std::size_t>(j, "m_test");
    if (j.contains("meta_batch")) cfg.meta_batch = get<std::size_t>(j, "meta_batch");
    if (j.contains("iterations")) cfg.iterations = get<std::size_t>(j, "iterations");
    if (j.contains("val_interval")) cfg.val_interval = get<std::size_t>(j, "val_interval");
    if (j.contains("val_tasks")) cfg.val_tasks = get<std::size_t>(j, "val_tasks");
    if (j.contains("test_tasks")) cfg.test_tasks = get<std::size_t>(j, "test_tasks");
    if (j.contains("timing_warmup")) cfg.timing_warmup = get<std::size_t>(j, "timing_warmup");
    if (j.contains("seed")) cfg.seed = get<std::uint64_t>(j, "seed");
    if (j.contains("workers")) cfg.workers = get<std::size_t>(j, "workers");
    if (j.contains("output_dir")) cfg.output_dir = get<std::string>(j, "output_dir");
    return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
    const TaskDistribution& t = cfg.task;
    json task = {{"kind", task_kind_name(t.kind)}, {"dim", t.dim}, {"way", t.way}, {"shot", t.shot},
                 {"query", t.query}};
    if (t.kind == TaskKind::GaussianBlobs) {
        task["separation"] = t.separation;
        task["noise"] = t.noise;
    } else {
        task["amplitude"] = {t.amplitude_min, t.amplitude_max};
        task["phase"] = {t.phase_min, t.phase_max};
        task["x_range"] = {t.x_min, t.x_max};
    }
    json betas = json::object();
    for (const auto& [m, b] : cfg.betas) betas[method_name(m)] = b;
    return {{"task", task},
            {"hidden", cfg.hidden},
            {"method", method_name(cfg.method)},
            {"alpha", cfg.alpha},
            {"betas", betas},
            {"m_train", cfg.m_train},
            {"m_test", cfg.m_test},
            {"meta_batch", cfg.meta_batch},
            {"iterations", cfg.iterations},
            {"val_interval", cfg.val_interval},
            {"val_tasks", cfg.val_tasks},
            {"test_tasks", cfg.test_tasks},
            {"timing_warmup", cfg.timing_warmup},
            {"seed", cfg.seed},
            {"workers", cfg.workers},
            {"output_dir", cfg.output_dir}};
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file " + path + ": " + e.what());
    }
    return config_from_json(j);
}

}  // namespace metalearn::harness
