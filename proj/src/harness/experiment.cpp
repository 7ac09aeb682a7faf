// SPDX-License-Identifier: Apache-2.0
#include "metalearn/harness/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>

#include "metalearn/objective.hpp"
#include "metalearn/ops.hpp"

namespace metalearn::harness {

TrainingDivergenceError::TrainingDivergenceError(std::size_t iteration, const TaskDivergenceError& cause,
                                                 std::vector<RunRecord> records)
    : Error("training diverged at meta-iteration " + std::to_string(iteration) + ": " + cause.what()),
      iteration_(iteration),
      records_(std::move(records)) {}

TrainResult train(const ExperimentConfig& cfg, const RecordSink& sink) {
    cfg.validate();
    const MlpSpec spec = cfg.model();
    const MetaConfig meta = cfg.meta_config();
    TrainResult result{init_params(spec, cfg.seed), {}};
    result.records.reserve(cfg.iterations);
    EpisodeStream stream(cfg.seed, StreamPurpose::Train);

    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        const std::vector<Task> episode = sample_episode(cfg.task, cfg.meta_batch, stream);
        std::vector<MlpObjective> objectives;
        objectives.reserve(episode.size());
        std::vector<const TaskObjective*> tasks;
        for (const Task& t : episode) tasks.push_back(&objectives.emplace_back(spec, t));

        MetaStepResult step;
        try {
            step = meta_step(result.params, tasks, meta);
        } catch (const TaskDivergenceError& e) {
            throw TrainingDivergenceError(it, e, std::move(result.records));
        }
        result.params = std::move(step.params);

        RunRecord record{it, step.record.mean_query_loss, step.record.seconds, std::nullopt};
        if (cfg.val_interval > 0 && (it + 1) % cfg.val_interval == 0) {
            record.val_metric = validate(result.params, cfg).mean;
        }
        result.records.push_back(record);
        if (sink) sink(record);
    }
    return result;
}

EvalResult score_tasks(const ParamVector& params, const ExperimentConfig& cfg, StreamPurpose purpose,
                       std::size_t count, std::size_t steps) {
    const MlpSpec spec = cfg.model();
    if (!(params.layout() == mlp_layout(spec))) {
        throw DimensionError("parameters do not match the configured model");
    }
    const InnerOptimizer inner{inner_kind_for(cfg.method), cfg.beta(), steps};
    const bool classification = cfg.task.loss_kind() == LossKind::CrossEntropy;
    EvalResult r;
    r.metric = classification ? "accuracy" : "mse";
    r.scores.reserve(count);
    for (std::size_t t = 0; t < count; ++t) {
        const Task task = sample_task(cfg.task, {cfg.seed, purpose, t, 0});
        const MlpObjective objective(spec, task);
        const ParamVector adapted = unroll(params, objective, inner).adapted();
        if (classification) {
            r.scores.push_back(*objective.query_accuracy(adapted));
        } else {
            r.scores.push_back(objective.query_loss(adapted.unflatten()).item());
        }
    }
    r.mean = sample_mean(r.scores);
    r.ci95 = ci95_half_width(r.scores);
    return r;
}

EvalResult evaluate(const ParamVector& params, const ExperimentConfig& cfg) {
    return score_tasks(params, cfg, StreamPurpose::Test, cfg.test_tasks, cfg.m_test);
}

EvalResult validate(const ParamVector& params, const ExperimentConfig& cfg) {
    return score_tasks(params, cfg, StreamPurpose::Validation, cfg.val_tasks, cfg.m_test);
}

double selection_score(const EvalResult& r) { return r.metric == "mse" ? -r.mean : r.mean; }

double sample_mean(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double mean = sample_mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double ci95_half_width(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    return 1.96 * sample_std(v) / std::sqrt(static_cast<double>(v.size()));
}

TimingStats timing_stats(const std::vector<RunRecord>& records, std::size_t warmup) {
    const std::size_t skip = records.size() > warmup ? warmup : 0;
    std::vector<double> seconds;
    for (std::size_t i = skip; i < records.size(); ++i) seconds.push_back(records[i].seconds);
    return {sample_mean(seconds), sample_std(seconds), seconds.size()};
}

namespace {

// Grid points built by repeated addition drift in the last bits; 12 significant
// digits keeps 0.16 + 0.02 printing as 0.18.
double tidy(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return std::strtod(buf, nullptr);
}

}  // namespace

GridSearchResult grid_search_beta(std::vector<double> candidates, const BetaScorer& scorer,
                                  std::size_t max_extensions) {
    if (candidates.size() < 2) throw ConfigError("grid search needs at least two candidate rates");
    if (!std::is_sorted(candidates.begin(), candidates.end()) ||
        std::adjacent_find(candidates.begin(), candidates.end()) != candidates.end()) {
        throw ConfigError("grid search candidates must be strictly ascending");
    }
    if (!(candidates.front() > 0.0)) throw ConfigError("grid search candidates must be positive");

    GridSearchResult result;
    std::vector<GridEntry> grid;  // kept sorted by beta
    auto score_all = [&](const std::vector<double>& betas, std::size_t round) {
        for (double b : betas) {
            const GridEntry e{b, scorer(b), round};
            result.log.push_back(e);
            grid.insert(std::upper_bound(grid.begin(), grid.end(), b,
                                         [](double v, const GridEntry& g) { return v < g.beta; }),
                        e);
        }
    };
    score_all(candidates, 0);

    while (true) {
        // Ties go to the smaller rate.
        std::size_t best = 0;
        for (std::size_t i = 1; i < grid.size(); ++i)
            if (grid[i].score > grid[best].score) best = i;
        result.best_beta = grid[best].beta;
        result.best_score = grid[best].score;

        const bool at_top = best + 1 == grid.size();
        const bool at_bottom = best == 0;
        if (!at_top && !at_bottom) break;
        if (result.extensions == max_extensions) {
            result.boundary_warning = true;
            break;
        }
        std::vector<double> next;
        if (at_top) {
            const double spacing = grid[grid.size() - 1].beta - grid[grid.size() - 2].beta;
            next = {tidy(grid.back().beta + spacing), tidy(grid.back().beta + 2 * spacing)};
        } else {
            const double spacing = grid[1].beta - grid[0].beta;
            for (double b : {grid.front().beta - spacing, grid.front().beta - 2 * spacing})
                if (tidy(b) > 0.0) next.push_back(tidy(b));
            std::sort(next.begin(), next.end());
        }
        if (next.empty()) {
            result.boundary_warning = true;
            break;
        }
        ++result.extensions;
        score_all(next, result.extensions);
    }
    return result;
}

std::vector<double> default_beta_candidates(MetaMethod method) {
    if (method == MetaMethod::SignMaml) return {0.0035, 0.005, 0.0065, 0.0075, 0.01};
    return {0.06, 0.08, 0.1, 0.12, 0.14, 0.16};
}

double train_and_validate(ExperimentConfig cfg, double beta) {
    cfg.set_beta(beta);
    if (cfg.method == MetaMethod::MamlAutodiff) cfg.betas[MetaMethod::MamlProduct] = beta;
    const TrainResult trained = train(cfg);
    return selection_score(validate(trained.params, cfg));
}

SweepAxis parse_sweep_axis(const std::string& name) {
    if (name == "way" || name == "N") return SweepAxis::Way;
    if (name == "shot" || name == "K") return SweepAxis::Shot;
    if (name == "steps" || name == "m") return SweepAxis::Steps;
    throw ConfigError("unknown sweep axis '" + name + "' (expected way, shot or steps)");
}

const char* sweep_axis_name(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::Way: return "way";
        case SweepAxis::Shot: return "shot";
        case SweepAxis::Steps: return "steps";
    }
    return "?";
}

ResultRow result_row(const ExperimentConfig& cfg, const EvalResult& eval, const TimingStats& timing) {
    ResultRow row;
    row.method = method_name(cfg.method);
    row.way = cfg.task.way;
    row.shot = cfg.task.shot;
    row.m_train = cfg.m_train;
    row.m_test = cfg.m_test;
    row.beta = cfg.beta();
    row.accuracy = eval.mean;
    row.ci95 = eval.ci95;
    row.time_mean_s = timing.mean;
    row.time_std_s = timing.std;
    row.seed = cfg.seed;
    return row;
}

TimingComparison compare_timing(const ExperimentConfig& cfg, const std::vector<MetaMethod>& methods) {
    if (methods.empty()) throw ConfigError("timing comparison needs at least one method");
    const MlpSpec spec = cfg.model();
    std::vector<MetaConfig> metas;
    for (MetaMethod m : methods) {
        ExperimentConfig c = cfg;
        c.method = m;
        c.workers = 1;
        c.validate();
        metas.push_back(c.meta_config());
    }
    TimingComparison out{methods, std::vector<std::vector<RunRecord>>(methods.size())};
    std::vector<ParamVector> params(methods.size(), init_params(spec, cfg.seed));
    EpisodeStream stream(cfg.seed, StreamPurpose::Train);
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        const std::vector<Task> episode = sample_episode(cfg.task, cfg.meta_batch, stream);
        std::vector<MlpObjective> objectives;
        objectives.reserve(episode.size());
        std::vector<const TaskObjective*> tasks;
        for (const Task& t : episode) tasks.push_back(&objectives.emplace_back(spec, t));
        for (std::size_t k = 0; k < methods.size(); ++k) {
            const std::size_t i = (it + k) % methods.size();
            MetaStepResult step;
            try {
                step = meta_step(params[i], tasks, metas[i]);
            } catch (const TaskDivergenceError& e) {
                throw TrainingDivergenceError(it, e, std::move(out.records[i]));
            }
            params[i] = std::move(step.params);
            out.records[i].push_back({it, step.record.mean_query_loss, step.record.seconds, std::nullopt});
        }
    }
    return out;
}

ResultRow run_cell(const ExperimentConfig& cfg) {
    const TrainResult trained = train(cfg);
    return result_row(cfg, evaluate(trained.params, cfg), timing_stats(trained.records, cfg.timing_warmup));
}

std::vector<ResultRow> sweep(const ExperimentConfig& base, SweepAxis axis, const std::vector<std::size_t>& values,
                             const std::vector<MetaMethod>& methods, const CellRunner& runner) {
    if (values.empty()) throw ConfigError("sweep needs at least one value");
    if (methods.empty()) throw ConfigError("sweep needs at least one method");
    if (axis == SweepAxis::Way && base.task.kind == TaskKind::Sinusoid) {
        throw ConfigError("sinusoid regression has no way axis");
    }
    const CellRunner run = runner ? runner : CellRunner(run_cell);

    std::vector<ResultRow> rows;
    for (std::size_t value : values) {
        const std::size_t first = rows.size();
        for (MetaMethod method : methods) {
            ExperimentConfig cell = base;
            cell.method = method;
            switch (axis) {
                case SweepAxis::Way: cell.task.way = value; break;
                case SweepAxis::Shot: cell.task.shot = value; break;
                case SweepAxis::Steps: cell.m_train = value; break;
            }
            try {
                rows.push_back(run(cell));
            } catch (const Error& e) {
                ResultRow failed;
                failed.method = method_name(method);
                failed.way = cell.task.way;
                failed.shot = cell.task.shot;
                failed.m_train = cell.m_train;
                failed.m_test = cell.m_test;
                failed.beta = cell.betas.count(method) ? cell.betas.at(method) : 0.0;
                failed.seed = cell.seed;
                failed.error = e.what();
                rows.push_back(failed);
            }
        }
        std::optional<double> sign, fo;
        for (std::size_t i = first; i < rows.size(); ++i) {
            if (rows[i].method == method_name(MetaMethod::SignMaml)) sign = rows[i].accuracy;
            if (rows[i].method == method_name(MetaMethod::FoMaml)) fo = rows[i].accuracy;
        }
        if (sign && fo) {
            for (std::size_t i = first; i < rows.size(); ++i) rows[i].delta_sign_minus_fo = *sign - *fo;
        }
    }
    return rows;
}

}  // namespace metalearn::harness
