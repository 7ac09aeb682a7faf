// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "metalearn/errors.hpp"
#include "metalearn/harness/config.hpp"
#include "metalearn/param_vector.hpp"

namespace metalearn::harness {

struct RunRecord {
    std::size_t iteration = 0;
    /// Mean query loss of the episode's adapted models, before the meta update.
    double loss = 0.0;
    double seconds = 0.0;
    /// Mean validation metric (accuracy or MSE) on iterations that validate.
    std::optional<double> val_metric;
};

struct TrainResult {
    ParamVector params;
    std::vector<RunRecord> records;
};

/// meta_step diverged; carries the records of the iterations that completed.
class TrainingDivergenceError : public Error {
public:
    TrainingDivergenceError(std::size_t iteration, const TaskDivergenceError& cause, std::vector<RunRecord> records);
    std::size_t iteration() const noexcept { return iteration_; }
    const std::vector<RunRecord>& records() const noexcept { return records_; }

private:
    std::size_t iteration_;
    std::vector<RunRecord> records_;
};

/// Called after each completed iteration, e.g. to stream loss.csv.
using RecordSink = std::function<void(const RunRecord&)>;

/// Meta-trains from init_params(cfg.model(), cfg.seed) for cfg.iterations steps.
TrainResult train(const ExperimentConfig& cfg, const RecordSink& sink = {});

/// Per-task scores: query accuracy for classification, query MSE for regression.
struct EvalResult {
    std::string metric;
    std::vector<double> scores;
    double mean = 0.0;
    double ci95 = 0.0;
};

/// Adapts to `count` tasks of the given stream with the method's inner
/// optimizer for `steps` steps and scores the query set.
EvalResult score_tasks(const ParamVector& params, const ExperimentConfig& cfg, StreamPurpose purpose,
                       std::size_t count, std::size_t steps);

/// cfg.test_tasks fresh test tasks, m_test adaptation steps.
EvalResult evaluate(const ParamVector& params, const ExperimentConfig& cfg);
/// cfg.val_tasks validation tasks, m_test adaptation steps.
EvalResult validate(const ParamVector& params, const ExperimentConfig& cfg);

/// Higher is better: accuracy, or negated MSE for regression.
double selection_score(const EvalResult& r);

double sample_mean(const std::vector<double>& v);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double sample_std(const std::vector<double>& v);
/// 1.96 * sample std / sqrt(n).
double ci95_half_width(const std::vector<double>& v);

struct TimingStats {
    double mean = 0.0;
    double std = 0.0;
    std::size_t samples = 0;
};

/// Per-iteration seconds, skipping the first `warmup` records when more remain.
TimingStats timing_stats(const std::vector<RunRecord>& records, std::size_t warmup);

struct GridEntry {
    double beta = 0.0;
    double score = 0.0;
    std::size_t round = 0;
};

struct GridSearchResult {
    double best_beta = 0.0;
    double best_score = 0.0;
    std::vector<GridEntry> log;
    std::size_t extensions = 0;
    /// The best rate was still on the boundary when the search stopped.
    bool boundary_warning = false;
};

/// Scores one inner rate; higher is better.
using BetaScorer = std::function<double(double beta)>;

/// Scores every candidate. While the best lies at an end of the grid, adds
/// two more rates past that end at the terminal spacing, up to `max_extensions`
/// rounds. Non-positive rates are never tried.
GridSearchResult grid_search_beta(std::vector<double> candidates, const BetaScorer& scorer,
                                  std::size_t max_extensions = 5);

/// Starting grids of the reference tuning procedure.
std::vector<double> default_beta_candidates(MetaMethod method);

/// Trains at `beta` and returns the selection score on the validation tasks.
double train_and_validate(ExperimentConfig cfg, double beta);

enum class SweepAxis { Way, Shot, Steps };
SweepAxis parse_sweep_axis(const std::string& name);
const char* sweep_axis_name(SweepAxis axis);

/// One row of results.csv. Unset optionals are written as empty cells.
struct ResultRow {
    std::string method;
    std::size_t way = 0;
    std::size_t shot = 0;
    std::size_t m_train = 0;
    std::size_t m_test = 0;
    double beta = 0.0;
    std::optional<double> accuracy;
    std::optional<double> ci95;
    std::optional<double> time_mean_s;
    std::optional<double> time_std_s;
    std::uint64_t seed = 0;
    std::optional<double> delta_sign_minus_fo;
    std::string error;
};

ResultRow result_row(const ExperimentConfig& cfg, const EvalResult& eval, const TimingStats& timing);

/// Runs train + evaluate for every (method, value) cell. Failed cells keep
/// their coordinates and leave the measurements empty. When both sign-maml
/// and fo-maml appear, every row gets the accuracy difference at its value.
using CellRunner = std::function<ResultRow(const ExperimentConfig& cell)>;
std::vector<ResultRow> sweep(const ExperimentConfig& base, SweepAxis axis, const std::vector<std::size_t>& values,
                             const std::vector<MetaMethod>& methods, const CellRunner& runner = {});

/// Per-method meta-iteration records from an interleaved timing run.
struct TimingComparison {
    std::vector<MetaMethod> methods;
    std::vector<std::vector<RunRecord>> records;  // one list per method
};

/// Trains one model per method side by side: every iteration samples one
/// episode and gives each method a meta-step on it, rotating which method goes
/// first, so slow drift in machine speed affects all methods alike. Uses the
/// configured beta of each method and a single worker.
TimingComparison compare_timing(const ExperimentConfig& cfg, const std::vector<MetaMethod>& methods);

/// Default cell runner: train, then evaluate on the test tasks.
ResultRow run_cell(const ExperimentConfig& cfg);

}  // namespace metalearn::harness
