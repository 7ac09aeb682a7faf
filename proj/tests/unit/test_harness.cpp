// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "metalearn/errors.hpp"
#include "metalearn/harness/config.hpp"
#include "metalearn/harness/experiment.hpp"
#include "metalearn/harness/report.hpp"

using namespace metalearn;
using namespace metalearn::harness;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny() {
    ExperimentConfig cfg;
    cfg.task.dim = 4;
    cfg.task.way = 3;
    cfg.task.shot = 1;
    cfg.task.query = 5;
    cfg.hidden = {16};
    cfg.iterations = 20;
    cfg.val_tasks = 20;
    cfg.test_tasks = 50;
    cfg.seed = 3;
    return cfg;
}

ExperimentConfig tiny_sinusoid() {
    ExperimentConfig cfg;
    cfg.task.kind = TaskKind::Sinusoid;
    cfg.task.dim = 1;
    cfg.task.way = 1;
    cfg.task.shot = 10;
    cfg.task.query = 10;
    cfg.hidden = {40, 40};
    cfg.test_tasks = 50;
    cfg.seed = 5;
    return cfg;
}

bool bitwise_equal(const ParamVector& a, const ParamVector& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::bit_cast<std::uint64_t>(a.values()[i]) != std::bit_cast<std::uint64_t>(b.values()[i])) return false;
    return true;
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "metalearn_test_harness";
    fs::create_directories(dir);
    return dir / name;
}

template <typename F>
std::string render(F write) {
    std::ostringstream out;
    write(out);
    return out.str();
}

}  // namespace

TEST(Config, DefaultsFollowReferenceSetup) {
    const ExperimentConfig cfg;
    EXPECT_EQ(cfg.alpha, 0.001);
    EXPECT_EQ(cfg.m_train, 1u);
    EXPECT_EQ(cfg.m_test, 10u);
    EXPECT_EQ(cfg.meta_batch, 4u);
    EXPECT_EQ(cfg.test_tasks, 1000u);
    EXPECT_EQ(cfg.beta(), 0.0065);
    EXPECT_EQ(cfg.model().widths, (std::vector<std::size_t>{8, 64, 64, 5}));
    EXPECT_NO_THROW(cfg.validate());
}

TEST(Config, ParsesJson) {
    const auto j = nlohmann::json::parse(R"({
        "task": {"kind": "blobs", "dim": 3, "way": 2, "shot": 4, "query": 6, "separation": 2.5, "noise": 0.5},
        "hidden": [10, 12], "method": "fo-maml", "alpha": 0.01, "beta": 0.2,
        "m_train": 2, "m_test": 4, "meta_batch": 8, "iterations": 7, "val_interval": 3,
        "val_tasks": 9, "test_tasks": 11, "timing_warmup": 1, "seed": 42, "workers": 2, "output_dir": "x"})");
    const ExperimentConfig cfg = config_from_json(j);
    EXPECT_EQ(cfg.task.dim, 3u);
    EXPECT_EQ(cfg.task.way, 2u);
    EXPECT_EQ(cfg.task.shot, 4u);
    EXPECT_EQ(cfg.task.query, 6u);
    EXPECT_EQ(cfg.task.separation, 2.5);
    EXPECT_EQ(cfg.task.noise, 0.5);
    EXPECT_EQ(cfg.hidden, (std::vector<std::size_t>{10, 12}));
    EXPECT_EQ(cfg.method, MetaMethod::FoMaml);
    EXPECT_EQ(cfg.alpha, 0.01);
    EXPECT_EQ(cfg.beta(), 0.2);
    EXPECT_EQ(cfg.betas.at(MetaMethod::SignMaml), 0.0065);
    EXPECT_EQ(cfg.m_train, 2u);
    EXPECT_EQ(cfg.m_test, 4u);
    EXPECT_EQ(cfg.meta_batch, 8u);
    EXPECT_EQ(cfg.iterations, 7u);
    EXPECT_EQ(cfg.val_interval, 3u);
    EXPECT_EQ(cfg.val_tasks, 9u);
    EXPECT_EQ(cfg.test_tasks, 11u);
    EXPECT_EQ(cfg.timing_warmup, 1u);
    EXPECT_EQ(cfg.seed, 42u);
    EXPECT_EQ(cfg.workers, 2u);
    EXPECT_EQ(cfg.output_dir, "x");
}

TEST(Config, SinusoidFixesShapeAndMamlAliasSetsBothEngines) {
    const ExperimentConfig cfg = config_from_json(
        nlohmann::json::parse(R"({"task": {"kind": "sinusoid"}, "method": "maml", "betas": {"maml": 0.03}})"));
    EXPECT_EQ(cfg.task.kind, TaskKind::Sinusoid);
    EXPECT_EQ(cfg.task.dim, 1u);
    EXPECT_EQ(cfg.task.way, 1u);
    EXPECT_EQ(cfg.method, MetaMethod::MamlAutodiff);
    EXPECT_EQ(cfg.betas.at(MetaMethod::MamlAutodiff), 0.03);
    EXPECT_EQ(cfg.betas.at(MetaMethod::MamlProduct), 0.03);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
    EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"itertions": 5})")), ConfigError);
    EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"task": {"wya": 5}})")), ConfigError);
    EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"method": "reptile"})")), ConfigError);
    EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"alpha": "fast"})")), ConfigError);
    ExperimentConfig cfg;
    cfg.alpha = 0.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = {};
    cfg.set_beta(0.0);
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = {};
    cfg.test_tasks = 1;
    EXPECT_THROW(cfg.validate(), ConfigError);
    EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, JsonRoundTrip) {
    ExperimentConfig cfg = tiny();
    cfg.method = MetaMethod::FoMaml;
    cfg.set_beta(0.125);
    cfg.val_interval = 5;
    const nlohmann::json j = config_to_json(cfg);
    EXPECT_EQ(config_to_json(config_from_json(j)), j);
}

TEST(Config, ShippedConfigsLoad) {
    std::size_t count = 0;
    for (const auto& entry : fs::directory_iterator(METALEARN_CONFIG_DIR)) {
        if (entry.path().extension() != ".json") continue;
        ++count;
        EXPECT_NO_THROW(load_config(entry.path().string()).validate()) << entry.path();
    }
    EXPECT_GE(count, 4u);
}

TEST(Train, ZeroIterationsReturnsInitialization) {
    ExperimentConfig cfg = tiny();
    cfg.iterations = 0;
    const TrainResult r = train(cfg);
    EXPECT_TRUE(r.records.empty());
    EXPECT_TRUE(bitwise_equal(r.params, init_params(cfg.model(), cfg.seed)));
}

TEST(Train, SameSeedGivesBitwiseIdenticalLosses) {
    for (MetaMethod method : {MetaMethod::SignMaml, MetaMethod::FoMaml, MetaMethod::MamlAutodiff}) {
        ExperimentConfig cfg = tiny();
        cfg.method = method;
        const TrainResult a = train(cfg);
        cfg.workers = 3;
        const TrainResult b = train(cfg);
        ASSERT_EQ(a.records.size(), b.records.size());
        for (std::size_t i = 0; i < a.records.size(); ++i) {
            EXPECT_EQ(std::bit_cast<std::uint64_t>(a.records[i].loss), std::bit_cast<std::uint64_t>(b.records[i].loss));
        }
        EXPECT_TRUE(bitwise_equal(a.params, b.params)) << method_name(method);
    }
}

TEST(Train, DifferentSeedsDiffer) {
    ExperimentConfig cfg = tiny();
    const TrainResult a = train(cfg);
    cfg.seed += 1;
    EXPECT_NE(a.records[0].loss, train(cfg).records[0].loss);
}

TEST(Train, RecordsAreOrderedAndTimed) {
    ExperimentConfig cfg = tiny();
    cfg.val_interval = 7;
    std::vector<RunRecord> streamed;
    const TrainResult r = train(cfg, [&](const RunRecord& rec) { streamed.push_back(rec); });
    ASSERT_EQ(r.records.size(), cfg.iterations);
    ASSERT_EQ(streamed.size(), cfg.iterations);
    for (std::size_t i = 0; i < r.records.size(); ++i) {
        EXPECT_EQ(r.records[i].iteration, i);
        EXPECT_GT(r.records[i].seconds, 0.0);
        EXPECT_TRUE(std::isfinite(r.records[i].loss));
        EXPECT_EQ(r.records[i].val_metric.has_value(), (i + 1) % 7 == 0) << i;
        EXPECT_EQ(streamed[i].loss, r.records[i].loss);
    }
}

TEST(Train, SinusoidSignMamlLossDecreases) {
    // One episode's loss swings with the sampled amplitudes (seed 5 starts at
    // 1.7 against a typical 4.2), so compare 200-iteration window means.
    ExperimentConfig cfg = tiny_sinusoid();
    cfg.iterations = 2000;
    const TrainResult r = train(cfg);
    std::vector<double> head, tail;
    for (std::size_t i = 0; i < 200; ++i) {
        head.push_back(r.records[i].loss);
        tail.push_back(r.records[r.records.size() - 200 + i].loss);
    }
    EXPECT_LT(sample_mean(tail), sample_mean(head));
    // Same comparison on fixed tasks, free of episode noise.
    const ParamVector init = init_params(cfg.model(), cfg.seed);
    EXPECT_LT(evaluate(r.params, cfg).mean, evaluate(init, cfg).mean);
}

TEST(Train, DivergenceReportsIterationAndKeepsRecords) {
    ExperimentConfig cfg = tiny_sinusoid();
    cfg.alpha = 1e150;  // the first meta step throws the weights out of range
    cfg.iterations = 5;
    try {
        train(cfg);
        FAIL() << "expected divergence";
    } catch (const TrainingDivergenceError& e) {
        EXPECT_EQ(e.iteration(), 1u);
        ASSERT_EQ(e.records().size(), 1u);
        EXPECT_TRUE(std::isfinite(e.records()[0].loss));
        EXPECT_NE(std::string(e.what()).find("meta-iteration 1"), std::string::npos);
    }
}

TEST(Evaluate, UntrainedWithoutAdaptationIsAtChance) {
    for (std::size_t way : {2, 5}) {
        ExperimentConfig cfg = tiny();
        cfg.task.way = way;
        cfg.m_test = 0;
        cfg.test_tasks = 1000;
        const EvalResult r = evaluate(init_params(cfg.model(), cfg.seed), cfg);
        EXPECT_EQ(r.metric, "accuracy");
        ASSERT_EQ(r.scores.size(), 1000u);
        const double se = sample_std(r.scores) / std::sqrt(1000.0);
        EXPECT_LT(std::abs(r.mean - 1.0 / static_cast<double>(way)), 3 * se) << way;
    }
}

TEST(Evaluate, CiIsRecomputableFromTaskCsv) {
    ExperimentConfig cfg = tiny();
    cfg.test_tasks = 1000;
    cfg.m_test = 2;
    const EvalResult r = evaluate(init_params(cfg.model(), cfg.seed), cfg);
    std::istringstream csv(render([&](auto& s) { write_tasks_csv(s, r); }));
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line, "task,accuracy");
    std::vector<double> scores;
    while (std::getline(csv, line)) scores.push_back(std::stod(line.substr(line.find(',') + 1)));
    ASSERT_EQ(scores.size(), 1000u);
    double mean = 0.0;
    for (double s : scores) mean += s;
    mean /= 1000.0;
    double ss = 0.0;
    for (double s : scores) ss += (s - mean) * (s - mean);
    const double ci = 1.96 * std::sqrt(ss / 999.0) / std::sqrt(1000.0);
    EXPECT_NEAR(r.ci95, ci, 1e-15);
    EXPECT_NEAR(r.mean, mean, 1e-15);
}

TEST(Evaluate, DeterministicAndRegressionUsesMse) {
    const ExperimentConfig cfg = tiny_sinusoid();
    const ParamVector x = init_params(cfg.model(), cfg.seed);
    const EvalResult a = evaluate(x, cfg);
    const EvalResult b = evaluate(x, cfg);
    EXPECT_EQ(a.metric, "mse");
    EXPECT_EQ(a.scores, b.scores);
    EXPECT_EQ(selection_score(a), -a.mean);
    for (double s : a.scores) EXPECT_GE(s, 0.0);
}

TEST(Evaluate, TestAndValidationTasksDiffer) {
    const ExperimentConfig cfg = tiny();
    const ParamVector x = init_params(cfg.model(), cfg.seed);
    EXPECT_NE(score_tasks(x, cfg, StreamPurpose::Test, 20, 1).scores,
              score_tasks(x, cfg, StreamPurpose::Validation, 20, 1).scores);
}

TEST(Evaluate, RejectsParametersOfAnotherModel) {
    const ExperimentConfig cfg = tiny();
    ExperimentConfig other = cfg;
    other.hidden = {8};
    EXPECT_THROW(evaluate(init_params(other.model(), 0), cfg), DimensionError);
}

TEST(Statistics, KnownValues) {
    const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
    EXPECT_DOUBLE_EQ(sample_mean(v), 5.0);
    EXPECT_DOUBLE_EQ(sample_std(v), std::sqrt(32.0 / 7.0));
    EXPECT_DOUBLE_EQ(ci95_half_width(v), 1.96 * std::sqrt(32.0 / 7.0) / std::sqrt(8.0));
    EXPECT_EQ(sample_std({3.0}), 0.0);
}

TEST(Statistics, TimingSkipsWarmup) {
    std::vector<RunRecord> records;
    for (std::size_t i = 0; i < 12; ++i) records.push_back({i, 0.0, i < 10 ? 100.0 : 1.0 + i % 2, std::nullopt});
    const TimingStats t = timing_stats(records, 10);
    EXPECT_EQ(t.samples, 2u);
    EXPECT_DOUBLE_EQ(t.mean, 1.5);
    EXPECT_DOUBLE_EQ(t.std, std::sqrt(0.5));
    // Too few records to drop the warmup: all of them count.
    EXPECT_EQ(timing_stats({records.begin(), records.begin() + 5}, 10).samples, 5u);
}

TEST(GridSearch, InteriorPeakNeedsNoExtension) {
    const auto r = grid_search_beta({0.1, 0.2, 0.3, 0.4}, [](double b) { return -(b - 0.2) * (b - 0.2); });
    EXPECT_EQ(r.best_beta, 0.2);
    EXPECT_EQ(r.extensions, 0u);
    EXPECT_FALSE(r.boundary_warning);
    EXPECT_EQ(r.log.size(), 4u);
}

TEST(GridSearch, ExtendsUpwardAtTerminalSpacing) {
    const auto r = grid_search_beta(default_beta_candidates(MetaMethod::FoMaml),
                                    [](double b) { return -(b - 0.19) * (b - 0.19); });
    EXPECT_EQ(r.best_beta, 0.18);
    EXPECT_EQ(r.extensions, 1u);
    ASSERT_EQ(r.log.size(), 8u);
    EXPECT_EQ(r.log[6].beta, 0.18);
    EXPECT_EQ(r.log[7].beta, 0.2);
    EXPECT_EQ(r.log[7].round, 1u);
    EXPECT_FALSE(r.boundary_warning);
}

TEST(GridSearch, ExtendsDownwardAndStopsAtZero) {
    const auto r = grid_search_beta(default_beta_candidates(MetaMethod::SignMaml), [](double b) { return -b; });
    // 0.0035 - 0.0015 = 0.002, then 0.0005; nothing positive remains after that.
    EXPECT_EQ(r.best_beta, 0.0005);
    EXPECT_EQ(r.extensions, 1u);
    EXPECT_TRUE(r.boundary_warning);
}

TEST(GridSearch, CapsExtensionsAndWarns) {
    const auto r = grid_search_beta({1.0, 2.0}, [](double b) { return b; }, 5);
    EXPECT_EQ(r.extensions, 5u);
    EXPECT_TRUE(r.boundary_warning);
    EXPECT_EQ(r.best_beta, 12.0);
    EXPECT_EQ(r.log.size(), 12u);
}

TEST(GridSearch, TiesGoToSmallerRateAndBadGridsAreRejected) {
    EXPECT_EQ(grid_search_beta({1.0, 2.0, 3.0, 4.0}, [](double b) { return b == 2.0 || b == 3.0 ? 1.0 : 0.0; })
                  .best_beta,
              2.0);
    EXPECT_THROW(grid_search_beta({1.0}, [](double) { return 0.0; }), ConfigError);
    EXPECT_THROW(grid_search_beta({2.0, 1.0}, [](double) { return 0.0; }), ConfigError);
    EXPECT_THROW(grid_search_beta({0.0, 1.0}, [](double) { return 0.0; }), ConfigError);
}

// Small seeded grid search per method, pinned in a fixture. Set
// METALEARN_REGENERATE_FIXTURES=1 to rewrite it.
TEST(GridSearch, SeededRunsMatchPinnedChoices) {
    const std::string path = std::string(METALEARN_FIXTURE_DIR) + "/grid_search_betas.txt";
    ExperimentConfig cfg = tiny();
    cfg.iterations = 100;
    cfg.val_tasks = 100;
    cfg.m_test = 3;
    std::ostringstream chosen;
    for (MetaMethod method : {MetaMethod::SignMaml, MetaMethod::FoMaml, MetaMethod::MamlAutodiff}) {
        cfg.method = method;
        const auto r = grid_search_beta(default_beta_candidates(method),
                                        [&](double beta) { return train_and_validate(cfg, beta); });
        chosen << method_name(method) << ' ' << format_double(r.best_beta) << ' ' << r.extensions << "\n";
    }
    if (std::getenv("METALEARN_REGENERATE_FIXTURES")) {
        std::ofstream(path) << chosen.str();
        GTEST_SKIP() << "regenerated " << path;
    }
    std::ifstream in(path);
    ASSERT_TRUE(in) << path;
    std::stringstream pinned;
    pinned << in.rdbuf();
    EXPECT_EQ(chosen.str(), pinned.str());
}

TEST(Sweep, SingleValueMatchesOneRun) {
    const ExperimentConfig cfg = tiny();
    const auto rows = sweep(cfg, SweepAxis::Shot, {cfg.task.shot}, {cfg.method});
    ASSERT_EQ(rows.size(), 1u);
    const ResultRow direct = run_cell(cfg);
    EXPECT_EQ(rows[0].accuracy, direct.accuracy);
    EXPECT_EQ(rows[0].ci95, direct.ci95);
    EXPECT_EQ(rows[0].shot, cfg.task.shot);
    EXPECT_TRUE(rows[0].error.empty());
    EXPECT_FALSE(rows[0].delta_sign_minus_fo);
}

TEST(Sweep, SetsAxisAndComputesDelta) {
    ExperimentConfig cfg = tiny();
    std::vector<ExperimentConfig> seen;
    const auto fake = [&](const ExperimentConfig& cell) {
        seen.push_back(cell);
        ResultRow r = result_row(cell, {"accuracy", {}, cell.method == MetaMethod::SignMaml ? 0.75 : 0.5, 0.01}, {});
        return r;
    };
    const auto rows = sweep(cfg, SweepAxis::Steps, {1, 3}, {MetaMethod::SignMaml, MetaMethod::FoMaml}, fake);
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_EQ(seen[2].m_train, 3u);
    EXPECT_EQ(seen[3].method, MetaMethod::FoMaml);
    for (const auto& r : rows) EXPECT_EQ(r.delta_sign_minus_fo, 0.25);
    EXPECT_EQ(sweep(cfg, SweepAxis::Way, {7}, {MetaMethod::SignMaml}, fake)[0].way, 7u);
}

TEST(Sweep, FailedCellIsRecordedAndSweepContinues) {
    const ExperimentConfig cfg = tiny();
    const auto flaky = [&](const ExperimentConfig& cell) -> ResultRow {
        if (cell.task.way == 4) throw DataError("cell exploded");
        return result_row(cell, {"accuracy", {}, 0.5, 0.1}, {});
    };
    const auto rows = sweep(cfg, SweepAxis::Way, {2, 4, 6}, {MetaMethod::SignMaml, MetaMethod::FoMaml}, flaky);
    ASSERT_EQ(rows.size(), 6u);
    EXPECT_EQ(rows[2].way, 4u);
    EXPECT_FALSE(rows[2].accuracy);
    EXPECT_EQ(rows[2].error, "cell exploded");
    EXPECT_FALSE(rows[2].delta_sign_minus_fo);
    EXPECT_EQ(rows[4].way, 6u);
    EXPECT_EQ(rows[4].accuracy, 0.5);
    EXPECT_EQ(rows[4].delta_sign_minus_fo, 0.0);
}

TEST(Sweep, Errors) {
    EXPECT_THROW(sweep(tiny(), SweepAxis::Shot, {}, {MetaMethod::SignMaml}), ConfigError);
    EXPECT_THROW(sweep(tiny_sinusoid(), SweepAxis::Way, {2}, {MetaMethod::SignMaml}), ConfigError);
    EXPECT_EQ(parse_sweep_axis("K"), SweepAxis::Shot);
    EXPECT_EQ(parse_sweep_axis("steps"), SweepAxis::Steps);
    EXPECT_THROW(parse_sweep_axis("depth"), ConfigError);
}

TEST(Timing, ComparisonSharesEpisodesAcrossMethods) {
    ExperimentConfig cfg = tiny();
    cfg.iterations = 4;
    const TimingComparison cmp = compare_timing(cfg, {MetaMethod::SignMaml, MetaMethod::FoMaml});
    ASSERT_EQ(cmp.records.size(), 2u);
    cfg.method = MetaMethod::FoMaml;
    const TrainResult fo = train(cfg);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(cmp.records[1][i].loss, fo.records[i].loss);
        EXPECT_GT(cmp.records[0][i].seconds, 0.0);
    }
}

TEST(Report, ResultsCsvFormat) {
    ResultRow r;
    r.method = "sign-maml";
    r.way = 5;
    r.shot = 1;
    r.m_train = 1;
    r.m_test = 10;
    r.beta = 0.0065;
    r.accuracy = 0.5;
    r.ci95 = 0.25;
    r.time_mean_s = 0.125;
    r.time_std_s = 0.0;
    r.seed = 9;
    EXPECT_EQ(render([&](auto& s) { write_results_csv(s, {r}); }),
              "method,N,K,m_train,m_test,beta,accuracy,ci95,time_mean_s,time_std_s,seed\n"
              "sign-maml,5,1,1,10,0.0064999999999999997,0.5,0.25,0.125,0,9\n");
    r.accuracy.reset();
    r.error = "bad \"cell\"";
    EXPECT_EQ(render([&](auto& s) { write_results_csv(s, {r}, true); }),
              "method,N,K,m_train,m_test,beta,accuracy,ci95,time_mean_s,time_std_s,seed,delta_sign_minus_fo,error\n"
              "sign-maml,5,1,1,10,0.0064999999999999997,,0.25,0.125,0,9,,\"bad \"\"cell\"\"\"\n");
}

TEST(Report, LossCsvAndDoublesRoundTrip) {
    EXPECT_EQ(render([](auto& s) { write_loss_csv(s, {{0, 0.1, 2.0, std::nullopt}, {1, 1.0 / 3.0, 0.5, 0.75}}); }),
              "iteration,loss,seconds,val_metric\n0,0.10000000000000001,2,\n1,0.33333333333333331,0.5,0.75\n");
    for (double v : {1.0 / 3.0, 1e-300, 6.02e23, -0.1}) EXPECT_EQ(std::stod(format_double(v)), v);
}

TEST(Report, SummaryJson) {
    const ExperimentConfig cfg = tiny();
    const auto j = summary_json(cfg, {"accuracy", {1.0, 0.0}, 0.5, 0.7}, {0.2, 0.1, 3}, 20);
    EXPECT_EQ(j.at("method"), "sign-maml");
    EXPECT_EQ(j.at("mean"), 0.5);
    EXPECT_EQ(j.at("ci95"), 0.7);
    EXPECT_EQ(j.at("time_mean_s"), 0.2);
    EXPECT_EQ(j.at("tasks"), 2);
    EXPECT_EQ(config_from_json(j.at("config")).seed, cfg.seed);
}

TEST(Checkpoint, RoundTripIsBitwise) {
    const ExperimentConfig cfg = tiny();
    const ParamVector x = train(cfg).params;
    const std::string path = scratch("round_trip.bin").string();
    save_checkpoint(path, cfg.model(), x);
    EXPECT_TRUE(bitwise_equal(load_checkpoint(path, cfg.model()), x));

    std::ifstream in(path, std::ios::binary);
    char magic[4];
    in.read(magic, 4);
    EXPECT_EQ(std::string(magic, 4), "MLCK");
    EXPECT_EQ(fs::file_size(path), 4 + 4 + 4 * cfg.model().widths.size() + 8 + 8 * x.size());
}

TEST(Checkpoint, Errors) {
    const ExperimentConfig cfg = tiny();
    const ParamVector x = init_params(cfg.model(), 0);
    const std::string path = scratch("errors.bin").string();
    save_checkpoint(path, cfg.model(), x);
    ExperimentConfig other = cfg;
    other.hidden = {17};
    EXPECT_THROW(load_checkpoint(path, other.model()), DataError);
    EXPECT_THROW(save_checkpoint(path, other.model(), x), DimensionError);
    EXPECT_THROW(load_checkpoint(scratch("missing.bin").string(), cfg.model()), DataError);

    fs::resize_file(path, fs::file_size(path) - 3);
    EXPECT_THROW(load_checkpoint(path, cfg.model()), DataError);
    std::ofstream(path, std::ios::binary) << "JUNKJUNKJUNK";
    EXPECT_THROW(load_checkpoint(path, cfg.model()), DataError);
}
