// SPDX-License-Identifier: Apache-2.0
// metalearn: train, evaluate, tune and verify MAML-family meta-learners.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "metalearn/errors.hpp"
#include "metalearn/harness/config.hpp"
#include "metalearn/harness/experiment.hpp"
#include "metalearn/harness/report.hpp"
#include "metalearn/oracle/verification.hpp"

namespace fs = std::filesystem;
using namespace metalearn;
using namespace metalearn::harness;

namespace {

// Flags that override config-file values when given.
struct Overrides {
    std::string config_path;
    std::optional<std::string> output_dir, method, task;
    std::optional<double> alpha, beta, separation, noise;
    std::optional<std::size_t> m_train, m_test, meta_batch, iterations, val_interval, val_tasks, test_tasks, workers,
        way, shot, query, dim, timing_warmup;
    std::optional<std::uint64_t> seed;
    std::vector<std::size_t> hidden;

    void add_to(CLI::App* app) {
        app->add_option("-c,--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);
        app->add_option("-o,--out", output_dir, "Output directory");
        app->add_option("--method", method, "sign-maml, fo-maml, maml (maml-autodiff) or maml-product");
        app->add_option("--alpha", alpha, "Upper-level learning rate");
        app->add_option("--beta", beta, "Inner learning rate for the chosen method");
        app->add_option("--m-train", m_train, "Inner steps during meta-training");
        app->add_option("--m-test", m_test, "Inner steps at evaluation");
        app->add_option("--meta-batch", meta_batch, "Tasks per meta-iteration (P)");
        app->add_option("--iterations", iterations, "Meta-iterations");
        app->add_option("--val-interval", val_interval, "Validate every this many iterations (0: never)");
        app->add_option("--val-tasks", val_tasks, "Validation tasks");
        app->add_option("--test-tasks", test_tasks, "Test tasks");
        app->add_option("--timing-warmup", timing_warmup, "Iterations left out of timing statistics");
        app->add_option("--workers", workers, "Concurrent tasks per meta-iteration");
        app->add_option("--seed", seed, "Experiment seed");
        app->add_option("--task", task, "blobs or sinusoid");
        app->add_option("--way", way, "Classes per task (N)");
        app->add_option("--shot", shot, "Support examples per class (K)");
        app->add_option("--query", query, "Query examples per class (Q)");
        app->add_option("--dim", dim, "Blob input dimension");
        app->add_option("--separation", separation, "Blob mean range");
        app->add_option("--noise", noise, "Blob noise scale");
        app->add_option("--hidden", hidden, "Hidden layer widths");
    }

    ExperimentConfig resolve() const {
        ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
        if (task) {
            cfg.task.kind = parse_task_kind(*task);
            if (cfg.task.kind == TaskKind::Sinusoid) {
                cfg.task.dim = 1;
                cfg.task.way = 1;
            }
        }
        if (output_dir) cfg.output_dir = *output_dir;
        if (method) cfg.method = parse_method(*method);
        if (alpha) cfg.alpha = *alpha;
        if (beta) {
            cfg.set_beta(*beta);
            if (cfg.method == MetaMethod::MamlAutodiff) cfg.betas[MetaMethod::MamlProduct] = *beta;
        }
        if (m_train) cfg.m_train = *m_train;
        if (m_test) cfg.m_test = *m_test;
        if (meta_batch) cfg.meta_batch = *meta_batch;
        if (iterations) cfg.iterations = *iterations;
        if (val_interval) cfg.val_interval = *val_interval;
        if (val_tasks) cfg.val_tasks = *val_tasks;
        if (test_tasks) cfg.test_tasks = *test_tasks;
        if (timing_warmup) cfg.timing_warmup = *timing_warmup;
        if (workers) cfg.workers = *workers;
        if (seed) cfg.seed = *seed;
        if (way) cfg.task.way = *way;
        if (shot) cfg.task.shot = *shot;
        if (query) cfg.task.query = *query;
        if (dim) cfg.task.dim = *dim;
        if (separation) cfg.task.separation = *separation;
        if (noise) cfg.task.noise = *noise;
        if (!hidden.empty()) cfg.hidden = hidden;
        cfg.validate();
        return cfg;
    }
};

std::string out_path(const ExperimentConfig& cfg, const std::string& name) {
    return (fs::path(cfg.output_dir) / name).string();
}

std::string to_string(const std::function<void(std::ostream&)>& write) {
    std::ostringstream s;
    write(s);
    return s.str();
}

void print_result(const ResultRow& row, const EvalResult& eval) {
    std::cout << row.method << ": " << eval.metric << " " << format_double(eval.mean) << " +/- "
              << format_double(eval.ci95) << " over " << eval.scores.size() << " tasks";
    if (row.time_mean_s) {
        std::cout << "; " << format_double(*row.time_mean_s) << " +/- " << format_double(*row.time_std_s)
                  << " s per meta-iteration";
    }
    std::cout << "\n";
}

int run_train(const Overrides& o, bool skip_eval) {
    const ExperimentConfig cfg = o.resolve();
    fs::create_directories(cfg.output_dir);
    write_text_file(out_path(cfg, "config.json"), config_to_json(cfg).dump(2) + "\n");

    std::ofstream loss(out_path(cfg, "loss.csv"));
    write_loss_header(loss);
    TrainResult trained;
    try {
        trained = train(cfg, [&](const RunRecord& r) {
            write_loss_row(loss, r);
            loss.flush();
        });
    } catch (const TrainingDivergenceError& e) {
        std::cerr << "error: " << e.what() << " (" << e.records().size() << " iterations written to loss.csv)\n";
        return 3;
    }
    const MlpSpec spec = cfg.model();
    save_checkpoint(out_path(cfg, "checkpoint.bin"), spec, trained.params);
    if (skip_eval) return 0;

    const EvalResult eval = evaluate(trained.params, cfg);
    const TimingStats timing = timing_stats(trained.records, cfg.timing_warmup);
    const ResultRow row = result_row(cfg, eval, timing);
    write_text_file(out_path(cfg, "results.csv"), to_string([&](auto& s) { write_results_csv(s, {row}); }));
    write_text_file(out_path(cfg, "tasks.csv"), to_string([&](auto& s) { write_tasks_csv(s, eval); }));
    write_text_file(out_path(cfg, "summary.json"),
                    summary_json(cfg, eval, timing, trained.records.size()).dump(2) + "\n");
    print_result(row, eval);
    return 0;
}

int run_eval(const Overrides& o, const std::string& checkpoint, bool untrained) {
    const ExperimentConfig cfg = o.resolve();
    const MlpSpec spec = cfg.model();
    const ParamVector params = untrained ? init_params(spec, cfg.seed)
                                         : load_checkpoint(checkpoint.empty() ? out_path(cfg, "checkpoint.bin")
                                                                              : checkpoint,
                                                           spec);
    const EvalResult eval = evaluate(params, cfg);
    ResultRow row = result_row(cfg, eval, {});
    row.time_mean_s.reset();
    row.time_std_s.reset();
    write_text_file(out_path(cfg, "eval_results.csv"), to_string([&](auto& s) { write_results_csv(s, {row}); }));
    write_text_file(out_path(cfg, "eval_tasks.csv"), to_string([&](auto& s) { write_tasks_csv(s, eval); }));
    write_text_file(out_path(cfg, "eval_summary.json"), summary_json(cfg, eval, {}, 0).dump(2) + "\n");
    print_result(row, eval);
    return 0;
}

int run_grid_search(const Overrides& o, std::vector<double> candidates, std::size_t max_extensions) {
    const ExperimentConfig cfg = o.resolve();
    if (candidates.empty()) {
        candidates = default_beta_candidates(cfg.method);
    }
    const GridSearchResult result = grid_search_beta(
        candidates,
        [&](double beta) {
            const double score = train_and_validate(cfg, beta);
            std::cout << "beta " << format_double(beta) << ": score " << format_double(score) << std::endl;
            return score;
        },
        max_extensions);
    write_text_file(out_path(cfg, "grid_search.json"), grid_search_json(cfg, result).dump(2) + "\n");
    std::cout << "best beta " << format_double(result.best_beta) << " (score " << format_double(result.best_score)
              << ", " << result.extensions << " extensions)\n";
    if (result.boundary_warning) {
        std::cerr << "warning: best beta is still at the edge of the searched range\n";
    }
    return 0;
}

int run_sweep(const Overrides& o, const std::string& axis, const std::vector<std::size_t>& values,
              const std::vector<std::string>& method_names) {
    const ExperimentConfig cfg = o.resolve();
    std::vector<MetaMethod> methods;
    for (const auto& n : method_names) methods.push_back(parse_method(n));
    const auto rows = sweep(cfg, parse_sweep_axis(axis), values, methods, [](const ExperimentConfig& cell) {
        const ResultRow row = run_cell(cell);
        std::cout << row.method << " N=" << row.way << " K=" << row.shot << " m=" << row.m_train << ": "
                  << format_double(*row.accuracy) << std::endl;
        return row;
    });
    write_text_file(out_path(cfg, "sweep.csv"), to_string([&](auto& s) { write_results_csv(s, rows, true); }));
    std::size_t failed = 0;
    for (const auto& r : rows)
        if (!r.error.empty()) {
            ++failed;
            std::cerr << "cell " << r.method << " N=" << r.way << " K=" << r.shot << " m=" << r.m_train
                      << " failed: " << r.error << "\n";
        }
    std::cout << rows.size() - failed << "/" << rows.size() << " cells written to " << out_path(cfg, "sweep.csv")
              << "\n";
    return failed == 0 ? 0 : 4;
}

int run_timing(const Overrides& o, const std::vector<std::string>& method_names) {
    const ExperimentConfig cfg = o.resolve();
    std::vector<MetaMethod> methods;
    for (const auto& n : method_names) methods.push_back(parse_method(n));
    const TimingComparison cmp = compare_timing(cfg, methods);
    std::vector<ResultRow> rows;
    std::ofstream raw(out_path(cfg, "timing_iterations.csv"));
    raw << "method,iteration,seconds\n";
    for (std::size_t i = 0; i < methods.size(); ++i) {
        ExperimentConfig c = cfg;
        c.method = methods[i];
        const TimingStats t = timing_stats(cmp.records[i], cfg.timing_warmup);
        ResultRow row = result_row(c, {}, t);
        row.accuracy.reset();
        row.ci95.reset();
        rows.push_back(row);
        for (const RunRecord& r : cmp.records[i])
            raw << row.method << ',' << r.iteration << ',' << format_double(r.seconds) << "\n";
        std::cout << row.method << ": " << format_double(t.mean) << " +/- " << format_double(t.std)
                  << " s per meta-iteration over " << t.samples << " iterations\n";
    }
    write_text_file(out_path(cfg, "timing.csv"), to_string([&](auto& s) { write_results_csv(s, rows); }));
    return 0;
}

int run_verify(const oracle::VerifyOptions& opts, const std::string& report_path) {
    const oracle::VerificationReport report = oracle::run_verification(opts);
    const std::string text = report.to_text();
    std::cout << text;
    if (!report_path.empty()) write_text_file(report_path, text);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MAML, FO-MAML and Sign-MAML meta-learning on synthetic few-shot tasks"};
    app.require_subcommand(1);

    Overrides train_o, eval_o, grid_o, sweep_o;

    auto* train_cmd = app.add_subcommand("train", "Meta-train, then evaluate on the test tasks");
    train_o.add_to(train_cmd);
    bool skip_eval = false;
    train_cmd->add_flag("--no-eval", skip_eval, "Stop after writing the checkpoint");

    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on the test tasks");
    eval_o.add_to(eval_cmd);
    std::string checkpoint;
    bool untrained = false;
    eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file (default <out>/checkpoint.bin)");
    eval_cmd->add_flag("--untrained", untrained, "Evaluate the initialization instead of a checkpoint");

    auto* grid_cmd = app.add_subcommand("grid-search", "Choose the inner learning rate on validation tasks");
    grid_o.add_to(grid_cmd);
    std::vector<double> candidates;
    std::size_t max_extensions = 5;
    grid_cmd->add_option("--candidates", candidates, "Ascending starting grid");
    grid_cmd->add_option("--max-extensions", max_extensions, "Cap on boundary extensions");

    auto* sweep_cmd = app.add_subcommand("sweep", "Train and evaluate over way, shot or inner steps");
    sweep_o.add_to(sweep_cmd);
    std::string axis;
    std::vector<std::size_t> values;
    std::vector<std::string> methods{"sign-maml", "fo-maml", "maml"};
    sweep_cmd->add_option("--axis", axis, "way, shot or steps")->required();
    sweep_cmd->add_option("--values", values, "Axis values")->required();
    sweep_cmd->add_option("--methods", methods, "Methods per value");

    auto* timing_cmd = app.add_subcommand("timing", "Compare per-iteration time of methods on shared episodes");
    Overrides timing_o;
    timing_o.add_to(timing_cmd);
    std::vector<std::string> timing_methods{"sign-maml", "fo-maml", "maml"};
    timing_cmd->add_option("--methods", timing_methods, "Methods to interleave");

    auto* verify_cmd = app.add_subcommand("verify", "Run the gradient oracles and print a key=value report");
    oracle::VerifyOptions vopts;
    std::string report_path;
    verify_cmd->add_option("--seed", vopts.seed, "Instance seed");
    verify_cmd->add_option("--collapse", vopts.collapse_instances, "Collapse-identity instances");
    verify_cmd->add_option("--equivalence", vopts.equivalence_instances, "Engine-equivalence instances");
    verify_cmd->add_option("--fd", vopts.fd_instances, "Finite-difference instances");
    verify_cmd->add_option("--quadratic", vopts.quadratic_instances, "Closed-form instances");
    verify_cmd->add_option("--degeneracy", vopts.degeneracy_instances, "Degenerate-case instances");
    verify_cmd->add_option("--fd-epsilon", vopts.fd_epsilon, "Finite-difference step");
    verify_cmd->add_option("--report", report_path, "Also write the report to this file");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train_cmd) return run_train(train_o, skip_eval);
        if (*eval_cmd) return run_eval(eval_o, checkpoint, untrained);
        if (*grid_cmd) return run_grid_search(grid_o, candidates, max_extensions);
        if (*sweep_cmd) return run_sweep(sweep_o, axis, values, methods);
        if (*timing_cmd) {
            fs::create_directories(timing_o.resolve().output_dir);
            return run_timing(timing_o, timing_methods);
        }
        if (*verify_cmd) return run_verify(vopts, report_path);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
