// SPDX-License-Identifier: Apache-2.0
#include "metalearn/harness/report.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "metalearn/binary_io.hpp"
#include "metalearn/errors.hpp"

namespace metalearn::harness {

namespace {

constexpr std::uint32_t kCheckpointMagic = 0x4b434c4d;  // "MLCK" read little-endian

std::string cell(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

// Errors go in a quoted cell; embedded quotes are doubled.
std::string quoted(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += (c == '\n' ? ' ' : c);
    }
    return out + "\"";
}

}  // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows, bool sweep_columns) {
    out << "method,N,K,m_train,m_test,beta,accuracy,ci95,time_mean_s,time_std_s,seed";
    if (sweep_columns) out << ",delta_sign_minus_fo,error";
    out << "\n";
    for (const ResultRow& r : rows) {
        out << r.method << ',' << r.way << ',' << r.shot << ',' << r.m_train << ',' << r.m_test << ','
            << format_double(r.beta) << ',' << cell(r.accuracy) << ',' << cell(r.ci95) << ','
            << cell(r.time_mean_s) << ',' << cell(r.time_std_s) << ',' << r.seed;
        if (sweep_columns) out << ',' << cell(r.delta_sign_minus_fo) << ',' << (r.error.empty() ? "" : quoted(r.error));
        out << "\n";
    }
}

void write_loss_header(std::ostream& out) { out << "iteration,loss,seconds,val_metric\n"; }

void write_loss_row(std::ostream& out, const RunRecord& r) {
    out << r.iteration << ',' << format_double(r.loss) << ',' << format_double(r.seconds) << ','
        << cell(r.val_metric) << "\n";
}

void write_loss_csv(std::ostream& out, const std::vector<RunRecord>& records) {
    write_loss_header(out);
    for (const RunRecord& r : records) write_loss_row(out, r);
}

void write_tasks_csv(std::ostream& out, const EvalResult& eval) {
    out << "task," << eval.metric << "\n";
    for (std::size_t i = 0; i < eval.scores.size(); ++i) out << i << ',' << format_double(eval.scores[i]) << "\n";
}

nlohmann::json summary_json(const ExperimentConfig& cfg, const EvalResult& eval, const TimingStats& timing,
                            std::size_t iterations_run) {
    return {{"method", method_name(cfg.method)},
            {"beta", cfg.beta()},
            {"metric", eval.metric},
            {"mean", eval.mean},
            {"ci95", eval.ci95},
            {"tasks", eval.scores.size()},
            {"time_mean_s", timing.mean},
            {"time_std_s", timing.std},
            {"timed_iterations", timing.samples},
            {"iterations", iterations_run},
            {"config", config_to_json(cfg)}};
}

nlohmann::json grid_search_json(const ExperimentConfig& cfg, const GridSearchResult& result) {
    nlohmann::json log = nlohmann::json::array();
    for (const GridEntry& e : result.log) log.push_back({{"beta", e.beta}, {"score", e.score}, {"round", e.round}});
    return {{"method", method_name(cfg.method)},
            {"best_beta", result.best_beta},
            {"best_score", result.best_score},
            {"extensions", result.extensions},
            {"boundary_warning", result.boundary_warning},
            {"log", log},
            {"config", config_to_json(cfg)}};
}

void save_checkpoint(const std::string& path, const MlpSpec& spec, const ParamVector& params) {
    if (params.size() != spec.parameter_count()) throw DimensionError("checkpoint: parameters do not match model");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint " + path);
    binary::write_u32(out, kCheckpointMagic);
    binary::write_u32(out, static_cast<std::uint32_t>(spec.widths.size()));
    for (std::size_t w : spec.widths) binary::write_u32(out, static_cast<std::uint32_t>(w));
    binary::write_u64(out, params.size());
    binary::write_f64s(out, params.values());
    if (!out) throw DataError("failed writing checkpoint " + path);
}

ParamVector load_checkpoint(const std::string& path, const MlpSpec& expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path);
    if (binary::read_u32(in) != kCheckpointMagic) throw DataError(path + " is not a checkpoint");
    MlpSpec spec;
    spec.widths.resize(binary::read_u32(in));
    for (std::size_t& w : spec.widths) w = binary::read_u32(in);
    if (spec.widths != expected.widths) throw DataError("checkpoint " + path + " was saved for a different model");
    const std::uint64_t count = binary::read_u64(in);
    if (count != expected.parameter_count()) throw DataError("checkpoint " + path + " has the wrong value count");
    std::vector<double> values(count);
    for (double& v : values) v = binary::read_f64(in);
    return ParamVector(mlp_layout(spec), std::move(values));
}

void write_text_file(const std::string& path, const std::string& text) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << text;
}

}  // namespace metalearn::harness
