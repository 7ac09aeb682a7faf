// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metalearn/harness/config.hpp"
#include "metalearn/harness/experiment.hpp"
#include "metalearn/mlp.hpp"
#include "metalearn/param_vector.hpp"

// Output files. Numbers are written with 17 significant digits so every
// emitted value parses back to the same double.
namespace metalearn::harness {

/// method,N,K,m_train,m_test,beta,accuracy,ci95,time_mean_s,time_std_s,seed
/// plus delta_sign_minus_fo and error when `sweep_columns` is set.
void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows, bool sweep_columns = false);
/// iteration,loss,seconds,val_metric
void write_loss_header(std::ostream& out);
void write_loss_row(std::ostream& out, const RunRecord& r);
void write_loss_csv(std::ostream& out, const std::vector<RunRecord>& records);
/// task,<metric>
void write_tasks_csv(std::ostream& out, const EvalResult& eval);

nlohmann::json summary_json(const ExperimentConfig& cfg, const EvalResult& eval, const TimingStats& timing,
                            std::size_t iterations_run);
nlohmann::json grid_search_json(const ExperimentConfig& cfg, const GridSearchResult& result);

/// Little-endian: u32 magic "MLCK", u32 width count, u32 widths, u64 value
/// count, f64 values in mlp_layout order.
void save_checkpoint(const std::string& path, const MlpSpec& spec, const ParamVector& params);
ParamVector load_checkpoint(const std::string& path, const MlpSpec& expected);

std::string format_double(double v);

void write_text_file(const std::string& path, const std::string& text);

}  // namespace metalearn::harness
