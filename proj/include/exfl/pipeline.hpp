#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "exfl/config.hpp"
#include "exfl/dataset.hpp"
#include "exfl/error.hpp"
#include "exfl/exec.hpp"
#include "exfl/mlp.hpp"
#include "exfl/smib.hpp"
#include "exfl/stats.hpp"

namespace exfl::pipeline {

struct PipelineConfig {
  std::uint64_t seed = 7;

  smib::PlantParams plant;  // machine.*, exciter.*, network.* keys
  smib::OperatingPoint op;
  double t_end = 10.0;
  double dt_sample = 0.005;
  double h = 2e-4;
  std::vector<smib::Scenario> custom_scenarios;  // empty: the six default traces
  data::QrefPolicy qref_policy = data::QrefPolicy::ClampAndFlag;

  std::size_t stats_sample_n = 50;
  double alpha = 0.05;
  double vif_cap = 10.0;

  std::size_t mlp_rows = 0;  // 0: the whole pooled dataset
  double train_frac = 0.70;
  double val_frac = 0.15;
  double test_frac = 0.15;
  std::size_t h_min = 1;
  std::size_t h_max = 30;
  std::size_t restarts = 30;
  mlp::TrainConfig train;
  std::vector<std::string> ann_models{"MODEL_7", "MODEL_8"};

  std::string out_dir = "run";  // not part of the hash

  std::vector<smib::Scenario> scenarios() const;
  mlp::SweepConfig sweep_config() const;
  void validate() const;
  /// Canonical key=value dump of every setting except out_dir.
  std::string effective() const;
  std::uint64_t hash() const { return config::fnv1a(effective()); }
};

/// Overrides fields from parsed keys; unknown keys and bad values throw PARSE.
void apply(PipelineConfig& cfg, const config::KeyValues& kv);

struct AnalysisReport {
  std::vector<stats::CorrelationEntry> correlation;
  std::vector<stats::RegressionFit> fits;               // MODEL_1 .. MODEL_8
  std::vector<stats::AssessmentReport> assessments;     // one per fit
  std::vector<std::string> forward_candidates;          // features passing the correlation screen
  std::optional<stats::ForwardSelection> forward;
  std::string forward_error;
};

struct RunReport {
  std::uint64_t seed = 0;
  std::string config_hash;
  std::size_t pooled_rows = 0;
  std::size_t flagged_rows = 0;
  std::size_t sample_rows = 0;
  std::size_t train_rows = 0, val_rows = 0, test_rows = 0;
  AnalysisReport analysis;
  mlp::Comparison comparison;
};

// Individual stages; each is a pure function of its inputs and the config.
std::vector<smib::SimTrace> simulate(const PipelineConfig& cfg, Execution exec = Execution::Parallel);
data::Dataset pool(const PipelineConfig& cfg, const std::vector<smib::SimTrace>& traces);
data::Dataset draw_sample(const PipelineConfig& cfg, const data::Dataset& pooled);
AnalysisReport analyze(const PipelineConfig& cfg, const data::Dataset& sample);
mlp::Splits make_splits(const PipelineConfig& cfg, const data::Dataset& pooled);
std::vector<stats::ModelSpec> ann_model_specs(const PipelineConfig& cfg);
mlp::Comparison train_models(const PipelineConfig& cfg, const mlp::Splits& splits,
                             Execution exec = Execution::Parallel);

/// Runs a stage, re-raising failures with the stage name in the message.
template <typename F>
auto run_stage(const char* name, F&& f) -> decltype(f());

/// Files under the run directory; every CSV starts with `# config=<hex>`.
class OutputDir {
 public:
  OutputDir(std::filesystem::path dir, std::string config_hash);

  std::ofstream open_csv(const std::string& name) const;
  std::ofstream open_text(const std::string& name) const;
  std::filesystem::path path(const std::string& name) const { return dir_ / name; }
  /// Opens an existing input, naming it in the IO error when absent.
  std::ifstream open_input(const std::string& name) const;

 private:
  std::filesystem::path dir_;
  std::string hash_;
};

void write_scenarios(const OutputDir& out, const PipelineConfig& cfg, const std::vector<smib::SimTrace>& traces);
void write_traces(const OutputDir& out, const std::vector<smib::SimTrace>& traces);
void write_dataset(const OutputDir& out, const std::string& name, const data::Dataset& d);
void write_analysis(const OutputDir& out, const AnalysisReport& a);
void write_training(const OutputDir& out, const mlp::Comparison& c);
void write_report(const OutputDir& out, const RunReport& r);

/// Reads a comparison table written by write_training.
std::vector<mlp::ComparisonRow> read_comparison(std::istream& is);

/// Plain-text report with aligned columns. Timing is left out so the file is
/// reproducible; it lives in timing.csv.
void format_report(std::ostream& os, const RunReport& r);

/// Every stage in order with all artifacts persisted under cfg.out_dir.
RunReport run_pipeline(const PipelineConfig& cfg, Execution exec = Execution::Parallel,
                       std::ostream* log = nullptr);

// ---------------------------------------------------------------------------

template <typename F>
auto run_stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    std::string msg = e.what();
    const auto prefix = std::string(to_string(e.code())) + ": ";
    if (msg.rfind(prefix, 0) == 0) msg.erase(0, prefix.size());
    throw Error(e.code(), "stage '" + std::string(name) + "': " + msg);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::Io, "stage '" + std::string(name) + "': " + e.what());
  }
}

}  // namespace exfl::pipeline
