#include "exfl/cli.hpp"

#include <cstdlib>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "exfl/config.hpp"
#include "exfl/error.hpp"
#include "exfl/pipeline.hpp"

namespace exfl {

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Flags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string models;
  std::string hidden_range;
  std::optional<std::size_t> restarts;
  bool serial = false;
};

std::pair<std::size_t, std::size_t> parse_range(const std::string& text) {
  const auto dots = text.find("..");
  if (dots == std::string::npos) throw UsageError("--hidden-range expects a..b, got '" + text + "'");
  std::size_t a = 0, b = 0;
  try {
    std::size_t used = 0;
    a = std::stoul(text.substr(0, dots), &used);
    if (used != dots) throw std::invalid_argument("trailing");
    const auto rest = text.substr(dots + 2);
    b = std::stoul(rest, &used);
    if (used != rest.size()) throw std::invalid_argument("trailing");
  } catch (const std::logic_error&) {
    throw UsageError("--hidden-range expects a..b, got '" + text + "'");
  }
  if (b < a || a < 1) throw UsageError("--hidden-range " + text + ": empty range");
  return {a, b};
}

pipeline::PipelineConfig build_config(const Flags& f) {
  pipeline::PipelineConfig cfg;
  if (!f.config_path.empty()) pipeline::apply(cfg, config::parse_file(f.config_path));
  if (f.seed) cfg.seed = *f.seed;
  if (f.restarts) {
    if (*f.restarts < 1) throw UsageError("--restarts must be >= 1");
    cfg.restarts = *f.restarts;
  }
  if (!f.hidden_range.empty()) std::tie(cfg.h_min, cfg.h_max) = parse_range(f.hidden_range);
  if (!f.models.empty()) {
    cfg.ann_models.clear();
    std::string cur;
    for (char c : f.models + ",") {
      if (c == ',') {
        if (!cur.empty()) cfg.ann_models.push_back(cur);
        cur.clear();
      } else if (c != ' ') {
        cur += c;
      }
    }
    const auto paper = stats::enumerate_paper_models();
    for (const auto& m : cfg.ann_models) {
      bool known = false;
      for (const auto& p : paper) known = known || p.id == m;
      if (!known) throw UsageError("--models: unknown model '" + m + "'");
    }
    if (cfg.ann_models.size() < 2) throw UsageError("--models needs at least two model ids");
  }
  if (!f.out.empty()) {
    cfg.out_dir = f.out;
  } else if (const char* env = std::getenv("EXFL_OUT"); env && *env) {
    cfg.out_dir = env;
  }
  return cfg;
}

data::Dataset load_dataset(const pipeline::OutputDir& out, const std::string& name) {
  auto is = out.open_input(name);
  return data::read_csv(is);
}

std::size_t flagged(const data::Dataset& d) {
  std::size_t n = 0;
  for (const auto& r : d.rows) n += r.flagged ? 1 : 0;
  return n;
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Excitation-controller feature study: simulation, filter statistics and MLP comparison",
               "exfl"};
  Flags f;
  app.add_option("--config", f.config_path, "key=value configuration file");
  app.add_option("--seed", f.seed, "run seed (default 7)");
  app.add_option("--out", f.out, "run directory (default $EXFL_OUT, else ./run)");
  app.add_option("--models", f.models, "comma-separated ANN model ids, e.g. MODEL_7,MODEL_8");
  app.add_option("--hidden-range", f.hidden_range, "hidden sizes a..b for network growing");
  app.add_option("--restarts", f.restarts, "random restarts per hidden size");
  app.add_flag("--serial", f.serial, "run scenarios and sweep cells on one thread");
  app.require_subcommand(1, 1);
  auto* sim = app.add_subcommand("simulate", "simulate the scenario set; writes traces and the pooled dataset");
  auto* smp = app.add_subcommand("sample", "draw the statistics sample from dataset.csv");
  auto* ana = app.add_subcommand("analyze", "sample, correlation, regression, residuals, forward selection");
  auto* trn = app.add_subcommand("train", "network-growing sweep and ANN/regression comparison");
  auto* pip = app.add_subcommand("pipeline", "all stages in order, then report.txt");
  auto* rep = app.add_subcommand("report", "rebuild report.txt from dataset.csv and comparison.csv");
  for (auto* s : {sim, smp, ana, trn, pip, rep}) s->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\nrun with --help for the flag reference\n";
    return 1;
  }

  pipeline::PipelineConfig cfg;
  try {
    cfg = build_config(f);
    cfg.validate();
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    err << "usage error: " << e.what() << '\n';
    return 1;
  }

  const auto exec = f.serial ? Execution::Serial : Execution::Parallel;
  const pipeline::OutputDir dir(cfg.out_dir, config::hex(cfg.hash()));
  using pipeline::run_stage;
  try {
    if (sim->parsed()) {
      const auto traces = run_stage("simulate", [&] { return pipeline::simulate(cfg, exec); });
      run_stage("simulate", [&] {
        pipeline::write_scenarios(dir, cfg, traces);
        pipeline::write_traces(dir, traces);
      });
      const auto pooled = run_stage("dataset", [&] { return pipeline::pool(cfg, traces); });
      run_stage("dataset", [&] { pipeline::write_dataset(dir, "dataset.csv", pooled); });
      out << traces.size() << " traces, " << pooled.size() << " rows -> " << dir.path("dataset.csv").string()
          << '\n';
    } else if (smp->parsed()) {
      const auto pooled = run_stage("dataset", [&] { return load_dataset(dir, "dataset.csv"); });
      const auto sample = run_stage("dataset", [&] { return pipeline::draw_sample(cfg, pooled); });
      run_stage("dataset", [&] { pipeline::write_dataset(dir, "sample.csv", sample); });
      out << sample.size() << " rows -> " << dir.path("sample.csv").string() << '\n';
    } else if (ana->parsed()) {
      const auto pooled = run_stage("analyze", [&] { return load_dataset(dir, "dataset.csv"); });
      const auto sample = run_stage("dataset", [&] { return pipeline::draw_sample(cfg, pooled); });
      const auto a = run_stage("analyze", [&] { return pipeline::analyze(cfg, sample); });
      run_stage("analyze", [&] {
        pipeline::write_dataset(dir, "sample.csv", sample);
        pipeline::write_analysis(dir, a);
      });
      out << "analysis of " << sample.size() << " rows written to " << dir.path("").string() << '\n';
    } else if (trn->parsed()) {
      const auto pooled = run_stage("train", [&] { return load_dataset(dir, "dataset.csv"); });
      const auto splits = run_stage("split", [&] { return pipeline::make_splits(cfg, pooled); });
      const auto c = run_stage("train", [&] { return pipeline::train_models(cfg, splits, exec); });
      run_stage("train", [&] { pipeline::write_training(dir, c); });
      for (const auto& r : c.rows)
        out << r.model_id << "  HLN " << r.hidden << "  ANN MAE " << r.ann_mae << "  MSE " << r.ann_mse
            << "  SR MSE " << r.sr_mse << "  time " << r.infer_time << " s\n";
    } else if (pip->parsed()) {
      const auto r = pipeline::run_pipeline(cfg, exec, &err);
      pipeline::format_report(out, r);
    } else if (rep->parsed()) {
      pipeline::RunReport r;
      r.seed = cfg.seed;
      r.config_hash = config::hex(cfg.hash());
      const auto pooled = run_stage("report", [&] { return load_dataset(dir, "dataset.csv"); });
      r.pooled_rows = pooled.size();
      r.flagged_rows = flagged(pooled);
      const auto sample = run_stage("dataset", [&] { return pipeline::draw_sample(cfg, pooled); });
      r.sample_rows = sample.size();
      r.analysis = run_stage("analyze", [&] { return pipeline::analyze(cfg, sample); });
      const auto splits = run_stage("split", [&] { return pipeline::make_splits(cfg, pooled); });
      r.train_rows = splits.train.size();
      r.val_rows = splits.validation.size();
      r.test_rows = splits.test.size();
      r.comparison.rows = run_stage("report", [&] {
        auto is = dir.open_input("comparison.csv");
        return pipeline::read_comparison(is);
      });
      run_stage("report", [&] { pipeline::write_report(dir, r); });
      pipeline::format_report(out, r);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace exfl
