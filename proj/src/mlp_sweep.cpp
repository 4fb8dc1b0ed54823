#include <algorithm>
#include <limits>

#include "exfl/error.hpp"
#include "exfl/mlp.hpp"
#include "exfl/rng.hpp"

namespace exfl::mlp {

void SweepConfig::validate() const {
  if (h_min < 1 || h_max < h_min) throw Error(ErrorCode::InvalidArgument, "empty hidden-size range");
  if (restarts < 1) throw Error(ErrorCode::InvalidArgument, "restarts must be >= 1");
  train.validate();
}

std::vector<std::pair<std::size_t, double>> SweepResult::error_curve() const {
  std::vector<std::pair<std::size_t, double>> curve;
  for (const auto& c : cells) {
    if (!c.ok) continue;
    if (curve.empty() || curve.back().first != c.hidden)
      curve.emplace_back(c.hidden, c.result.mse);
    else
      curve.back().second = std::min(curve.back().second, c.result.mse);
  }
  return curve;
}

SweepResult grow_sweep(const stats::ModelSpec& model, const Splits& splits, const SweepConfig& config,
                       Execution exec) {
  model.validate();
  config.validate();
  const Batch tr = make_batch(splits.train, model.features, model.target);
  const Batch va = make_batch(splits.validation, model.features, model.target);
  const Batch te = make_batch(splits.test, model.features, model.target);

  SweepResult out;
  out.model_id = model.id;
  for (std::size_t h = config.h_min; h <= config.h_max; ++h)
    for (std::size_t r = 0; r < config.restarts; ++r) out.cells.push_back({h, r, false, "", {}});

  auto run_cell = [&](SweepCell& cell) {
    TrainConfig tc = config.train;
    tc.seed = derive_seed(config.train.seed, cell.hidden, cell.restart);
    try {
      cell.result = train(cell.hidden, tr, va, te, tc);
      cell.result.restart_index = cell.restart;
      cell.ok = true;
      cell.status = "ok";
    } catch (const Error& e) {
      cell.status = e.what();
    }
  };

  const auto n = static_cast<long>(out.cells.size());
  if (exec == Execution::Parallel) {
#ifdef EXFL_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic, 1)
#endif
    for (long i = 0; i < n; ++i) run_cell(out.cells[static_cast<std::size_t>(i)]);
  } else {
    for (long i = 0; i < n; ++i) run_cell(out.cells[static_cast<std::size_t>(i)]);
  }

  bool any = false;
  for (std::size_t i = 0; i < out.cells.size(); ++i) {
    const auto& c = out.cells[i];
    if (!c.ok) continue;
    if (!any) {
      out.best = i;
      any = true;
      continue;
    }
    const auto& b = out.cells[out.best].result;
    // cells are ordered by hidden size, so a strict comparison keeps the smaller net on ties
    if (c.result.mse < b.mse || (c.result.mse == b.mse && c.result.mae < b.mae)) out.best = i;
  }
  if (!any) throw Error(ErrorCode::SweepEmpty, "every sweep cell failed for " + model.id);
  return out;
}

Comparison compare_models(const std::vector<stats::ModelSpec>& models, const Splits& splits,
                          const SweepConfig& config, Execution exec) {
  if (models.size() < 2) throw Error(ErrorCode::InvalidArgument, "comparison needs at least two models");
  Comparison out;
  for (const auto& m : models) {
    out.sweeps.push_back(grow_sweep(m, splits, config, exec));
    const auto& best = out.sweeps.back().best_result();

    const auto fit = stats::ols_fit(splits.train, m);
    const Batch te = make_batch(splits.test, m.features, m.target);
    double sae = 0, sse = 0;
    std::vector<double> x(m.features.size());
    for (Eigen::Index i = 0; i < te.X.rows(); ++i) {
      for (std::size_t j = 0; j < x.size(); ++j) x[j] = te.X(i, static_cast<Eigen::Index>(j));
      const double e = te.y(i) - fit.predict(x);
      sae += std::abs(e);
      sse += e * e;
    }
    const double nt = static_cast<double>(te.size());
    out.rows.push_back({m.id, best.hidden_size, best.mae, best.mse, best.infer_time, sae / nt, sse / nt});
  }
  return out;
}

}  // namespace exfl::mlp
