// Serial vs OpenMP timings for the two parallel kernels: scenario simulation
// and the hidden-size/restart sweep. Also checks the results agree.
//
//   bench_kernels [repeats]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#ifdef EXFL_HAVE_OPENMP
#include <omp.h>
#endif

#include "exfl/dataset.hpp"
#include "exfl/mlp.hpp"
#include "exfl/smib.hpp"
#include "exfl/stats.hpp"

using namespace exfl;

namespace {

template <class F>
double best_of(int repeats, F&& f) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

void row(const char* name, double serial, double parallel, bool same) {
  std::printf("%-14s serial %8.3f s   parallel %8.3f s   speedup %5.2fx   %s\n", name, serial, parallel,
              serial / parallel, same ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  const int repeats = argc > 1 ? std::max(1, std::atoi(argv[1])) : 3;
#ifdef EXFL_HAVE_OPENMP
  std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
  std::printf("built without OpenMP; parallel runs fall back to serial\n");
#endif

  const smib::PlantParams plant;
  const auto scenarios = smib::default_scenarios();
  std::vector<smib::SimTrace> ts, tp;
  const double sim_s = best_of(repeats, [&] { ts = smib::run_scenarios(plant, scenarios, Execution::Serial); });
  const double sim_p = best_of(repeats, [&] { tp = smib::run_scenarios(plant, scenarios, Execution::Parallel); });
  bool same = ts.size() == tp.size();
  for (std::size_t i = 0; same && i < ts.size(); ++i) {
    same = ts[i].signals.size() == tp[i].signals.size();
    for (std::size_t k = 0; same && k < ts[i].signals.size(); ++k)
      same = ts[i].signals[k].V_f == tp[i].signals[k].V_f && ts[i].signals[k].delta == tp[i].signals[k].delta;
  }
  row("run_scenarios", sim_s, sim_p, same);

  std::vector<double> vref;
  for (const auto& t : ts) vref.push_back(t.V_ref);
  const auto pool = data::pool_scenarios(ts, vref);
  const auto sub = data::stratified_subsample(pool, 1200, 11);
  auto [tr, va, te] = data::split(sub, data::SplitSpec{});
  mlp::Splits splits{tr, va, te};
  mlp::SweepConfig cfg;
  cfg.h_max = 6;
  cfg.restarts = 4;
  cfg.train.max_epochs = 40;
  cfg.train.timing_passes = 0;
  const stats::ModelSpec model{"MODEL_8", {"dVq", "delta"}};
  mlp::SweepResult ss, sp;
  const double sw_s = best_of(repeats, [&] { ss = mlp::grow_sweep(model, splits, cfg, Execution::Serial); });
  const double sw_p = best_of(repeats, [&] { sp = mlp::grow_sweep(model, splits, cfg, Execution::Parallel); });
  same = ss.best == sp.best && ss.cells.size() == sp.cells.size();
  for (std::size_t c = 0; same && c < ss.cells.size(); ++c)
    same = ss.cells[c].result.net.weights() == sp.cells[c].result.net.weights();
  row("grow_sweep", sw_s, sw_p, same);
  return 0;
}
