#include "exfl/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "exfl/csv.hpp"
#include "exfl/rng.hpp"

namespace exfl::pipeline {

namespace {

// Sub-seeds for the randomized stages. The statistics sample uses the run
// seed itself.
constexpr std::uint64_t kSplitStream = 2;
constexpr std::uint64_t kMlpRowsStream = 3;
constexpr std::uint64_t kTrainStream = 4;

std::string_view policy_name(data::QrefPolicy p) {
  switch (p) {
    case data::QrefPolicy::ClampAndFlag: return "clamp";
    case data::QrefPolicy::Drop: return "drop";
    case data::QrefPolicy::Throw: return "throw";
  }
  return "clamp";
}

data::QrefPolicy parse_policy(std::string_view s) {
  if (s == "clamp") return data::QrefPolicy::ClampAndFlag;
  if (s == "drop") return data::QrefPolicy::Drop;
  if (s == "throw") return data::QrefPolicy::Throw;
  throw Error(ErrorCode::Parse, "qref.policy must be clamp, drop or throw, got '" + std::string(s) + "'");
}

// Plant parameters addressable from config files, keyed like the fields.
std::vector<std::pair<std::string, double*>> plant_fields(smib::PlantParams& p) {
  auto& m = p.machine;
  auto& e = p.exciter;
  auto& n = p.network;
  auto re = [](smib::cplx& z) { return &reinterpret_cast<double(&)[2]>(z)[0]; };
  auto im = [](smib::cplx& z) { return &reinterpret_cast<double(&)[2]>(z)[1]; };
  return {
      {"machine.X_d", &m.X_d},       {"machine.X_q", &m.X_q},
      {"machine.X_d_p", &m.X_d_p},   {"machine.X_q_p", &m.X_q_p},
      {"machine.X_d_pp", &m.X_d_pp}, {"machine.X_q_pp", &m.X_q_pp},
      {"machine.T_d_p", &m.T_d_p},   {"machine.T_d_pp", &m.T_d_pp},
      {"machine.T_q_p", &m.T_q_p},   {"machine.T_q_pp", &m.T_q_pp},
      {"machine.R_stator", &m.R_stator}, {"machine.H", &m.H},
      {"machine.D", &m.D},           {"machine.f_nom", &m.f_nom},
      {"machine.S_base", &m.S_base}, {"machine.V_base", &m.V_base},
      {"machine.X_s", &m.X_s},
      {"exciter.Ka", &e.Ka},         {"exciter.Ta", &e.Ta},
      {"exciter.Ke", &e.Ke},         {"exciter.Te", &e.Te},
      {"exciter.Kf", &e.Kf},         {"exciter.Tf", &e.Tf},
      {"exciter.Vf_min", &e.Vf_min}, {"exciter.Vf_max", &e.Vf_max},
      {"network.line1_R", re(n.line_impedances[0])}, {"network.line1_X", im(n.line_impedances[0])},
      {"network.line2_R", re(n.line_impedances[1])}, {"network.line2_X", im(n.line_impedances[1])},
      {"network.transformer_R", re(n.transformer_impedance)},
      {"network.transformer_X", im(n.transformer_impedance)},
      {"network.load_R_ohm", re(n.local_load_ohm)}, {"network.load_X_ohm", im(n.local_load_ohm)},
      {"network.V_infinite_bus", &n.V_infinite_bus},
      {"network.fault_impedance", &n.fault_impedance},
  };
}

double to_double(const std::string& key, const std::string& v) {
  try {
    return csv::parse_double(v);
  } catch (const Error&) {
    throw Error(ErrorCode::Parse, "key '" + key + "': not a number: '" + v + "'");
  }
}

std::uint64_t to_count(const std::string& key, const std::string& v) {
  long long x = 0;
  try {
    x = csv::parse_int(v);
  } catch (const Error&) {
    throw Error(ErrorCode::Parse, "key '" + key + "': not an integer: '" + v + "'");
  }
  if (x < 0) throw Error(ErrorCode::Parse, "key '" + key + "' must be non-negative");
  return static_cast<std::uint64_t>(x);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  for (auto f : csv::split(v, ',')) {
    while (!f.empty() && f.front() == ' ') f.remove_prefix(1);
    while (!f.empty() && f.back() == ' ') f.remove_suffix(1);
    if (!f.empty()) out.emplace_back(f);
  }
  return out;
}

std::string join(const std::vector<std::string>& v, std::string_view sep = ",") {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? std::string(sep) : "") + v[i];
  return out;
}

// Scenario keys look like scenario.<name>.<field>.
// Per-scenario operating point fields left unset fall back to sim.*.
constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();

struct ScenarioDraft {
  std::optional<smib::DisturbanceKind> kind;
  smib::DisturbanceEvent ev;
  smib::OperatingPoint op{kUnset, kUnset};
};

}  // namespace

std::vector<smib::Scenario> PipelineConfig::scenarios() const {
  std::vector<smib::Scenario> out = custom_scenarios.empty() ? smib::default_scenarios(op) : custom_scenarios;
  for (auto& sc : out) {
    if (custom_scenarios.empty() || std::isnan(sc.op.P_target)) sc.op.P_target = op.P_target;
    if (custom_scenarios.empty() || std::isnan(sc.op.V_T_target)) sc.op.V_T_target = op.V_T_target;
    sc.t_end = t_end;
    sc.dt_sample = dt_sample;
    sc.h = h;
  }
  return out;
}

mlp::SweepConfig PipelineConfig::sweep_config() const {
  mlp::SweepConfig s;
  s.h_min = h_min;
  s.h_max = h_max;
  s.restarts = restarts;
  s.train = train;
  s.train.seed = derive_seed(seed, kTrainStream);
  return s;
}

void PipelineConfig::validate() const {
  auto bad = [](const std::string& m) { throw Error(ErrorCode::InvalidArgument, m); };
  if (!(t_end > 0 && dt_sample > 0 && h > 0 && h <= dt_sample)) bad("need 0 < h <= dt_sample and t_end > 0");
  if (!(op.V_T_target > 0)) bad("sim.V_T_target must be positive");
  plant.machine.validate();
  plant.exciter.validate();
  plant.network.validate();
  if (stats_sample_n < 10) bad("stats.sample_n must be >= 10");
  if (!(alpha > 0 && alpha < 1)) bad("stats.alpha must lie in (0,1)");
  if (!(vif_cap >= 1)) bad("stats.vif_cap must be >= 1");
  data::SplitSpec{train_frac, val_frac, test_frac, 0}.validate();
  sweep_config().validate();
  if (ann_models.size() < 2) bad("ann.models needs at least two models");
  const auto paper = stats::enumerate_paper_models();
  for (const auto& m : ann_models) stats::find_model(paper, m);
}

std::string PipelineConfig::effective() const {
  std::map<std::string, std::string> kv;
  kv["seed"] = std::to_string(seed);
  kv["sim.P_target"] = csv::fmt(op.P_target);
  kv["sim.V_T_target"] = csv::fmt(op.V_T_target);
  kv["sim.t_end"] = csv::fmt(t_end);
  kv["sim.dt_sample"] = csv::fmt(dt_sample);
  kv["sim.h"] = csv::fmt(h);
  kv["qref.policy"] = std::string(policy_name(qref_policy));
  auto plant_copy = plant;
  for (const auto& [k, ptr] : plant_fields(plant_copy)) kv[k] = csv::fmt(*ptr);
  kv["machine.model_order"] = std::to_string(plant.machine.model_order);
  kv["machine.short_circuit_constants"] = plant.machine.short_circuit_constants ? "true" : "false";
  kv["stats.sample_n"] = std::to_string(stats_sample_n);
  kv["stats.alpha"] = csv::fmt(alpha);
  kv["stats.vif_cap"] = csv::fmt(vif_cap);
  kv["mlp.rows"] = std::to_string(mlp_rows);
  kv["split.train"] = csv::fmt(train_frac);
  kv["split.val"] = csv::fmt(val_frac);
  kv["split.test"] = csv::fmt(test_frac);
  kv["mlp.h_min"] = std::to_string(h_min);
  kv["mlp.h_max"] = std::to_string(h_max);
  kv["mlp.restarts"] = std::to_string(restarts);
  kv["mlp.max_epochs"] = std::to_string(train.max_epochs);
  kv["mlp.mu0"] = csv::fmt(train.mu0);
  kv["mlp.mu_dec"] = csv::fmt(train.mu_dec);
  kv["mlp.mu_inc"] = csv::fmt(train.mu_inc);
  kv["mlp.mu_max"] = csv::fmt(train.mu_max);
  kv["mlp.patience"] = std::to_string(train.patience);
  kv["mlp.init_range"] = csv::fmt(train.init_range);
  kv["mlp.timing_passes"] = std::to_string(train.timing_passes);
  kv["ann.models"] = join(ann_models);
  if (custom_scenarios.empty()) {
    kv["scenarios"] = "default";
  } else {
    for (const auto& sc : custom_scenarios) {
      const auto& ev = sc.events.at(0);
      const auto name = "scenario." + sc.id.substr(sc.id.find('/') + 1);
      kv[name + ".kind"] = std::string(smib::to_string(ev.kind));
      kv[name + ".t_start"] = csv::fmt(ev.t_start);
      kv[name + ".duration"] = csv::fmt(ev.duration);
      kv[name + ".vref_step"] = csv::fmt(ev.vref_step);
      if (!std::isnan(sc.op.P_target)) kv[name + ".P_target"] = csv::fmt(sc.op.P_target);
      if (!std::isnan(sc.op.V_T_target)) kv[name + ".V_T_target"] = csv::fmt(sc.op.V_T_target);
    }
  }
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

void apply(PipelineConfig& cfg, const config::KeyValues& kv) {
  std::map<std::string, ScenarioDraft> drafts;
  const auto fields = plant_fields(cfg.plant);
  for (const auto& [key, v] : kv) {
    const auto field = std::find_if(fields.begin(), fields.end(), [&](const auto& f) { return f.first == key; });
    if (field != fields.end()) *field->second = to_double(key, v);
    else if (key == "machine.model_order") cfg.plant.machine.model_order = static_cast<int>(to_count(key, v));
    else if (key == "machine.short_circuit_constants") {
      if (v != "true" && v != "false") throw Error(ErrorCode::Parse, "key '" + key + "' expects true or false");
      cfg.plant.machine.short_circuit_constants = v == "true";
    } else if (key == "seed") cfg.seed = to_count(key, v);
    else if (key == "sim.P_target") cfg.op.P_target = to_double(key, v);
    else if (key == "sim.V_T_target") cfg.op.V_T_target = to_double(key, v);
    else if (key == "sim.t_end") cfg.t_end = to_double(key, v);
    else if (key == "sim.dt_sample") cfg.dt_sample = to_double(key, v);
    else if (key == "sim.h") cfg.h = to_double(key, v);
    else if (key == "qref.policy") cfg.qref_policy = parse_policy(v);
    else if (key == "stats.sample_n") cfg.stats_sample_n = to_count(key, v);
    else if (key == "stats.alpha") cfg.alpha = to_double(key, v);
    else if (key == "stats.vif_cap") cfg.vif_cap = to_double(key, v);
    else if (key == "mlp.rows") cfg.mlp_rows = to_count(key, v);
    else if (key == "split.train") cfg.train_frac = to_double(key, v);
    else if (key == "split.val") cfg.val_frac = to_double(key, v);
    else if (key == "split.test") cfg.test_frac = to_double(key, v);
    else if (key == "mlp.h_min") cfg.h_min = to_count(key, v);
    else if (key == "mlp.h_max") cfg.h_max = to_count(key, v);
    else if (key == "mlp.restarts") cfg.restarts = to_count(key, v);
    else if (key == "mlp.max_epochs") cfg.train.max_epochs = to_count(key, v);
    else if (key == "mlp.mu0") cfg.train.mu0 = to_double(key, v);
    else if (key == "mlp.mu_dec") cfg.train.mu_dec = to_double(key, v);
    else if (key == "mlp.mu_inc") cfg.train.mu_inc = to_double(key, v);
    else if (key == "mlp.mu_max") cfg.train.mu_max = to_double(key, v);
    else if (key == "mlp.patience") cfg.train.patience = to_count(key, v);
    else if (key == "mlp.init_range") cfg.train.init_range = to_double(key, v);
    else if (key == "mlp.timing_passes") cfg.train.timing_passes = to_count(key, v);
    else if (key == "ann.models") cfg.ann_models = split_list(v);
    else if (key == "scenarios") {
      if (v != "default") throw Error(ErrorCode::Parse, "scenarios accepts only 'default'");
      cfg.custom_scenarios.clear();
    } else if (key.rfind("scenario.", 0) == 0) {
      const auto last = key.rfind('.');
      const auto name = key.substr(9, last - 9);
      const auto field = key.substr(last + 1);
      if (name.empty() || last <= 9) throw Error(ErrorCode::Parse, "malformed scenario key '" + key + "'");
      auto& d = drafts[name];
      if (field == "kind") {
        try {
          d.kind = smib::parse_disturbance_kind(v);
        } catch (const Error& e) {
          throw Error(ErrorCode::Parse, "key '" + key + "': " + e.what());
        }
      } else if (field == "t_start") d.ev.t_start = to_double(key, v);
      else if (field == "duration") d.ev.duration = to_double(key, v);
      else if (field == "vref_step") d.ev.vref_step = to_double(key, v);
      else if (field == "P_target") d.op.P_target = to_double(key, v);
      else if (field == "V_T_target") d.op.V_T_target = to_double(key, v);
      else throw Error(ErrorCode::Parse, "unknown config key '" + key + "'");
    } else {
      throw Error(ErrorCode::Parse, "unknown config key '" + key + "'");
    }
  }
  if (!drafts.empty()) {
    cfg.custom_scenarios.clear();
    for (auto& [name, d] : drafts) {
      if (!d.kind) throw Error(ErrorCode::Parse, "scenario '" + name + "' has no kind");
      d.ev.kind = *d.kind;
      smib::Scenario sc;
      sc.id = std::string(smib::to_string(*d.kind)) + "/" + name;
      sc.events = {d.ev};
      sc.op = d.op;
      cfg.custom_scenarios.push_back(sc);
    }
  }
}

// ------------------------------------------------------------------ stages

std::vector<smib::SimTrace> simulate(const PipelineConfig& cfg, Execution exec) {
  const auto scenarios = cfg.scenarios();
  return smib::run_scenarios(cfg.plant, scenarios, exec);
}

data::Dataset pool(const PipelineConfig& cfg, const std::vector<smib::SimTrace>& traces) {
  std::vector<double> v_ref;
  for (const auto& t : traces) v_ref.push_back(t.V_ref);
  data::FeatureOptions opt;
  opt.qref_policy = cfg.qref_policy;
  auto d = data::pool_scenarios(traces, v_ref, opt);
  d.seed = cfg.seed;
  return d;
}

data::Dataset draw_sample(const PipelineConfig& cfg, const data::Dataset& pooled) {
  return data::stratified_subsample(pooled, cfg.stats_sample_n, cfg.seed);
}

AnalysisReport analyze(const PipelineConfig& cfg, const data::Dataset& sample) {
  AnalysisReport a;
  a.correlation = stats::correlation_table(sample, data::feature_names());
  for (const auto& m : stats::enumerate_paper_models()) {
    a.fits.push_back(stats::ols_fit(sample, m));
    a.assessments.push_back(stats::assess(a.fits.back()));
  }
  for (const auto& c : a.correlation)
    if (c.p_value < cfg.alpha) a.forward_candidates.push_back(c.feature);
  try {
    if (a.forward_candidates.empty()) throw Error(ErrorCode::NoFeatureQualifies, "no feature passes the correlation screen");
    a.forward = stats::forward_select(sample, a.forward_candidates, cfg.alpha, cfg.vif_cap);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoFeatureQualifies) throw;
    a.forward_error = e.what();
  }
  return a;
}

mlp::Splits make_splits(const PipelineConfig& cfg, const data::Dataset& pooled) {
  data::Dataset rows;
  if (cfg.mlp_rows > 0) {
    rows = data::stratified_subsample(pooled, cfg.mlp_rows, derive_seed(cfg.seed, kMlpRowsStream));
  } else {
    rows.provenance = pooled.provenance;
    rows.seed = pooled.seed;
    for (const auto& r : pooled.rows)
      if (!r.flagged) rows.rows.push_back(r);
  }
  auto [tr, va, te] = data::split(rows, {cfg.train_frac, cfg.val_frac, cfg.test_frac, derive_seed(cfg.seed, kSplitStream)});
  return {std::move(tr), std::move(va), std::move(te)};
}

std::vector<stats::ModelSpec> ann_model_specs(const PipelineConfig& cfg) {
  const auto paper = stats::enumerate_paper_models();
  std::vector<stats::ModelSpec> out;
  for (const auto& id : cfg.ann_models) out.push_back(stats::find_model(paper, id));
  return out;
}

mlp::Comparison train_models(const PipelineConfig& cfg, const mlp::Splits& splits, Execution exec) {
  return mlp::compare_models(ann_model_specs(cfg), splits, cfg.sweep_config(), exec);
}

// ------------------------------------------------------------------ output

OutputDir::OutputDir(std::filesystem::path dir, std::string config_hash)
    : dir_(std::move(dir)), hash_(std::move(config_hash)) {}

std::ofstream OutputDir::open_text(const std::string& name) const {
  std::filesystem::create_directories(path(name).parent_path());
  std::ofstream os(path(name), std::ios::binary);
  if (!os) throw Error(ErrorCode::Io, "cannot write '" + path(name).string() + "'");
  return os;
}

std::ofstream OutputDir::open_csv(const std::string& name) const {
  auto os = open_text(name);
  os << "# config=" << hash_ << '\n';
  return os;
}

std::ifstream OutputDir::open_input(const std::string& name) const {
  std::ifstream is(path(name), std::ios::binary);
  if (!is) throw Error(ErrorCode::Io, "missing input file '" + path(name).string() + "'");
  return is;
}

void write_scenarios(const OutputDir& out, const PipelineConfig& cfg, const std::vector<smib::SimTrace>& traces) {
  auto os = out.open_csv("scenarios.csv");
  os << "scenario_id,class,kind,t_start,duration,vref_step,P_target,V_T_target,V_ref,samples\n";
  const auto scenarios = cfg.scenarios();
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    const auto& sc = scenarios[i];
    const auto& ev = sc.events.at(0);
    os << sc.id << ',' << smib::scenario_class(sc.id) << ',' << smib::to_string(ev.kind) << ','
       << csv::fmt(ev.t_start) << ',' << csv::fmt(ev.duration) << ',' << csv::fmt(ev.vref_step) << ','
       << csv::fmt(sc.op.P_target) << ',' << csv::fmt(sc.op.V_T_target) << ','
       << csv::fmt(traces.at(i).V_ref) << ',' << traces.at(i).signals.size() << '\n';
  }
}

void write_traces(const OutputDir& out, const std::vector<smib::SimTrace>& traces) {
  auto os = out.open_csv("traces.csv");
  smib::write_traces_csv(os, traces);
}

void write_dataset(const OutputDir& out, const std::string& name, const data::Dataset& d) {
  auto os = out.open_csv(name);
  data::write_csv(os, d);
}

void write_analysis(const OutputDir& out, const AnalysisReport& a) {
  {
    auto os = out.open_csv("correlation.csv");
    os << "feature,r,t_stat,p_value,n\n";
    for (const auto& c : a.correlation)
      os << c.feature << ',' << csv::fmt(c.r) << ',' << csv::fmt(c.t_stat) << ',' << csv::fmt(c.p_value)
         << ',' << c.n << '\n';
  }
  {
    auto os = out.open_csv("regression.csv");
    os << "model_id,feature,coef,p_value,vif,S,R2,R2_adj\n";
    for (const auto& f : a.fits) {
      const auto tail = ',' + csv::fmt(f.S) + ',' + csv::fmt(f.R2) + ',' + csv::fmt(f.R2_adj) + '\n';
      os << f.model_id << ",constant," << csv::fmt(f.beta0) << ',' << csv::fmt(f.p_values[0]) << ",," << tail;
      for (std::size_t j = 0; j < f.features.size(); ++j)
        os << f.model_id << ',' << f.features[j] << ',' << csv::fmt(f.betas[j]) << ','
           << csv::fmt(f.p_values[j + 1]) << ',' << csv::fmt(f.vif[j]) << tail;
    }
  }
  {
    auto os = out.open_csv("assessment_summary.csv");
    os << "model_id,n,coverage_pm2,passes_95\n";
    for (std::size_t m = 0; m < a.fits.size(); ++m)
      os << a.fits[m].model_id << ',' << a.fits[m].n << ',' << csv::fmt(a.assessments[m].coverage_pm2) << ','
         << (a.assessments[m].passes_95 ? 1 : 0) << '\n';
  }
  for (std::size_t m = 0; m < a.fits.size(); ++m) {
    const auto& f = a.fits[m];
    const auto& r = a.assessments[m];
    auto os = out.open_csv("assessment_" + f.model_id + ".csv");
    os << "std_residual,fit_value,theoretical_quantile\n";
    for (std::size_t i = 0; i < f.fitted.size(); ++i)
      os << csv::fmt(r.std_residuals[i]) << ',' << csv::fmt(f.fitted[i]) << ','
         << csv::fmt(r.theoretical_quantile[i]) << '\n';
    auto hs = out.open_csv("histogram_" + f.model_id + ".csv");
    hs << "bin_lo,bin_hi,count\n";
    for (std::size_t b = 0; b < r.histogram.counts.size(); ++b)
      hs << csv::fmt(r.histogram.edges[b]) << ',' << csv::fmt(r.histogram.edges[b + 1]) << ','
         << r.histogram.counts[b] << '\n';
  }
  {
    auto os = out.open_csv("forward_selection.csv");
    os << "step,feature,R2_adj,p_value,max_vif\n";
    if (a.forward)
      for (std::size_t s = 0; s < a.forward->steps.size(); ++s) {
        const auto& st = a.forward->steps[s];
        os << s + 1 << ',' << st.feature << ',' << csv::fmt(st.R2_adj) << ',' << csv::fmt(st.p_value) << ','
           << csv::fmt(st.max_vif) << '\n';
      }
  }
}

void write_training(const OutputDir& out, const mlp::Comparison& c) {
  {
    auto os = out.open_csv("sweep_log.csv");
    os << "model_id,hidden,restart,epochs,train_mse,val_mse,test_mse,test_mae,infer_time_s,status\n";
    for (const auto& s : c.sweeps)
      for (const auto& cell : s.cells) {
        const auto& r = cell.result;
        std::string status = cell.status;
        std::replace(status.begin(), status.end(), ',', ';');
        os << s.model_id << ',' << cell.hidden << ',' << cell.restart << ',' << r.epochs_run << ','
           << csv::fmt(r.train_mse) << ',' << csv::fmt(r.val_mse) << ',' << csv::fmt(r.mse) << ','
           << csv::fmt(r.mae) << ',' << csv::fmt(r.infer_time) << ',' << status << '\n';
      }
  }
  {
    auto os = out.open_csv("error_curve.csv");
    os << "model_id,hidden,best_test_mse\n";
    for (const auto& s : c.sweeps)
      for (const auto& [h, mse] : s.error_curve()) os << s.model_id << ',' << h << ',' << csv::fmt(mse) << '\n';
  }
  {
    auto os = out.open_csv("comparison.csv");
    os << "model_id,hidden,ann_mae,ann_mse,sr_mae,sr_mse\n";
    for (const auto& r : c.rows)
      os << r.model_id << ',' << r.hidden << ',' << csv::fmt(r.ann_mae) << ',' << csv::fmt(r.ann_mse) << ','
         << csv::fmt(r.sr_mae) << ',' << csv::fmt(r.sr_mse) << '\n';
  }
  {
    auto os = out.open_csv("timing.csv");
    os << "model_id,hidden,infer_time_s\n";
    for (const auto& r : c.rows) os << r.model_id << ',' << r.hidden << ',' << csv::fmt(r.infer_time) << '\n';
  }
  for (const auto& s : c.sweeps) {
    auto os = out.open_text("nets/" + s.model_id + ".net");
    mlp::write_net(os, s.best_result().net);
  }
}

std::vector<mlp::ComparisonRow> read_comparison(std::istream& is) {
  csv::Reader reader(is, "model_id,hidden,ann_mae,ann_mse,sr_mae,sr_mse");
  std::vector<mlp::ComparisonRow> rows;
  std::vector<std::string_view> f;
  while (reader.next(f)) {
    mlp::ComparisonRow r;
    r.model_id = std::string(f[0]);
    r.hidden = static_cast<std::size_t>(csv::parse_int(f[1]));
    r.ann_mae = csv::parse_double(f[2]);
    r.ann_mse = csv::parse_double(f[3]);
    r.sr_mae = csv::parse_double(f[4]);
    r.sr_mse = csv::parse_double(f[5]);
    rows.push_back(r);
  }
  return rows;
}

namespace {

std::string num(double v, int prec = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(prec) << v;
  return s.str();
}

std::string pval(double p) { return p < 0.0005 ? "0.000" : num(p, 3); }

}  // namespace

void format_report(std::ostream& os, const RunReport& r) {
  os << "excitation feature study\n\n";
  os << "seed            " << r.seed << '\n';
  os << "config hash     " << r.config_hash << '\n';
  os << "pooled rows     " << r.pooled_rows << " (flagged " << r.flagged_rows << ")\n";
  os << "stats sample    " << r.sample_rows << '\n';
  os << "mlp splits      " << r.train_rows << " / " << r.val_rows << " / " << r.test_rows << '\n';

  const auto& a = r.analysis;
  os << "\ncorrelation with Vf\n";
  os << std::left << std::setw(10) << "feature" << std::right << std::setw(10) << "r" << std::setw(12)
     << "t" << std::setw(10) << "p" << '\n';
  for (const auto& c : a.correlation)
    os << std::left << std::setw(10) << c.feature << std::right << std::setw(10) << num(c.r, 3)
       << std::setw(12) << num(c.t_stat, 3) << std::setw(10) << pval(c.p_value) << '\n';

  os << "\nregression models\n";
  os << std::left << std::setw(10) << "model" << std::setw(10) << "term" << std::right << std::setw(12)
     << "coef" << std::setw(10) << "p" << std::setw(10) << "VIF" << std::setw(10) << "S" << std::setw(10)
     << "R2 %" << std::setw(10) << "R2adj %" << '\n';
  for (const auto& f : a.fits) {
    os << std::left << std::setw(10) << f.model_id << std::setw(10) << "constant" << std::right
       << std::setw(12) << num(f.beta0, 3) << std::setw(10) << pval(f.p_values[0]) << std::setw(10) << ""
       << std::setw(10) << num(f.S) << std::setw(10) << num(100 * f.R2, 1) << std::setw(10)
       << num(100 * f.R2_adj, 1) << '\n';
    for (std::size_t j = 0; j < f.features.size(); ++j)
      os << std::left << std::setw(10) << "" << std::setw(10) << f.features[j] << std::right << std::setw(12)
         << num(f.betas[j], 3) << std::setw(10) << pval(f.p_values[j + 1]) << std::setw(10)
         << num(f.vif[j], 3) << '\n';
  }

  os << "\nresidual assessment (share of e/S within +/-2)\n";
  for (std::size_t m = 0; m < a.fits.size(); ++m)
    os << std::left << std::setw(10) << a.fits[m].model_id << std::right << std::setw(8)
       << num(100 * a.assessments[m].coverage_pm2, 1) << " %  "
       << (a.assessments[m].passes_95 ? "pass" : "fail") << '\n';

  os << "\nforward selection over {" << join(a.forward_candidates, ", ") << "}\n";
  if (a.forward) {
    for (std::size_t s = 0; s < a.forward->steps.size(); ++s) {
      const auto& st = a.forward->steps[s];
      os << "  " << s + 1 << ". " << std::left << std::setw(8) << st.feature << std::right
         << " R2adj " << num(st.R2_adj) << "  p " << pval(st.p_value) << "  max VIF " << num(st.max_vif, 3) << '\n';
    }
  } else {
    os << "  " << a.forward_error << '\n';
  }

  os << "\nANN vs regression on the test split (MAE/MSE in per-unit Vf)\n";
  os << std::left << std::setw(10) << "model" << std::right << std::setw(6) << "HLN" << std::setw(12)
     << "ANN MAE" << std::setw(12) << "ANN MSE" << std::setw(12) << "SR MAE" << std::setw(12) << "SR MSE"
     << '\n';
  for (const auto& c : r.comparison.rows)
    os << std::left << std::setw(10) << c.model_id << std::right << std::setw(6) << c.hidden
       << std::setw(12) << num(c.ann_mae, 5) << std::setw(12) << num(c.ann_mse, 6) << std::setw(12)
       << num(c.sr_mae, 5) << std::setw(12) << num(c.sr_mse, 6) << '\n';
  os << "inference times are in timing.csv\n";
}

void write_report(const OutputDir& out, const RunReport& r) {
  auto os = out.open_text("report.txt");
  format_report(os, r);
}

RunReport run_pipeline(const PipelineConfig& cfg, Execution exec, std::ostream* log) {
  run_stage("config", [&] { cfg.validate(); });
  RunReport rep;
  rep.seed = cfg.seed;
  rep.config_hash = config::hex(cfg.hash());
  const OutputDir out(cfg.out_dir, rep.config_hash);
  auto note = [&](const char* msg) {
    if (log) *log << msg << std::endl;
  };
  run_stage("config", [&] {
    auto os = out.open_text("config.effective");
    os << cfg.effective();
  });

  note("simulate");
  const auto traces = run_stage("simulate", [&] {
    auto t = simulate(cfg, exec);
    write_scenarios(out, cfg, t);
    write_traces(out, t);
    return t;
  });
  note("pool");
  const auto pooled = run_stage("dataset", [&] {
    auto d = pool(cfg, traces);
    write_dataset(out, "dataset.csv", d);
    return d;
  });
  rep.pooled_rows = pooled.size();
  rep.flagged_rows = pooled.provenance.flagged_rows;

  note("sample");
  const auto sample = run_stage("dataset", [&] {
    auto s = draw_sample(cfg, pooled);
    write_dataset(out, "sample.csv", s);
    return s;
  });
  rep.sample_rows = sample.size();

  note("analyze");
  rep.analysis = run_stage("analyze", [&] {
    auto a = analyze(cfg, sample);
    write_analysis(out, a);
    return a;
  });

  note("train");
  const auto splits = run_stage("split", [&] { return make_splits(cfg, pooled); });
  rep.train_rows = splits.train.size();
  rep.val_rows = splits.validation.size();
  rep.test_rows = splits.test.size();
  rep.comparison = run_stage("train", [&] {
    auto c = train_models(cfg, splits, exec);
    write_training(out, c);
    return c;
  });

  note("report");
  run_stage("report", [&] { write_report(out, rep); });
  return rep;
}

}  // namespace exfl::pipeline
