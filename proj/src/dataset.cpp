#include "exfl/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <set>

#include "exfl/csv.hpp"
#include "exfl/error.hpp"
#include "exfl/rng.hpp"

namespace exfl::data {

namespace {
constexpr std::string_view kHeader = "dVt,omega,P,Q,dVq,delta,Vf,scenario_id,flagged";
constexpr double kRoundingSlack = 1e-9;
}  // namespace

const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names{"dVt", "omega", "P", "Q", "dVq", "delta"};
  return names;
}

double value(const FeatureRow& row, std::string_view name) {
  if (name == "dVt") return row.dVt;
  if (name == "omega") return row.omega;
  if (name == "P") return row.P;
  if (name == "Q") return row.Q;
  if (name == "dVq") return row.dVq;
  if (name == "delta") return row.delta;
  if (name == "Vf") return row.Vf;
  throw Error(ErrorCode::InvalidArgument, "unknown column '" + std::string(name) + "'");
}

std::vector<double> Dataset::column(std::string_view name) const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(value(r, name));
  return out;
}

FeatureRow derive_features(const smib::SimSignals& s, double V_ref, const FeatureOptions& opt) {
  FeatureRow row;
  row.dVt = V_ref - s.V_T;
  row.omega = s.omega;
  row.P = s.P;
  row.Q = s.Q;
  row.delta = s.delta;
  row.Vf = s.V_f;
  row.t = s.t;

  // Axis reference from V_ref_axis^2 + V_other^2 = 1.
  const double other = opt.axis == VoltageAxis::Quadrature ? s.V_d : s.V_q;
  const double own = opt.axis == VoltageAxis::Quadrature ? s.V_q : s.V_d;
  const double radicand = 1.0 - other * other;
  double ref = 0.0;
  if (radicand >= 0) {
    ref = std::sqrt(radicand);
  } else {
    if (opt.qref_policy == QrefPolicy::Throw)
      throw Error(ErrorCode::QrefUndefined,
                  "V_d^2 = " + std::to_string(other * other) + " > 1 at t=" + std::to_string(s.t));
    row.flagged = true;
  }
  row.dVq = ref - own;

  for (double v : {row.dVt, row.omega, row.P, row.Q, row.dVq, row.delta, row.Vf})
    if (!std::isfinite(v))
      throw Error(ErrorCode::InvalidArgument, "non-finite feature at t=" + std::to_string(s.t));
  return row;
}

Dataset pool_scenarios(std::span<const smib::SimTrace> traces, std::span<const double> v_ref,
                       const FeatureOptions& opt) {
  if (traces.size() != v_ref.size())
    throw Error(ErrorCode::LengthMismatch, "one V_ref per trace required");
  if (traces.empty()) throw Error(ErrorCode::EmptyTrace, "no traces to pool");
  Dataset out;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const auto& tr = traces[i];
    if (tr.signals.empty())
      throw Error(ErrorCode::EmptyTrace, "trace '" + tr.scenario_id + "' has no samples");
    if (!ids.insert(tr.scenario_id).second)
      throw Error(ErrorCode::InvalidArgument, "duplicate scenario id '" + tr.scenario_id + "'");
    out.provenance.traces.push_back(tr.scenario_id);
    for (const auto& s : tr.signals) {
      FeatureRow row = derive_features(s, v_ref[i], opt);
      row.scenario_id = tr.scenario_id;
      if (row.flagged) {
        ++out.provenance.flagged_rows;
        if (opt.qref_policy == QrefPolicy::Drop) continue;
      }
      out.rows.push_back(std::move(row));
    }
  }
  return out;
}

std::vector<std::size_t> largest_remainder(std::span<const double> weights, std::size_t total) {
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<std::size_t> sizes(weights.size());
  std::vector<double> rem(weights.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double quota = weights[i] / sum * static_cast<double>(total);
    sizes[i] = static_cast<std::size_t>(std::floor(quota + kRoundingSlack));
    rem[i] = quota - static_cast<double>(sizes[i]);
    assigned += sizes[i];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return rem[a] > rem[b] + kRoundingSlack;
  });
  for (std::size_t k = 0; assigned < total && k < order.size(); ++k, ++assigned) ++sizes[order[k]];
  return sizes;
}

Dataset stratified_subsample(const Dataset& data, std::size_t n, std::uint64_t seed,
                             bool exclude_flagged) {
  // Classes in order of first appearance.
  std::vector<std::string> classes;
  std::map<std::string, std::vector<std::size_t>, std::less<>> members;
  for (std::size_t i = 0; i < data.rows.size(); ++i) {
    const auto& r = data.rows[i];
    if (exclude_flagged && r.flagged) continue;
    const std::string cls(smib::scenario_class(r.scenario_id));
    auto [it, inserted] = members.try_emplace(cls);
    if (inserted) classes.push_back(cls);
    it->second.push_back(i);
  }
  std::size_t eligible = 0;
  for (const auto& [_, idx] : members) eligible += idx.size();
  if (n == 0 || n > eligible)
    throw Error(ErrorCode::InsufficientRows, "requested " + std::to_string(n) + " rows, " +
                                                 std::to_string(eligible) + " eligible");

  std::vector<double> weights;
  for (const auto& c : classes) weights.push_back(static_cast<double>(members[c].size()));
  const auto quota = largest_remainder(weights, n);

  Rng rng(seed);
  Dataset out;
  out.provenance = data.provenance;
  out.seed = seed;
  out.rows.reserve(n);
  for (std::size_t c = 0; c < classes.size(); ++c) {
    auto pool = members[classes[c]];
    // Partial Fisher-Yates: the first quota[c] slots are a uniform draw.
    for (std::size_t k = 0; k < quota[c]; ++k) {
      const std::size_t j = k + rng.below(pool.size() - k);
      std::swap(pool[k], pool[j]);
      out.rows.push_back(data.rows[pool[k]]);
    }
  }
  out.provenance.flagged_rows = 0;
  for (const auto& r : out.rows) out.provenance.flagged_rows += r.flagged ? 1 : 0;
  return out;
}

void SplitSpec::validate() const {
  if (!(train_frac > 0 && val_frac > 0 && test_frac > 0))
    throw Error(ErrorCode::InvalidArgument, "split fractions must be positive");
  if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-12)
    throw Error(ErrorCode::InvalidArgument, "split fractions must sum to 1");
}

std::tuple<Dataset, Dataset, Dataset> split(const Dataset& data, const SplitSpec& spec) {
  spec.validate();
  if (data.rows.empty()) throw Error(ErrorCode::DegenerateSplit, "empty dataset");
  const double w[3] = {spec.train_frac, spec.val_frac, spec.test_frac};
  const auto sizes = largest_remainder(w, data.rows.size());
  for (auto s : sizes)
    if (s == 0)
      throw Error(ErrorCode::DegenerateSplit,
                  std::to_string(data.rows.size()) + " rows leave a split part empty");

  std::vector<std::size_t> perm(data.rows.size());
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(spec.seed);
  shuffle(perm, rng);

  std::array<Dataset, 3> parts;
  std::size_t pos = 0;
  for (std::size_t p = 0; p < 3; ++p) {
    parts[p].provenance.traces = data.provenance.traces;
    parts[p].seed = spec.seed;
    for (std::size_t k = 0; k < sizes[p]; ++k) {
      const auto& row = data.rows[perm[pos++]];
      parts[p].rows.push_back(row);
      parts[p].provenance.flagged_rows += row.flagged ? 1 : 0;
    }
  }
  return {std::move(parts[0]), std::move(parts[1]), std::move(parts[2])};
}

void write_csv(std::ostream& os, const Dataset& data) {
  os << kHeader << '\n';
  for (const auto& r : data.rows)
    os << csv::fmt(r.dVt) << ',' << csv::fmt(r.omega) << ',' << csv::fmt(r.P) << ','
       << csv::fmt(r.Q) << ',' << csv::fmt(r.dVq) << ',' << csv::fmt(r.delta) << ','
       << csv::fmt(r.Vf) << ',' << r.scenario_id << ',' << (r.flagged ? 1 : 0) << '\n';
}

Dataset read_csv(std::istream& is) {
  csv::Reader reader(is, kHeader);
  Dataset out;
  std::vector<std::string_view> f;
  while (reader.next(f)) {
    FeatureRow r;
    r.dVt = csv::parse_double(f[0]);
    r.omega = csv::parse_double(f[1]);
    r.P = csv::parse_double(f[2]);
    r.Q = csv::parse_double(f[3]);
    r.dVq = csv::parse_double(f[4]);
    r.delta = csv::parse_double(f[5]);
    r.Vf = csv::parse_double(f[6]);
    r.scenario_id = std::string(f[7]);
    r.flagged = csv::parse_int(f[8]) != 0;
    r.t = std::numeric_limits<double>::quiet_NaN();
    if (out.provenance.traces.empty() || out.provenance.traces.back() != r.scenario_id) {
      if (std::find(out.provenance.traces.begin(), out.provenance.traces.end(), r.scenario_id) ==
          out.provenance.traces.end())
        out.provenance.traces.push_back(r.scenario_id);
    }
    out.provenance.flagged_rows += r.flagged ? 1 : 0;
    out.rows.push_back(std::move(r));
  }
  return out;
}

}  // namespace exfl::data
