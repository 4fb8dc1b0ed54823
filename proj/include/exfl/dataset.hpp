#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "exfl/smib.hpp"

namespace exfl::data {

/// Candidate controller inputs and the excitation voltage target for one
/// simulation sample.
struct FeatureRow {
  double dVt = 0;    // V_ref - V_T
  double omega = 0;
  double P = 0;
  double Q = 0;
  double dVq = 0;    // sqrt(1 - V_d^2) - V_q
  double delta = 0;
  double Vf = 0;     // target
  std::string scenario_id;
  bool flagged = false;  // quadrature reference undefined (V_d^2 > 1), clamped
  double t = 0;      // sample time; not persisted in CSV
};

inline constexpr std::string_view kTarget = "Vf";

/// Feature names in table order.
const std::vector<std::string>& feature_names();
double value(const FeatureRow& row, std::string_view name);

struct Provenance {
  std::vector<std::string> traces;
  std::size_t flagged_rows = 0;
};

struct Dataset {
  std::vector<FeatureRow> rows;
  Provenance provenance;
  std::uint64_t seed = 0;

  std::size_t size() const { return rows.size(); }
  std::vector<double> column(std::string_view name) const;
};

enum class QrefPolicy {
  ClampAndFlag,  // V_q_ref := 0, row kept and flagged
  Drop,          // row omitted from pooled data
  Throw,         // QREF_UNDEFINED
};

enum class VoltageAxis {
  Quadrature,
  Direct,  // dVq column carries sqrt(1 - V_q^2) - V_d instead
};

struct FeatureOptions {
  QrefPolicy qref_policy = QrefPolicy::ClampAndFlag;
  VoltageAxis axis = VoltageAxis::Quadrature;
};

FeatureRow derive_features(const smib::SimSignals& s, double V_ref, const FeatureOptions& opt = {});

/// Every sample of every trace becomes one row, in trace order then time.
Dataset pool_scenarios(std::span<const smib::SimTrace> traces, std::span<const double> v_ref,
                       const FeatureOptions& opt = {});

/// n rows without replacement, allocated to scenario classes by
/// largest-remainder proportional rounding, uniform within each class.
Dataset stratified_subsample(const Dataset& data, std::size_t n, std::uint64_t seed,
                             bool exclude_flagged = true);

struct SplitSpec {
  double train_frac = 0.70;
  double val_frac = 0.15;
  double test_frac = 0.15;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Sizes for `total` items; ties in the remainders go to the earlier part.
std::vector<std::size_t> largest_remainder(std::span<const double> weights, std::size_t total);

std::tuple<Dataset, Dataset, Dataset> split(const Dataset& data, const SplitSpec& spec);

/// CSV: dVt,omega,P,Q,dVq,delta,Vf,scenario_id,flagged
void write_csv(std::ostream& os, const Dataset& data);
Dataset read_csv(std::istream& is);

}  // namespace exfl::data
