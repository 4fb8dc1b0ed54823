#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "exfl/dataset.hpp"
#include "exfl/error.hpp"

using namespace exfl;
using namespace exfl::data;

namespace {

smib::SimSignals sig(double vd, double vq, double t = 0) {
  smib::SimSignals s;
  s.t = t;
  s.V_d = vd;
  s.V_q = vq;
  s.V_T = std::hypot(vd, vq);
  s.delta = std::atan2(vd, vq);
  s.P = 0.5;
  s.Q = 0.1;
  s.V_f = 1.4 + t;
  return s;
}

smib::SimTrace trace(const std::string& id, std::size_t n) {
  smib::SimTrace tr;
  tr.scenario_id = id;
  tr.V_ref = 1.0;
  for (std::size_t k = 0; k < n; ++k) tr.signals.push_back(sig(0.3, 0.9, 0.005 * static_cast<double>(k)));
  return tr;
}

// Five classes, rows tagged by a running index stored in Vf.
Dataset classes(std::size_t per_class) {
  Dataset d;
  int idx = 0;
  for (int c = 0; c < 5; ++c)
    for (std::size_t k = 0; k < per_class; ++k) {
      FeatureRow r;
      r.scenario_id = "C" + std::to_string(c) + "/x";
      r.Vf = idx++;
      d.rows.push_back(r);
    }
  return d;
}

std::vector<double> vf(const Dataset& d) { return d.column("Vf"); }

}  // namespace

TEST(Features, Definitions) {
  auto s = sig(0.0, 0.98);
  EXPECT_NEAR(derive_features(s, 1.0).dVt, 0.02, 1e-15);
  const auto r = derive_features(sig(0.6, 0.8), 1.0);
  EXPECT_NEAR(r.dVq, 0.0, 1e-15);
  EXPECT_NEAR(r.dVt, 0.0, 1e-15);
  EXPECT_EQ(derive_features(sig(0.0, 1.0), 1.0).dVq, 0.0);
  EXPECT_FALSE(r.flagged);
}

TEST(Features, DirectAxisVariant) {
  FeatureOptions opt;
  opt.axis = VoltageAxis::Direct;
  const auto r = derive_features(sig(0.5, 0.8), 1.0, opt);
  EXPECT_NEAR(r.dVq, std::sqrt(1 - 0.64) - 0.5, 1e-15);
}

TEST(Features, UndefinedQuadratureReference) {
  const auto s = sig(1.1, 0.2);
  const auto r = derive_features(s, 1.0);
  EXPECT_TRUE(r.flagged);
  EXPECT_NEAR(r.dVq, -0.2, 1e-15);  // reference clamped to 0
  FeatureOptions opt;
  opt.qref_policy = QrefPolicy::Throw;
  try {
    derive_features(s, 1.0, opt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::QrefUndefined);
  }
}

TEST(Pool, ConcatenatesAndCountsFlags) {
  std::vector<smib::SimTrace> tr;
  for (int i = 0; i < 5; ++i) tr.push_back(trace("T" + std::to_string(i) + "/a", 2000));
  tr[2].signals[10] = sig(1.05, 0.1);
  tr[2].signals[11] = sig(1.02, 0.1);
  const std::vector<double> vref(5, 1.0);
  const auto d = pool_scenarios(tr, vref);
  EXPECT_EQ(d.size(), 10000u);
  EXPECT_EQ(d.provenance.flagged_rows, 2u);
  EXPECT_EQ(d.provenance.traces.size(), 5u);
  FeatureOptions drop;
  drop.qref_policy = QrefPolicy::Drop;
  const auto dd = pool_scenarios(tr, vref, drop);
  EXPECT_EQ(dd.size(), 9998u);
  EXPECT_EQ(dd.provenance.flagged_rows, 2u);
}

TEST(Pool, EquilibriumTraceGivesIdenticalRows) {
  const std::vector<smib::SimTrace> tr{trace("EQ/a", 50)};
  const std::vector<double> vref{1.0};
  const auto d = pool_scenarios(tr, vref);
  for (const auto& r : d.rows) {
    EXPECT_NEAR(r.dVq, d.rows[0].dVq, 1e-6);
    EXPECT_NEAR(r.dVt, d.rows[0].dVt, 1e-6);
  }
}

TEST(Pool, Errors) {
  std::vector<smib::SimTrace> tr{trace("A/a", 3)};
  std::vector<double> two{1.0, 1.0};
  try {
    pool_scenarios(tr, two);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LengthMismatch);
  }
  tr[0].signals.clear();
  std::vector<double> one{1.0};
  try {
    pool_scenarios(tr, one);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyTrace);
  }
}

TEST(LargestRemainder, RoundingRule) {
  const double w[3] = {0.7, 0.15, 0.15};
  EXPECT_EQ(largest_remainder(w, 50), (std::vector<std::size_t>{35, 8, 7}));
  const double w2[3] = {0.8, 0.1, 0.1};
  EXPECT_EQ(largest_remainder(w2, 10), (std::vector<std::size_t>{8, 1, 1}));
  const double eq[5] = {1, 1, 1, 1, 1};
  EXPECT_EQ(largest_remainder(eq, 7), (std::vector<std::size_t>{2, 2, 1, 1, 1}));
}

TEST(Subsample, ProportionalAndDeterministic) {
  const auto d = classes(100);
  const auto s = stratified_subsample(d, 50, 11);
  std::map<std::string, int> per;
  for (const auto& r : s.rows) ++per[r.scenario_id];
  for (const auto& [_, n] : per) EXPECT_EQ(n, 10);
  EXPECT_EQ(vf(s), vf(stratified_subsample(d, 50, 11)));
  EXPECT_NE(vf(s), vf(stratified_subsample(d, 50, 12)));
  auto v = vf(s);
  std::sort(v.begin(), v.end());
  EXPECT_TRUE(std::adjacent_find(v.begin(), v.end()) == v.end());  // no replacement
}

TEST(Subsample, FullDrawIsPermutation) {
  const auto d = classes(7);
  auto v = vf(stratified_subsample(d, d.size(), 3));
  std::sort(v.begin(), v.end());
  EXPECT_EQ(v, vf(d));
}

TEST(Subsample, ExcludesFlaggedAndReportsShortfall) {
  auto d = classes(10);
  for (int k = 0; k < 5; ++k) d.rows[static_cast<std::size_t>(k)].flagged = true;
  const auto s = stratified_subsample(d, 45, 1);
  for (const auto& r : s.rows) EXPECT_FALSE(r.flagged);
  try {
    stratified_subsample(d, 46, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientRows);
  }
}

TEST(Split, SizesAndPartition) {
  const auto d = classes(10);  // 50 rows
  const auto [tr, va, te] = split(d, {0.7, 0.15, 0.15, 5});
  EXPECT_EQ(tr.size(), 35u);
  EXPECT_EQ(va.size(), 8u);
  EXPECT_EQ(te.size(), 7u);
  auto all = vf(tr);
  for (double x : vf(va)) all.push_back(x);
  for (double x : vf(te)) all.push_back(x);
  std::sort(all.begin(), all.end());
  EXPECT_EQ(all, vf(d));

  Dataset ten;
  ten.rows.assign(d.rows.begin(), d.rows.begin() + 10);
  const auto [a, b, c] = split(ten, {0.8, 0.1, 0.1, 1});
  EXPECT_EQ(a.size(), 8u);
  EXPECT_EQ(b.size(), 1u);
  EXPECT_EQ(c.size(), 1u);
}

TEST(Split, DegenerateAndInvalid) {
  Dataset two = classes(1);
  two.rows.resize(2);
  try {
    split(two, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateSplit);
  }
  EXPECT_THROW(split(classes(10), {0.5, 0.2, 0.2, 1}), Error);
}

TEST(DatasetCsv, RoundTripIsExact) {
  std::vector<smib::SimTrace> tr{trace("A/a", 20), trace("B/b", 20)};
  tr[1].signals[3] = sig(1.01, 0.1);
  tr[0].signals[5].V_f = 1.0 / 3.0;
  const std::vector<double> vref{1.0, 1.1};
  const auto d = pool_scenarios(tr, vref);
  std::stringstream ss;
  ss << "# config=abc\n";
  write_csv(ss, d);
  const auto back = read_csv(ss);
  ASSERT_EQ(back.size(), d.size());
  for (const auto& name : feature_names()) EXPECT_EQ(back.column(name), d.column(name));
  EXPECT_EQ(back.column("Vf"), d.column("Vf"));
  EXPECT_EQ(back.provenance.flagged_rows, 1u);
  EXPECT_EQ(back.provenance.traces, d.provenance.traces);
}

TEST(DatasetCsv, RejectsWrongHeader) {
  std::stringstream ss("a,b,c\n1,2,3\n");
  EXPECT_THROW(read_csv(ss), Error);
}
