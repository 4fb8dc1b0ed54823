#include <cmath>
#include <random>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "exfl/error.hpp"
#include "exfl/stats.hpp"
#include "oracles.hpp"

using namespace exfl;
using namespace exfl::stats;

namespace {

data::Dataset make_ds(const std::vector<std::pair<std::string, std::vector<double>>>& cols,
                      const std::vector<double>& y) {
  data::Dataset d;
  d.rows.resize(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    auto& r = d.rows[i];
    r.scenario_id = "X/x";
    r.Vf = y[i];
    for (const auto& [name, v] : cols) {
      if (name == "dVt") r.dVt = v[i];
      else if (name == "omega") r.omega = v[i];
      else if (name == "P") r.P = v[i];
      else if (name == "Q") r.Q = v[i];
      else if (name == "dVq") r.dVq = v[i];
      else if (name == "delta") r.delta = v[i];
    }
  }
  return d;
}

}  // namespace

TEST(Pearson, HandComputedCases) {
  const std::vector<double> x1{1, 2, 3}, y1{2, 4, 6};
  EXPECT_NEAR(pearson(x1, y1), 1.0, 1e-12);
  const std::vector<double> x2{0, 1, 2}, y2{0, 1, 0};
  EXPECT_NEAR(pearson(x2, y2), 0.0, 1e-12);
  const std::vector<double> x3{1, 2, 3, 4}, y3{2, 1, 4, 3};
  EXPECT_NEAR(pearson(x3, y3), 0.6, 1e-12);
  const std::vector<double> neg{6, 4, 2};
  EXPECT_NEAR(pearson(x1, neg), -1.0, 1e-12);
}

TEST(Pearson, Errors) {
  const std::vector<double> c{1, 1, 1}, x{1, 2, 3}, short_x{1, 2};
  try {
    pearson(c, x);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConstantSeries);
  }
  try {
    pearson(short_x, x);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LengthMismatch);
  }
}

TEST(StudentT, MatchesBoostDistribution) {
  for (double df : {1.0, 2.0, 3.0, 7.0, 25.0, 48.0, 200.0}) {
    const boost::math::students_t dist(df);
    for (double t : {0.01, 0.3, 1.0, 2.0, 2.5, 5.02, 10.0, 40.0}) {
      const double ref = 2 * boost::math::cdf(boost::math::complement(dist, t));
      const double got = student_t_two_tailed(t, df);
      EXPECT_NEAR(got, ref, 1e-12 + 1e-9 * ref) << "df=" << df << " t=" << t;
      EXPECT_EQ(student_t_two_tailed(-t, df), got);
    }
  }
  EXPECT_EQ(student_t_two_tailed(0.0, 10), 1.0);
  EXPECT_EQ(student_t_two_tailed(INFINITY, 10), 0.0);
}

TEST(StudentT, IncompleteBetaMatchesBoost) {
  for (double a : {0.5, 1.0, 3.5, 24.0})
    for (double b : {0.5, 2.0, 9.0})
      for (double x : {0.001, 0.1, 0.5, 0.77, 0.999}) {
        const double ref = boost::math::ibeta(a, b, x);
        EXPECT_NEAR(incomplete_beta(a, b, x), ref, 1e-13 + 1e-10 * ref) << a << ' ' << b << ' ' << x;
      }
}

TEST(CorrelationSignificance, Cases) {
  EXPECT_EQ(correlation_significance(0.0, 30).p_value, 1.0);
  EXPECT_EQ(correlation_significance(1.0, 30).p_value, 0.0);
  const auto s = correlation_significance(0.587, 50);
  EXPECT_NEAR(s.t_stat, 0.587 * std::sqrt(48 / (1 - 0.587 * 0.587)), 1e-12);
  EXPECT_NEAR(s.t_stat, 5.02, 0.01);
  EXPECT_LT(s.p_value, 1e-4);
  EXPECT_THROW(correlation_significance(0.5, 2), Error);
}

TEST(Ols, SpecExamples) {
  auto fit = ols_fit(make_ds({{"dVt", {0, 1, 2}}}, {1, 3, 5}), {"A", {"dVt"}});
  EXPECT_NEAR(fit.beta0, 1.0, 1e-12);
  EXPECT_NEAR(fit.betas[0], 2.0, 1e-12);
  EXPECT_NEAR(fit.R2, 1.0, 1e-12);
  EXPECT_NEAR(fit.S, 0.0, 1e-12);

  fit = ols_fit(make_ds({{"dVt", {1, 2, 3, 4}}}, {3, 5, 7, 10}), {"B", {"dVt"}});
  EXPECT_NEAR(fit.beta0, 0.5, 1e-12);
  EXPECT_NEAR(fit.betas[0], 2.3, 1e-12);
  EXPECT_NEAR(fit.SS_res, 0.30, 1e-12);
  EXPECT_NEAR(fit.R2, 0.98879, 5e-6);
  EXPECT_NEAR(fit.R2_adj, 0.98318, 5e-6);
  EXPECT_NEAR(fit.S, 0.38730, 5e-6);
  EXPECT_EQ(fit.vif, std::vector<double>{1.0});
}

TEST(Ols, DuplicatedColumnIsRankDeficient) {
  const std::vector<double> x{1, 2, 3, 5, 8};
  try {
    ols_fit(make_ds({{"dVt", x}, {"dVq", x}}, {1, 0, 2, 1, 3}), {"D", {"dVt", "dVq"}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RankDeficient);
  }
}

TEST(Ols, MatchesNormalEquationsOnRandomInstances) {
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int inst = 0; inst < 200; ++inst) {
    const std::size_t p = 1 + gen() % 3;
    const std::size_t n = p + 3 + gen() % (18 - p);
    std::vector<std::vector<double>> X(p, std::vector<double>(n));
    std::vector<double> y(n);
    Eigen::MatrixXd Xe(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < p; ++j) Xe(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = X[j][i] = u(gen);
      y[i] = u(gen);
    }
    const auto ref = oracle::brute_ols(X, y);
    const auto fit = ols_fit(Xe, Eigen::Map<Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(n)));
    EXPECT_NEAR(fit.beta0, ref.coef[0], 1e-8);
    for (std::size_t j = 0; j < p; ++j) EXPECT_NEAR(fit.betas[j], ref.coef[j + 1], 1e-8);
    for (std::size_t j = 0; j <= p; ++j) EXPECT_NEAR(fit.se[j], ref.se[j], 1e-8);
    EXPECT_NEAR(fit.R2, ref.R2, 1e-8);
    EXPECT_NEAR(fit.R2_adj, ref.R2_adj, 1e-8);
    EXPECT_NEAR(fit.S, ref.S, 1e-8);

    // residuals are orthogonal to the design
    double sum = 0;
    for (double e : fit.residuals) sum += e;
    EXPECT_NEAR(sum, 0.0, 1e-10);
    for (std::size_t j = 0; j < p; ++j) {
      double dot = 0;
      for (std::size_t i = 0; i < n; ++i) dot += X[j][i] * fit.residuals[i];
      EXPECT_NEAR(dot, 0.0, 1e-10);
    }
    EXPECT_GE(fit.R2, 0.0);
    EXPECT_LE(fit.R2, 1.0);
    EXPECT_LE(fit.R2_adj, fit.R2);
  }
}

TEST(Ols, CoefficientPValuesUseResidualDegreesOfFreedom) {
  const std::vector<double> x{1, 2, 3, 4, 5, 6}, y{1.1, 1.9, 3.2, 3.9, 5.3, 5.8};
  const auto fit = ols_fit(make_ds({{"P", x}}, y), {"E", {"P"}});
  const boost::math::students_t dist(4);
  EXPECT_NEAR(fit.p_values[1], 2 * boost::math::cdf(boost::math::complement(dist, std::abs(fit.t_stats[1]))), 1e-12);
  EXPECT_NEAR(fit.p_value_of("P"), fit.p_values[1], 0.0);
}

TEST(Vif, ClosedForms) {
  // orthogonal centered columns
  const std::vector<double> a{1, -1, 1, -1}, b{1, 1, -1, -1}, y{0.3, 2, -1, 4};
  auto v = vif(make_ds({{"P", a}, {"Q", b}}, y), {"P", "Q"});
  EXPECT_NEAR(v[0], 1.0, 1e-12);
  EXPECT_NEAR(v[1], 1.0, 1e-12);

  // exactly proportional
  const std::vector<double> c{1, 2, 3, 4}, c2{2, 4, 6, 8};
  v = vif(make_ds({{"P", c}, {"Q", c2}}, y), {"P", "Q"});
  EXPECT_TRUE(std::isinf(v[0]));

  // r = 0.9 exactly: x2 = 0.9 a + sqrt(0.19) b with a, b orthonormal and centered
  std::vector<double> x2(4);
  for (int i = 0; i < 4; ++i) x2[i] = 0.9 * a[i] + std::sqrt(0.19) * b[i];
  v = vif(make_ds({{"P", a}, {"Q", x2}}, y), {"P", "Q"});
  EXPECT_NEAR(v[0], 1 / (1 - 0.81), 1e-10);
  EXPECT_NEAR(v[1], 5.263, 5e-4);
}

TEST(Vif, TwoPredictorsMatchCorrelationFormula) {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> g;
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> x1(30), x2(30), y(30);
    for (int i = 0; i < 30; ++i) {
      x1[i] = g(gen);
      x2[i] = 0.7 * x1[i] + g(gen);
      y[i] = g(gen);
    }
    const double r = pearson(x1, x2);
    const auto v = vif(make_ds({{"dVt", x1}, {"delta", x2}}, y), {"dVt", "delta"});
    EXPECT_NEAR(v[0], 1 / (1 - r * r), 1e-10);
    EXPECT_NEAR(v[1], 1 / (1 - r * r), 1e-10);
  }
}

TEST(Assess, ZeroResiduals) {
  RegressionFit fit;
  fit.residuals.assign(20, 0.0);
  fit.S = 0;
  const auto rep = assess(fit);
  EXPECT_EQ(rep.coverage_pm2, 1.0);
  EXPECT_TRUE(rep.passes_95);
}

TEST(Assess, FortySevenOfFifty) {
  RegressionFit fit;
  fit.S = 2.0;
  for (int i = 0; i < 47; ++i) fit.residuals.push_back(2.0 * (-1.9 + 3.8 * i / 46.0));
  fit.residuals.push_back(2.0 * 2.5);
  fit.residuals.push_back(2.0 * -3.0);
  fit.residuals.push_back(2.0 * 2.01);
  const auto rep = assess(fit);
  EXPECT_DOUBLE_EQ(rep.coverage_pm2, 0.94);
  EXPECT_FALSE(rep.passes_95);
  std::size_t total = 0;
  for (auto c : rep.histogram.counts) total += c;
  EXPECT_EQ(total, 50u);
  EXPECT_EQ(rep.histogram.edges.size(), rep.histogram.counts.size() + 1);
  EXPECT_EQ(rep.histogram.edges.front(), -3.0);
  EXPECT_EQ(rep.histogram.edges.back(), 2.5);
  // plotting positions are symmetric about zero
  EXPECT_NEAR(rep.normal_plot_points.front().first, -rep.normal_plot_points.back().first, 1e-12);
  EXPECT_NEAR(rep.normal_plot_points.front().first, -2.326, 1e-3);  // quantile at 0.01
  EXPECT_EQ(rep.theoretical_quantile[48], rep.normal_plot_points.front().first);
}

TEST(Models, PaperCatalogue) {
  const auto m = enumerate_paper_models();
  ASSERT_EQ(m.size(), 8u);
  EXPECT_EQ(find_model(m, "MODEL_8").features, (std::vector<std::string>{"dVq", "delta"}));
  EXPECT_EQ(find_model(m, "MODEL_2").features, (std::vector<std::string>{"dVt"}));
  EXPECT_EQ(find_model(m, "MODEL_7").features, (std::vector<std::string>{"dVt", "delta"}));
  for (const auto& s : m) EXPECT_NO_THROW(s.validate());
  EXPECT_THROW(find_model(m, "MODEL_9"), Error);
  EXPECT_THROW((ModelSpec{"X", {"dVt", "dVt"}}.validate()), Error);
  EXPECT_THROW((ModelSpec{"X", {"bogus"}}.validate()), Error);
}

TEST(ForwardSelect, ExactFeatureWinsFirst) {
  std::mt19937_64 gen(9);
  std::normal_distribution<double> g;
  std::vector<double> a(40), b(40), c(40), y(40);
  for (int i = 0; i < 40; ++i) {
    a[i] = g(gen);
    b[i] = g(gen);
    c[i] = g(gen);
    y[i] = 3 * b[i] - 1;
  }
  const auto sel = forward_select(make_ds({{"P", a}, {"Q", b}, {"delta", c}}, y), {"P", "Q", "delta"}, 0.05, 10);
  ASSERT_FALSE(sel.steps.empty());
  EXPECT_EQ(sel.steps[0].feature, "Q");
  EXPECT_NEAR(ols_fit(make_ds({{"Q", b}}, y), {"Q", {"Q"}}).R2, 1.0, 1e-12);
}

TEST(ForwardSelect, NoiseTargetQualifiesNothing) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> g;
  const int n = 40;
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = g(gen);
    X(i, 1) = g(gen);
    y(i) = g(gen);
  }
  // remove every component of y explained by the candidates
  Eigen::MatrixXd A(n, 3);
  A << Eigen::VectorXd::Ones(n), X;
  y -= A * A.colPivHouseholderQr().solve(y);
  y.array() += 5.0;
  const std::vector<double> x0(X.col(0).data(), X.col(0).data() + n), x1(X.col(1).data(), X.col(1).data() + n),
      yy(y.data(), y.data() + n);
  const auto d = make_ds({{"P", x0}, {"Q", x1}}, yy);
  for (const auto& e : correlation_table(d, {"P", "Q"})) ASSERT_GT(e.p_value, 0.5);
  try {
    forward_select(d, {"P", "Q"}, 0.05, 10);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoFeatureQualifies);
  }
}

TEST(ForwardSelect, VifCapBlocksCollinearAddition) {
  std::mt19937_64 gen(4);
  std::normal_distribution<double> g;
  std::vector<double> a(60), b(60), y(60);
  for (int i = 0; i < 60; ++i) {
    a[i] = g(gen);
    b[i] = a[i] + 0.05 * g(gen);  // VIF around 400
    y[i] = a[i] + 0.5 * b[i] + 0.1 * g(gen);
  }
  const auto sel = forward_select(make_ds({{"P", a}, {"Q", b}}, y), {"P", "Q"}, 0.05, 10);
  EXPECT_EQ(sel.steps.size(), 1u);
  for (const auto& s : sel.steps) EXPECT_LE(s.max_vif, 10.0);
}
