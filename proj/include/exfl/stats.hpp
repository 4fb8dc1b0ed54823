#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "exfl/dataset.hpp"

namespace exfl::stats {

/// Product-moment correlation; throws CONSTANT_SERIES / LENGTH_MISMATCH.
double pearson(std::span<const double> x, std::span<const double> y);

/// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

/// P(|T| >= |t|) for Student's t with `df` degrees of freedom.
double student_t_two_tailed(double t, double df);

struct Significance {
  double t_stat = 0;
  double p_value = 1;
};

/// t = r sqrt((n-2)/(1-r^2)), two-tailed p with n-2 degrees of freedom.
Significance correlation_significance(double r, std::size_t n);

struct CorrelationEntry {
  std::string feature;
  double r = 0;
  double t_stat = 0;
  double p_value = 1;
  std::size_t n = 0;
};

std::vector<CorrelationEntry> correlation_table(const data::Dataset& data,
                                                const std::vector<std::string>& features,
                                                std::string_view target = data::kTarget);

struct ModelSpec {
  std::string id;
  std::vector<std::string> features;
  std::string target = std::string(data::kTarget);

  void validate() const;
};

/// Coefficient-level vectors (se, t_stats, p_values) hold the intercept at
/// index 0 followed by one entry per feature.
struct RegressionFit {
  std::string model_id;
  std::vector<std::string> features;
  double beta0 = 0;
  std::vector<double> betas;
  std::vector<double> se;
  std::vector<double> t_stats;
  std::vector<double> p_values;
  double R2 = 0;
  double R2_adj = 0;
  double S = 0;
  double SS_res = 0;
  double SS_tot = 0;
  std::vector<double> vif;
  std::vector<double> residuals;
  std::vector<double> fitted;
  std::size_t n = 0;
  std::size_t p = 0;

  double predict(std::span<const double> x) const;
  double p_value_of(std::string_view feature) const;
};

inline constexpr double kRankTolerance = 1e-10;

/// Least squares with intercept on a predictor matrix (n x p, no intercept
/// column). VIFs are left empty; ols_fit on a dataset fills them.
RegressionFit ols_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

RegressionFit ols_fit(const data::Dataset& data, const ModelSpec& model);

/// VIF_j = 1 / (1 - R^2_j); 1 for single-feature sets, +inf when the
/// auxiliary regression is singular or exact.
std::vector<double> vif(const data::Dataset& data, const std::vector<std::string>& features);
std::vector<double> vif(const Eigen::MatrixXd& X);

struct Histogram {
  std::vector<double> edges;  // counts.size() + 1 entries
  std::vector<std::size_t> counts;
};

struct AssessmentReport {
  std::vector<double> std_residuals;
  double coverage_pm2 = 1;
  bool passes_95 = true;
  Histogram histogram;
  std::vector<std::pair<double, double>> normal_plot_points;  // (theoretical quantile, ordered e/S)
  std::vector<double> theoretical_quantile;  // per row, matched to std_residuals
};

inline constexpr double kResidualBand = 2.0;
inline constexpr double kCoverageRequired = 0.95;
inline constexpr double kHistogramBinWidth = 0.5;

AssessmentReport assess(const RegressionFit& fit);

/// MODEL_1 .. MODEL_8 over the voltage-deviation and stabilizing-signal pairs.
std::vector<ModelSpec> enumerate_paper_models();
ModelSpec find_model(const std::vector<ModelSpec>& models, std::string_view id);

struct ForwardStep {
  std::string feature;
  double R2_adj = 0;
  double p_value = 1;
  double max_vif = 1;
};

struct ForwardSelection {
  ModelSpec model;
  std::vector<ForwardStep> steps;
};

/// Greedy forward selection gated by coefficient significance and VIF.
ForwardSelection forward_select(const data::Dataset& data, std::vector<std::string> candidates,
                                double alpha, double vif_cap,
                                std::string_view target = data::kTarget);

}  // namespace exfl::stats
