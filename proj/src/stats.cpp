#include "exfl/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include <Eigen/SVD>
#include <boost/math/distributions/normal.hpp>

#include "exfl/error.hpp"

namespace exfl::stats {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::MatrixXd predictors(const data::Dataset& data, const std::vector<std::string>& features) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(features.size()));
  for (std::size_t i = 0; i < data.size(); ++i)
    for (std::size_t j = 0; j < features.size(); ++j)
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = data::value(data.rows[i], features[j]);
  return X;
}

Eigen::VectorXd response(const data::Dataset& data, std::string_view target) {
  const auto col = data.column(target);
  return Eigen::Map<const Eigen::VectorXd>(col.data(), static_cast<Eigen::Index>(col.size()));
}

double p_from_t(double t, double df) {
  if (std::isnan(t)) return 1.0;
  return student_t_two_tailed(t, df);
}

}  // namespace

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw Error(ErrorCode::LengthMismatch,
                std::to_string(x.size()) + " vs " + std::to_string(y.size()) + " values");
  if (x.size() < 3) throw Error(ErrorCode::InvalidArgument, "pearson needs at least 3 pairs");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) throw Error(ErrorCode::ConstantSeries, "zero variance series");
  const double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

std::vector<CorrelationEntry> correlation_table(const data::Dataset& data,
                                                const std::vector<std::string>& features,
                                                std::string_view target) {
  const auto y = data.column(target);
  std::vector<CorrelationEntry> out;
  for (const auto& f : features) {
    const auto x = data.column(f);
    CorrelationEntry e;
    e.feature = f;
    e.n = x.size();
    e.r = pearson(x, y);
    const auto sig = correlation_significance(e.r, e.n);
    e.t_stat = sig.t_stat;
    e.p_value = sig.p_value;
    out.push_back(e);
  }
  return out;
}

void ModelSpec::validate() const {
  if (features.empty()) throw Error(ErrorCode::InvalidArgument, "model '" + id + "' has no features");
  std::set<std::string> seen;
  for (const auto& f : features) {
    if (!seen.insert(f).second)
      throw Error(ErrorCode::InvalidArgument, "model '" + id + "' repeats feature '" + f + "'");
    if (std::find(data::feature_names().begin(), data::feature_names().end(), f) ==
        data::feature_names().end())
      throw Error(ErrorCode::InvalidArgument, "model '" + id + "' uses unknown feature '" + f + "'");
  }
}

double RegressionFit::predict(std::span<const double> x) const {
  if (x.size() != betas.size())
    throw Error(ErrorCode::DimensionMismatch, "predictor count does not match the fit");
  double y = beta0;
  for (std::size_t j = 0; j < x.size(); ++j) y += betas[j] * x[j];
  return y;
}

double RegressionFit::p_value_of(std::string_view feature) const {
  for (std::size_t j = 0; j < features.size(); ++j)
    if (features[j] == feature) return p_values[j + 1];
  throw Error(ErrorCode::InvalidArgument, "feature '" + std::string(feature) + "' not in fit");
}

RegressionFit ols_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  const auto n = X.rows();
  const auto p = X.cols();
  if (y.size() != n) throw Error(ErrorCode::LengthMismatch, "design and response row counts differ");
  if (n <= p + 1)
    throw Error(ErrorCode::InvalidArgument, "need n > p + 1 (n=" + std::to_string(n) +
                                                ", p=" + std::to_string(p) + ")");

  Eigen::MatrixXd A(n, p + 1);
  A.col(0).setOnes();
  A.rightCols(p) = X;

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (!(sv(sv.size() - 1) > kRankTolerance * sv(0)))
    throw Error(ErrorCode::RankDeficient, "design matrix is numerically rank deficient");

  const Eigen::VectorXd coef = svd.solve(y);
  const Eigen::VectorXd fitted = A * coef;
  const Eigen::VectorXd resid = y - fitted;

  RegressionFit fit;
  fit.n = static_cast<std::size_t>(n);
  fit.p = static_cast<std::size_t>(p);
  fit.beta0 = coef(0);
  fit.betas.assign(coef.data() + 1, coef.data() + coef.size());
  fit.residuals.assign(resid.data(), resid.data() + n);
  fit.fitted.assign(fitted.data(), fitted.data() + n);

  const double y_mean = y.mean();
  fit.SS_res = resid.squaredNorm();
  fit.SS_tot = (y.array() - y_mean).square().sum();
  if (fit.SS_tot == 0) throw Error(ErrorCode::ConstantSeries, "response has zero variance");
  const double df = static_cast<double>(n - p - 1);
  fit.R2 = std::clamp(1.0 - fit.SS_res / fit.SS_tot, 0.0, 1.0);
  fit.R2_adj = 1.0 - (1.0 - fit.R2) * static_cast<double>(n - 1) / df;
  fit.S = std::sqrt(fit.SS_res / df);

  // (A'A)^-1 = V diag(1/s^2) V'
  const Eigen::MatrixXd V = svd.matrixV();
  const Eigen::VectorXd inv_s2 = sv.array().square().inverse();
  for (Eigen::Index j = 0; j <= p; ++j) {
    const double c_jj = (V.row(j).array().square() * inv_s2.transpose().array()).sum();
    const double se = fit.S * std::sqrt(c_jj);
    double t;
    if (se > 0) {
      t = coef(j) / se;
    } else {
      t = coef(j) == 0 ? 0.0 : std::copysign(kInf, coef(j));
    }
    fit.se.push_back(se);
    fit.t_stats.push_back(t);
    fit.p_values.push_back(p_from_t(t, df));
  }
  return fit;
}

std::vector<double> vif(const Eigen::MatrixXd& X) {
  const auto p = X.cols();
  if (p == 1) return {1.0};
  std::vector<double> out;
  for (Eigen::Index j = 0; j < p; ++j) {
    Eigen::MatrixXd others(X.rows(), p - 1);
    for (Eigen::Index k = 0, c = 0; k < p; ++k)
      if (k != j) others.col(c++) = X.col(k);
    try {
      const auto aux = ols_fit(others, X.col(j));
      out.push_back(aux.R2 >= 1.0 ? kInf : 1.0 / (1.0 - aux.R2));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::RankDeficient && e.code() != ErrorCode::ConstantSeries) throw;
      out.push_back(kInf);
    }
  }
  return out;
}

std::vector<double> vif(const data::Dataset& data, const std::vector<std::string>& features) {
  if (features.empty()) throw Error(ErrorCode::InvalidArgument, "vif needs at least one feature");
  return vif(predictors(data, features));
}

RegressionFit ols_fit(const data::Dataset& data, const ModelSpec& model) {
  model.validate();
  const Eigen::MatrixXd X = predictors(data, model.features);
  RegressionFit fit = ols_fit(X, response(data, model.target));
  fit.model_id = model.id;
  fit.features = model.features;
  fit.vif = vif(X);
  return fit;
}

AssessmentReport assess(const RegressionFit& fit) {
  const std::size_t n = fit.residuals.size();
  AssessmentReport rep;
  if (fit.S <= 0) {
    rep.std_residuals.assign(n, 0.0);
    rep.coverage_pm2 = 1.0;
    rep.passes_95 = true;
    rep.histogram.edges = {0.0, kHistogramBinWidth};
    rep.histogram.counts = {n};
    rep.theoretical_quantile.assign(n, 0.0);
    return rep;
  }
  if (n < 10) throw Error(ErrorCode::InvalidArgument, "assessment needs at least 10 residuals");

  std::size_t inside = 0;
  for (double e : fit.residuals) {
    const double z = e / fit.S;
    rep.std_residuals.push_back(z);
    if (std::abs(z) <= kResidualBand) ++inside;
  }
  rep.coverage_pm2 = static_cast<double>(inside) / static_cast<double>(n);
  rep.passes_95 = rep.coverage_pm2 >= kCoverageRequired;

  const auto [mn, mx] = std::minmax_element(rep.std_residuals.begin(), rep.std_residuals.end());
  const double lo = std::floor(*mn / kHistogramBinWidth) * kHistogramBinWidth;
  double hi = std::ceil(*mx / kHistogramBinWidth) * kHistogramBinWidth;
  if (hi <= lo) hi = lo + kHistogramBinWidth;
  const auto bins = static_cast<std::size_t>(std::llround((hi - lo) / kHistogramBinWidth));
  for (std::size_t b = 0; b <= bins; ++b) rep.histogram.edges.push_back(lo + kHistogramBinWidth * b);
  rep.histogram.counts.assign(bins, 0);
  for (double z : rep.std_residuals) {
    auto b = static_cast<std::size_t>(std::floor((z - lo) / kHistogramBinWidth));
    ++rep.histogram.counts[std::min(b, bins - 1)];
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return rep.std_residuals[a] < rep.std_residuals[b];
  });
  const boost::math::normal standard;
  rep.theoretical_quantile.assign(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double q = boost::math::quantile(standard, (static_cast<double>(k) + 0.5) / static_cast<double>(n));
    rep.theoretical_quantile[order[k]] = q;
    rep.normal_plot_points.emplace_back(q, rep.std_residuals[order[k]]);
  }
  return rep;
}

std::vector<ModelSpec> enumerate_paper_models() {
  return {
      {"MODEL_1", {"dVq"}},          {"MODEL_2", {"dVt"}},
      {"MODEL_3", {"dVq", "Q"}},     {"MODEL_4", {"dVt", "P"}},
      {"MODEL_5", {"dVq", "P"}},     {"MODEL_6", {"dVt", "Q"}},
      {"MODEL_7", {"dVt", "delta"}}, {"MODEL_8", {"dVq", "delta"}},
  };
}

ModelSpec find_model(const std::vector<ModelSpec>& models, std::string_view id) {
  for (const auto& m : models)
    if (m.id == id) return m;
  throw Error(ErrorCode::InvalidArgument, "unknown model '" + std::string(id) + "'");
}

ForwardSelection forward_select(const data::Dataset& data, std::vector<std::string> candidates,
                                double alpha, double vif_cap, std::string_view target) {
  if (candidates.empty()) throw Error(ErrorCode::InvalidArgument, "no candidate features");
  if (!(alpha > 0 && alpha < 1)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0,1)");
  if (!(vif_cap >= 1)) throw Error(ErrorCode::InvalidArgument, "vif_cap must be >= 1");
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  ForwardSelection out;
  out.model.id = "FORWARD";
  out.model.target = std::string(target);
  double current = -kInf;
  while (true) {
    bool found = false;
    ForwardStep best;
    for (const auto& c : candidates) {
      if (std::find(out.model.features.begin(), out.model.features.end(), c) !=
          out.model.features.end())
        continue;
      ModelSpec trial = out.model;
      trial.features.push_back(c);
      RegressionFit fit;
      try {
        fit = ols_fit(data, trial);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::RankDeficient || e.code() == ErrorCode::InvalidArgument) continue;
        throw;
      }
      const double p = fit.p_value_of(c);
      const double max_vif = *std::max_element(fit.vif.begin(), fit.vif.end());
      if (!(p < alpha) || !(max_vif <= vif_cap)) continue;
      if (!found || fit.R2_adj > best.R2_adj) {
        best = {c, fit.R2_adj, p, max_vif};
        found = true;
      }
    }
    if (!found || !(best.R2_adj > current)) {
      if (out.model.features.empty())
        throw Error(ErrorCode::NoFeatureQualifies, "no candidate passes the significance and VIF gates");
      break;
    }
    out.model.features.push_back(best.feature);
    out.steps.push_back(best);
    current = best.R2_adj;
  }
  return out;
}

}  // namespace exfl::stats
