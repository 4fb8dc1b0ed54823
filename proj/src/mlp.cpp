#include "exfl/mlp.hpp"

#include <chrono>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include <Eigen/Cholesky>

#include "exfl/csv.hpp"
#include "exfl/error.hpp"
#include "exfl/rng.hpp"

namespace exfl::mlp {

namespace {

constexpr double kMuFloor = 1e-20;

double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

// Normal equations of the linearized problem, built once per epoch and
// reused across damping trials.
struct LmSystem {
  Eigen::MatrixXd JtJ;
  Eigen::VectorXd Jte;
  double sse = 0;
};

LmSystem build_system(const MlpNet& net, const Eigen::MatrixXd& Z, const Eigen::VectorXd& t) {
  const Eigen::VectorXd e = t - net.forward_normalized_batch(Z);
  const Eigen::MatrixXd J = jacobian(net, Z);
  LmSystem sys;
  const auto W = static_cast<Eigen::Index>(net.weight_count());
  sys.JtJ = Eigen::MatrixXd::Zero(W, W);
  sys.JtJ.selfadjointView<Eigen::Lower>().rankUpdate(J.transpose());
  sys.JtJ.triangularView<Eigen::StrictlyUpper>() = sys.JtJ.transpose();
  sys.Jte = J.transpose() * e;
  sys.sse = e.squaredNorm();
  return sys;
}

LmStep trial(const MlpNet& net, const LmSystem& sys, const Eigen::MatrixXd& Z,
             const Eigen::VectorXd& t, double mu, const TrainConfig& config) {
  if (!(mu > 0)) throw Error(ErrorCode::InvalidArgument, "damping must be positive");
  if (!sys.JtJ.allFinite() || !sys.Jte.allFinite())
    throw Error(ErrorCode::SingularSystem, "non-finite Jacobian or residual");
  LmStep out{net, sys.sse, mu, false};

  Eigen::MatrixXd A = sys.JtJ;
  A.diagonal().array() += mu;
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() != Eigen::Success) {
    // not positive definite at this damping; more damping will fix it
    out.mu = mu * config.mu_inc;
    return out;
  }
  const Eigen::VectorXd dw = llt.solve(sys.Jte);
  if (!dw.allFinite()) throw Error(ErrorCode::SingularSystem, "damped normal solve produced non-finite step");
  if (dw.isZero(0.0)) {
    out.accepted = true;
    out.mu = std::max(mu * config.mu_dec, kMuFloor);
    return out;
  }
  MlpNet cand = net;
  cand.set_weights(net.weights() + dw);
  const double sse = (t - cand.forward_normalized_batch(Z)).squaredNorm();
  if (sse < sys.sse) {
    out.net = std::move(cand);
    out.sse = sse;
    out.accepted = true;
    out.mu = std::max(mu * config.mu_dec, kMuFloor);
  } else {
    out.mu = mu * config.mu_inc;
  }
  return out;
}

double mse_original(const MlpNet& net, const Eigen::MatrixXd& Z, const Eigen::VectorXd& y) {
  const double half = net.target_scale.half_range(0), center = net.target_scale.center(0);
  const Eigen::VectorXd pred = (net.forward_normalized_batch(Z).array() * half + center).matrix();
  return (y - pred).squaredNorm() / static_cast<double>(y.size());
}

void check_batch(const Batch& b, std::size_t n_in, const char* name) {
  if (b.size() == 0) throw Error(ErrorCode::InvalidArgument, std::string(name) + " split is empty");
  if (static_cast<std::size_t>(b.X.cols()) != n_in || b.X.rows() != b.y.size())
    throw Error(ErrorCode::DimensionMismatch, std::string(name) + " split has inconsistent shape");
  if (!b.X.allFinite() || !b.y.allFinite())
    throw Error(ErrorCode::InvalidArgument, std::string(name) + " split contains non-finite values");
}

}  // namespace

Scaler Scaler::identity(std::size_t dims) {
  const auto d = static_cast<Eigen::Index>(dims);
  return {Eigen::VectorXd::Zero(d), Eigen::VectorXd::Ones(d)};
}

Scaler Scaler::fit(const Eigen::MatrixXd& X) {
  if (X.rows() == 0) throw Error(ErrorCode::InvalidArgument, "cannot fit scaling on zero rows");
  Scaler s;
  const Eigen::VectorXd lo = X.colwise().minCoeff().transpose();
  const Eigen::VectorXd hi = X.colwise().maxCoeff().transpose();
  s.center = (hi + lo) / 2.0;
  s.half_range = (hi - lo) / 2.0;
  for (Eigen::Index j = 0; j < s.half_range.size(); ++j)
    if (!(s.half_range(j) > 0)) s.half_range(j) = 1.0;
  return s;
}

Eigen::MatrixXd Scaler::normalize(const Eigen::MatrixXd& X) const {
  return ((X.rowwise() - center.transpose()).array().rowwise() / half_range.transpose().array()).matrix();
}

Eigen::MatrixXd Scaler::denormalize(const Eigen::MatrixXd& Z) const {
  return ((Z.array().rowwise() * half_range.transpose().array()).matrix().rowwise() + center.transpose());
}

Eigen::VectorXd MlpNet::weights() const {
  Eigen::VectorXd w(static_cast<Eigen::Index>(weight_count()));
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < W1.rows(); ++i)
    for (Eigen::Index j = 0; j < W1.cols(); ++j) w(k++) = W1(i, j);
  for (Eigen::Index j = 0; j < W2.size(); ++j) w(k++) = W2(j);
  return w;
}

void MlpNet::set_weights(const Eigen::VectorXd& w) {
  if (static_cast<std::size_t>(w.size()) != weight_count())
    throw Error(ErrorCode::DimensionMismatch, "weight vector length does not match the net");
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < W1.rows(); ++i)
    for (Eigen::Index j = 0; j < W1.cols(); ++j) W1(i, j) = w(k++);
  for (Eigen::Index j = 0; j < W2.size(); ++j) W2(j) = w(k++);
}

double MlpNet::forward_normalized(const Eigen::Ref<const Eigen::VectorXd>& z) const {
  const auto H = static_cast<Eigen::Index>(n_hidden);
  const auto n = static_cast<Eigen::Index>(n_in);
  double y = W2(H);
  for (Eigen::Index j = 0; j < H; ++j) {
    double a = W1(j, n);
    for (Eigen::Index k = 0; k < n; ++k) a += W1(j, k) * z(k);
    y += W2(j) * sigmoid(a);
  }
  return y;
}

Eigen::VectorXd MlpNet::forward_normalized_batch(const Eigen::MatrixXd& Z) const {
  const auto n = static_cast<Eigen::Index>(n_in);
  const auto H = static_cast<Eigen::Index>(n_hidden);
  Eigen::MatrixXd A = Z * W1.leftCols(n).transpose();
  A.rowwise() += W1.col(n).transpose();
  const Eigen::MatrixXd Hs = A.unaryExpr([](double a) { return sigmoid(a); });
  return (Hs * W2.head(H).transpose()).array() + W2(H);
}

void MlpNet::validate() const {
  if (n_hidden < 1) throw Error(ErrorCode::InvalidArgument, "net needs at least one hidden unit");
  if (n_in < 1) throw Error(ErrorCode::InvalidArgument, "net needs at least one input");
  const auto n = static_cast<Eigen::Index>(n_in);
  const auto H = static_cast<Eigen::Index>(n_hidden);
  if (W1.rows() != H || W1.cols() != n + 1 || W2.size() != H + 1 ||
      input_scale.center.size() != n || input_scale.half_range.size() != n ||
      target_scale.center.size() != 1 || target_scale.half_range.size() != 1)
    throw Error(ErrorCode::DimensionMismatch, "net arrays do not match n_in/n_hidden");
  if (!W1.allFinite() || !W2.allFinite()) throw Error(ErrorCode::InvalidArgument, "non-finite weights");
}

MlpNet make_net(std::size_t n_in, std::size_t n_hidden, std::uint64_t seed, double init_range) {
  if (n_in < 1 || n_hidden < 1) throw Error(ErrorCode::InvalidArgument, "net sizes must be >= 1");
  MlpNet net;
  net.n_in = n_in;
  net.n_hidden = n_hidden;
  net.W1.resize(static_cast<Eigen::Index>(n_hidden), static_cast<Eigen::Index>(n_in + 1));
  net.W2.resize(static_cast<Eigen::Index>(n_hidden + 1));
  Rng rng(seed);
  Eigen::VectorXd w(static_cast<Eigen::Index>(net.weight_count()));
  for (Eigen::Index k = 0; k < w.size(); ++k) w(k) = rng.uniform(-init_range, init_range);
  net.set_weights(w);
  net.input_scale = Scaler::identity(n_in);
  net.target_scale = Scaler::identity(1);
  return net;
}

double forward(const MlpNet& net, std::span<const double> x) {
  if (x.size() != net.n_in)
    throw Error(ErrorCode::DimensionMismatch,
                "expected " + std::to_string(net.n_in) + " inputs, got " + std::to_string(x.size()));
  Eigen::VectorXd z(static_cast<Eigen::Index>(x.size()));
  for (std::size_t k = 0; k < x.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    z(i) = (x[k] - net.input_scale.center(i)) / net.input_scale.half_range(i);
  }
  return net.forward_normalized(z) * net.target_scale.half_range(0) + net.target_scale.center(0);
}

Eigen::VectorXd forward(const MlpNet& net, const Eigen::MatrixXd& X) {
  if (static_cast<std::size_t>(X.cols()) != net.n_in)
    throw Error(ErrorCode::DimensionMismatch, "input column count does not match the net");
  const Eigen::VectorXd yn = net.forward_normalized_batch(net.input_scale.normalize(X));
  return (yn.array() * net.target_scale.half_range(0) + net.target_scale.center(0)).matrix();
}

Eigen::MatrixXd jacobian(const MlpNet& net, const Eigen::MatrixXd& Z) {
  const auto n = static_cast<Eigen::Index>(net.n_in);
  const auto H = static_cast<Eigen::Index>(net.n_hidden);
  const auto N = Z.rows();
  Eigen::MatrixXd A = Z * net.W1.leftCols(n).transpose();
  A.rowwise() += net.W1.col(n).transpose();
  const Eigen::MatrixXd Hs = A.unaryExpr([](double a) { return sigmoid(a); });

  Eigen::MatrixXd J(N, static_cast<Eigen::Index>(net.weight_count()));
  for (Eigen::Index j = 0; j < H; ++j) {
    // d yhat / d a_j = W2_j * s_j * (1 - s_j)
    const Eigen::ArrayXd g = net.W2(j) * Hs.col(j).array() * (1.0 - Hs.col(j).array());
    const Eigen::Index base = j * (n + 1);
    for (Eigen::Index k = 0; k < n; ++k) J.col(base + k) = (g * Z.col(k).array()).matrix();
    J.col(base + n) = g.matrix();
  }
  const Eigen::Index out = H * (n + 1);
  J.middleCols(out, H) = Hs;
  J.col(out + H).setOnes();
  return J;
}

void TrainConfig::validate() const {
  if (!(mu_dec > 0 && mu_dec < 1 && mu_inc > 1))
    throw Error(ErrorCode::InvalidArgument, "need 0 < mu_dec < 1 < mu_inc");
  if (!(mu0 > 0 && mu_max > mu0)) throw Error(ErrorCode::InvalidArgument, "need 0 < mu0 < mu_max");
  if (patience < 1) throw Error(ErrorCode::InvalidArgument, "patience must be >= 1");
  if (max_epochs < 1) throw Error(ErrorCode::InvalidArgument, "max_epochs must be >= 1");
  if (!(init_range > 0)) throw Error(ErrorCode::InvalidArgument, "init_range must be positive");
}

LmStep lm_step(const MlpNet& net, const Eigen::MatrixXd& Z, const Eigen::VectorXd& t, double mu,
               const TrainConfig& config) {
  if (Z.rows() == 0 || Z.rows() != t.size() || static_cast<std::size_t>(Z.cols()) != net.n_in)
    throw Error(ErrorCode::DimensionMismatch, "training rows do not match the net");
  return trial(net, build_system(net, Z, t), Z, t, mu, config);
}

Batch make_batch(const data::Dataset& data, const std::vector<std::string>& features,
                 std::string_view target) {
  Batch b;
  const auto n = static_cast<Eigen::Index>(data.size());
  b.X.resize(n, static_cast<Eigen::Index>(features.size()));
  b.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = data.rows[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < features.size(); ++j)
      b.X(i, static_cast<Eigen::Index>(j)) = data::value(row, features[j]);
    b.y(i) = data::value(row, target);
  }
  return b;
}

TrainResult train(std::size_t n_hidden, const Batch& train_set, const Batch& val_set,
                  const Batch& test_set, const TrainConfig& config) {
  config.validate();
  const auto n_in = static_cast<std::size_t>(train_set.X.cols());
  check_batch(train_set, n_in, "training");
  check_batch(val_set, n_in, "validation");
  check_batch(test_set, n_in, "test");

  MlpNet net = make_net(n_in, n_hidden, config.seed, config.init_range);
  net.input_scale = Scaler::fit(train_set.X);
  net.target_scale = Scaler::fit(train_set.y);

  const Eigen::MatrixXd Ztr = net.input_scale.normalize(train_set.X);
  const Eigen::VectorXd ttr = net.target_scale.normalize(train_set.y);
  const Eigen::MatrixXd Zval = net.input_scale.normalize(val_set.X);

  TrainResult res;
  res.hidden_size = n_hidden;
  double mu = config.mu0;
  auto record = [&](std::size_t epoch) {
    res.history.push_back({epoch, mse_original(net, Ztr, train_set.y), mse_original(net, Zval, val_set.y), mu});
    if (config.record_snapshots) res.snapshots.push_back(net);
  };
  record(0);
  MlpNet best = net;
  double best_val = res.history.back().val_mse;
  std::size_t worse = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const LmSystem sys = build_system(net, Ztr, ttr);
    bool accepted = false;
    while (mu <= config.mu_max) {
      LmStep step = trial(net, sys, Ztr, ttr, mu, config);
      mu = step.mu;
      if (step.accepted) {
        net = std::move(step.net);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (epoch == 1) throw Error(ErrorCode::NoProgress, "damping exceeded mu_max in the first epoch");
      break;  // no downhill step left
    }
    res.epochs_run = epoch;
    record(epoch);
    const double val = res.history.back().val_mse;
    if (val < best_val) {
      best_val = val;
      best = net;
      res.best_epoch = epoch;
      worse = 0;
    } else if (++worse >= config.patience) {
      break;
    }
  }

  res.net = best;
  res.train_mse = res.history[res.best_epoch].train_mse;
  res.val_mse = best_val;

  const Eigen::VectorXd pred = forward(best, test_set.X);
  const Eigen::ArrayXd err = (test_set.y - pred).array();
  res.mae = err.abs().mean();
  res.mse = err.square().mean();

  if (config.timing_passes > 0) {
    const Eigen::MatrixXd Zte = best.input_scale.normalize(test_set.X);
    const std::size_t rows = test_set.size();
    const std::size_t reps = (config.timing_passes + rows - 1) / rows;
    double sink = 0;
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t r = 0; r < reps; ++r)
      for (Eigen::Index i = 0; i < Zte.rows(); ++i) sink += best.forward_normalized(Zte.row(i).transpose());
    const auto t1 = std::chrono::steady_clock::now();
    volatile double keep = sink;
    (void)keep;
    res.infer_time = std::chrono::duration<double>(t1 - t0).count() / static_cast<double>(reps * rows);
  }
  return res;
}

void write_net(std::ostream& os, const MlpNet& net) {
  net.validate();
  os << "exfl-mlp 1\n" << net.n_in << ' ' << net.n_hidden << '\n';
  auto row = [&os](auto&& v) {
    for (Eigen::Index k = 0; k < v.size(); ++k) os << (k ? " " : "") << csv::fmt(v(k));
    os << '\n';
  };
  for (Eigen::Index i = 0; i < net.W1.rows(); ++i) row(net.W1.row(i));
  row(net.W2);
  row(net.input_scale.center);
  row(net.input_scale.half_range);
  row(net.target_scale.center);
  row(net.target_scale.half_range);
}

MlpNet read_net(std::istream& is) {
  std::string magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != "exfl-mlp" || version != 1)
    throw Error(ErrorCode::Parse, "not an exfl-mlp version 1 file");
  std::size_t n_in = 0, n_hidden = 0;
  if (!(is >> n_in >> n_hidden) || n_in < 1 || n_hidden < 1)
    throw Error(ErrorCode::Parse, "bad net dimensions");
  MlpNet net = make_net(n_in, n_hidden, 0);
  auto read = [&is](double& v) {
    std::string tok;
    if (!(is >> tok)) throw Error(ErrorCode::Parse, "truncated net file");
    v = csv::parse_double(tok);
  };
  for (Eigen::Index i = 0; i < net.W1.rows(); ++i)
    for (Eigen::Index j = 0; j < net.W1.cols(); ++j) read(net.W1(i, j));
  for (Eigen::Index j = 0; j < net.W2.size(); ++j) read(net.W2(j));
  for (auto* v : {&net.input_scale.center, &net.input_scale.half_range, &net.target_scale.center,
                  &net.target_scale.half_range})
    for (Eigen::Index j = 0; j < v->size(); ++j) read((*v)(j));
  net.validate();
  return net;
}

}  // namespace exfl::mlp
