#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "exfl/dataset.hpp"
#include "exfl/exec.hpp"
#include "exfl/stats.hpp"

namespace exfl::mlp {

/// Per-dimension affine map onto [-1, 1]: z = (x - center) / half_range.
struct Scaler {
  Eigen::VectorXd center;
  Eigen::VectorXd half_range;

  static Scaler identity(std::size_t dims);
  /// Fitted on the columns of X; a constant column gets half_range 1.
  static Scaler fit(const Eigen::MatrixXd& X);

  Eigen::MatrixXd normalize(const Eigen::MatrixXd& X) const;    // rows are samples
  Eigen::MatrixXd denormalize(const Eigen::MatrixXd& Z) const;
};

/// One sigmoid hidden layer, affine output. Bias weights sit in the last
/// column of W1 and the last entry of W2.
struct MlpNet {
  std::size_t n_in = 0;
  std::size_t n_hidden = 0;
  Eigen::MatrixXd W1;     // n_hidden x (n_in + 1)
  Eigen::RowVectorXd W2;  // 1 x (n_hidden + 1)
  Scaler input_scale;
  Scaler target_scale;    // one dimension

  std::size_t weight_count() const { return n_hidden * (n_in + 1) + n_hidden + 1; }
  /// W1 row-major, then W2.
  Eigen::VectorXd weights() const;
  void set_weights(const Eigen::VectorXd& w);

  /// Output in normalized target units for already normalized inputs.
  double forward_normalized(const Eigen::Ref<const Eigen::VectorXd>& z) const;
  Eigen::VectorXd forward_normalized_batch(const Eigen::MatrixXd& Z) const;

  void validate() const;
};

/// Uniform weights in [-init_range, init_range], identity scaling.
MlpNet make_net(std::size_t n_in, std::size_t n_hidden, std::uint64_t seed, double init_range = 0.5);

/// Prediction in original units; DIMENSION_MISMATCH on wrong input length.
double forward(const MlpNet& net, std::span<const double> x);
Eigen::VectorXd forward(const MlpNet& net, const Eigen::MatrixXd& X);

/// d(yhat_i)/d(w) in normalized target space; rows of Z are normalized inputs.
Eigen::MatrixXd jacobian(const MlpNet& net, const Eigen::MatrixXd& Z);

struct TrainConfig {
  std::size_t max_epochs = 200;
  double mu0 = 1e-3;
  double mu_dec = 0.1;
  double mu_inc = 10.0;
  double mu_max = 1e10;
  std::size_t patience = 6;
  std::uint64_t seed = 1;
  double init_range = 0.5;
  bool record_snapshots = false;
  std::size_t timing_passes = 10000;  // forward passes timed; 0 disables

  void validate() const;
};

struct LmStep {
  MlpNet net;
  double sse = 0;
  double mu = 0;
  bool accepted = false;
};

/// One damped Gauss-Newton trial on normalized data (Z, t).
LmStep lm_step(const MlpNet& net, const Eigen::MatrixXd& Z, const Eigen::VectorXd& t, double mu,
               const TrainConfig& config);

/// Feature matrix (original units) and target vector.
struct Batch {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;

  std::size_t size() const { return static_cast<std::size_t>(y.size()); }
};

Batch make_batch(const data::Dataset& data, const std::vector<std::string>& features,
                 std::string_view target = data::kTarget);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_mse = 0;  // original units
  double val_mse = 0;
  double mu = 0;
};

struct TrainResult {
  MlpNet net;  // minimum validation MSE snapshot
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  double train_mse = 0;
  double val_mse = 0;
  double mae = 0;  // test, original units
  double mse = 0;
  double infer_time = 0;  // seconds per forward pass
  std::size_t hidden_size = 0;
  std::size_t restart_index = 0;
  std::vector<EpochRecord> history;  // entry 0 is the initial net
  std::vector<MlpNet> snapshots;     // per history entry when recorded
};

TrainResult train(std::size_t n_hidden, const Batch& train_set, const Batch& val_set,
                  const Batch& test_set, const TrainConfig& config);

struct Splits {
  data::Dataset train;
  data::Dataset validation;
  data::Dataset test;
};

struct SweepCell {
  std::size_t hidden = 0;
  std::size_t restart = 0;
  bool ok = false;
  std::string status;  // "ok" or the error message
  TrainResult result;
};

struct SweepResult {
  std::string model_id;
  std::vector<SweepCell> cells;  // ordered by (hidden, restart)
  std::size_t best = 0;          // index into cells

  const TrainResult& best_result() const { return cells.at(best).result; }
  /// Minimum test MSE per hidden size over successful restarts.
  std::vector<std::pair<std::size_t, double>> error_curve() const;
};

struct SweepConfig {
  std::size_t h_min = 1;
  std::size_t h_max = 30;
  std::size_t restarts = 30;
  TrainConfig train;

  void validate() const;
};

SweepResult grow_sweep(const stats::ModelSpec& model, const Splits& splits, const SweepConfig& config,
                       Execution exec = Execution::Parallel);

struct ComparisonRow {
  std::string model_id;
  std::size_t hidden = 0;
  double ann_mae = 0;
  double ann_mse = 0;
  double infer_time = 0;
  double sr_mae = 0;
  double sr_mse = 0;
};

struct Comparison {
  std::vector<ComparisonRow> rows;
  std::vector<SweepResult> sweeps;
};

/// Sweeps every model and fits the matching regression on the training split;
/// both are scored on the same test rows.
Comparison compare_models(const std::vector<stats::ModelSpec>& models, const Splits& splits,
                          const SweepConfig& config, Execution exec = Execution::Parallel);

void write_net(std::ostream& os, const MlpNet& net);
MlpNet read_net(std::istream& is);

}  // namespace exfl::mlp
