#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace exfl {

enum class ErrorCode {
  InvalidArgument,
  // smib_simulator
  NoEquilibrium,
  NumericDivergence,
  UnstableScenario,
  // dataset
  QrefUndefined,
  EmptyTrace,
  InsufficientRows,
  DegenerateSplit,
  // filter_stats
  ConstantSeries,
  LengthMismatch,
  RankDeficient,
  NoFeatureQualifies,
  // mlp
  DimensionMismatch,
  SingularSystem,
  NoProgress,
  SweepEmpty,
  // io / pipeline
  Io,
  Parse,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a machine-checkable error code. The message is prefixed
/// with the code name, e.g. "RANK_DEFICIENT: ...".
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace exfl
