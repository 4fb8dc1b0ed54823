#include "exfl/error.hpp"

namespace exfl {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::NoEquilibrium: return "NO_EQUILIBRIUM";
    case ErrorCode::NumericDivergence: return "NUMERIC_DIVERGENCE";
    case ErrorCode::UnstableScenario: return "UNSTABLE_SCENARIO";
    case ErrorCode::QrefUndefined: return "QREF_UNDEFINED";
    case ErrorCode::EmptyTrace: return "EMPTY_TRACE";
    case ErrorCode::InsufficientRows: return "INSUFFICIENT_ROWS";
    case ErrorCode::DegenerateSplit: return "DEGENERATE_SPLIT";
    case ErrorCode::ConstantSeries: return "CONSTANT_SERIES";
    case ErrorCode::LengthMismatch: return "LENGTH_MISMATCH";
    case ErrorCode::RankDeficient: return "RANK_DEFICIENT";
    case ErrorCode::NoFeatureQualifies: return "NO_FEATURE_QUALIFIES";
    case ErrorCode::DimensionMismatch: return "DIMENSION_MISMATCH";
    case ErrorCode::SingularSystem: return "SINGULAR_SYSTEM";
    case ErrorCode::NoProgress: return "NO_PROGRESS";
    case ErrorCode::SweepEmpty: return "SWEEP_EMPTY";
    case ErrorCode::Io: return "IO_ERROR";
    case ErrorCode::Parse: return "PARSE_ERROR";
  }
  return "UNKNOWN";
}

}  // namespace exfl
