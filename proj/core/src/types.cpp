#include "switchlq/types.hpp"

namespace switchlq {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonSquare: return "NonSquare";
    case ErrorCode::RowSumViolation: return "RowSumViolation";
    case ErrorCode::NegativeRate: return "NegativeRate";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::UnsupportedInput: return "UnsupportedInput";
    case ErrorCode::BadArgument: return "BadArgument";
    case ErrorCode::EigenFailure: return "EigenFailure";
    case ErrorCode::SingularOperator: return "SingularOperator";
    case ErrorCode::GainSingular: return "GainSingular";
    case ErrorCode::StepRejected: return "StepRejected";
    case ErrorCode::NotStabilizable: return "NotStabilizable";
    case ErrorCode::NotStabilizing: return "NotStabilizing";
    case ErrorCode::Stalled: return "Stalled";
    case ErrorCode::GridTooCoarse: return "GridTooCoarse";
    case ErrorCode::BlowUp: return "BlowUp";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::Verification: return "Verification";
  }
  return "Unknown";
}

}  // namespace switchlq
