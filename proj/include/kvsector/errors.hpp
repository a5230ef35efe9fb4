#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kvsector {

enum class Errc {
  NonSquare,
  NonFinite,
  NegativeOffDiagonal,
  RowSumNonzero,
  Reducible,
  PiMismatch,
  DimensionMismatch,
  NotMeanZero,
  KernelComponent,
  EigSolverFailure,
  SolveFailure,
  NotConverged,
  NotErgodic,
  GradingNotRespected,
  SingularLevelS,
  InvalidGrading,
  InvalidBounds,
  NotSkew,
  NotRateMatrix,
  HorizonTooShort,
  InvalidArgument,
  MissingGrading,
  ParseError,
};

std::string_view to_string(Errc code);

/// Exception carrying a machine-readable error kind.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace kvsector
