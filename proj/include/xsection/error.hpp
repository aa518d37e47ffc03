#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace xs {

enum class ErrorKind {
  MalformedHeader,
  DuplicateKey,
  EmptyPanel,
  MonthOutOfRange,
  EmptyCrossSection,
  MissingScaledMonth,
  InsufficientHistory,
  DimensionMismatch,
  LengthMismatch,
  StaleCache,
  ShapeMismatch,
  EmptyTrainingSet,
  InvalidConfig,
  EmptyData,
  TooFewExamples,
  NonFiniteFeature,
  ModelFitFailure,
  MonthKeyMismatch,
  EmptyIntersection,
  TooFewStocks,
  ZeroVariance,
  UniverseTooSmall,
  EmptyEvalList,
  TooFewMonths,
  ConfigTooSmall,
  MissingRunArtifacts,
  Io,
  Parse,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace xs
