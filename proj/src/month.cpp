#include "xsection/month.hpp"

#include <charconv>
#include <cstdio>

#include "xsection/error.hpp"

namespace xs {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedHeader: return "MalformedHeader";
    case ErrorKind::DuplicateKey: return "DuplicateKey";
    case ErrorKind::EmptyPanel: return "EmptyPanel";
    case ErrorKind::MonthOutOfRange: return "MonthOutOfRange";
    case ErrorKind::EmptyCrossSection: return "EmptyCrossSection";
    case ErrorKind::MissingScaledMonth: return "MissingScaledMonth";
    case ErrorKind::InsufficientHistory: return "InsufficientHistory";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::StaleCache: return "StaleCache";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::EmptyData: return "EmptyData";
    case ErrorKind::TooFewExamples: return "TooFewExamples";
    case ErrorKind::NonFiniteFeature: return "NonFiniteFeature";
    case ErrorKind::ModelFitFailure: return "ModelFitFailure";
    case ErrorKind::MonthKeyMismatch: return "MonthKeyMismatch";
    case ErrorKind::EmptyIntersection: return "EmptyIntersection";
    case ErrorKind::TooFewStocks: return "TooFewStocks";
    case ErrorKind::ZeroVariance: return "ZeroVariance";
    case ErrorKind::UniverseTooSmall: return "UniverseTooSmall";
    case ErrorKind::EmptyEvalList: return "EmptyEvalList";
    case ErrorKind::TooFewMonths: return "TooFewMonths";
    case ErrorKind::ConfigTooSmall: return "ConfigTooSmall";
    case ErrorKind::MissingRunArtifacts: return "MissingRunArtifacts";
    case ErrorKind::Io: return "Io";
    case ErrorKind::Parse: return "Parse";
  }
  return "Unknown";
}

MonthId MonthId::from_index(int index) {
  // floor division so negative indices stay consistent
  int year = index >= 0 ? index / 12 : -((-index + 11) / 12);
  return MonthId{year, index - year * 12 + 1};
}

MonthId MonthId::parse(std::string_view text) {
  int year = 0;
  int month = 0;
  bool ok = text.size() == 7 && text[4] == '-';
  if (ok) {
    auto [p1, e1] = std::from_chars(text.data(), text.data() + 4, year);
    auto [p2, e2] = std::from_chars(text.data() + 5, text.data() + 7, month);
    ok = e1 == std::errc{} && e2 == std::errc{} && p1 == text.data() + 4 &&
         p2 == text.data() + 7 && month >= 1 && month <= 12;
  }
  if (!ok) throw Error(ErrorKind::Parse, "bad month '" + std::string(text) + "', expected YYYY-MM");
  return MonthId{year, month};
}

std::string MonthId::to_string() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d", year, month);
  return buf;
}

}  // namespace xs
