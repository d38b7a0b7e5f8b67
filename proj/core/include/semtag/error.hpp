#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace semtag {

enum class ErrorCode {
  // ternary_matrix
  OutOfRange,
  MissingInFeatureBlock,
  DuplicateCoordinate,
  FillOutOfRange,
  // catalog
  MalformedLine,
  DuplicateDatasetId,
  UnknownToken,
  TooFewItems,
  DegenerateFit,
  // factorization
  RankDeficient,
  NoConvergence,
  SingularGauge,
  KMismatch,
  IllConditionedTagBlock,
  InvalidRank,
  ShapeMismatch,
  // glrm
  InvalidConfig,
  EmptyObservedSet,
  AnchorOutOfTagBlock,
  Diverged,
  // inference
  TopicOutOfRange,
  InvalidArgument,
  // persistence
  ParseError,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries a code so callers (and the CLI)
/// can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace semtag
