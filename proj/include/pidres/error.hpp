#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pidres {

enum class ErrorKind {
  // identifier grammar
  MalformedPid,
  InvalidRange,
  DuplicateName,
  BadNaan,
  InvariantViolation,
  // table loading and selection
  IoError,
  EmptyFile,
  RaggedRow,
  DuplicateTimestamp,
  NonIntegerTimestamp,
  DuplicateColumn,
  UnknownSensor,
  UnknownMeasurement,
  // statistics
  EmptyColumn,
  // catalog
  DuplicateDataset,
  LoadError,
  NotFound,
  // resolver
  UnknownNaan,
  InvalidTarget,
  InvalidArgument,
  TooFewRows,
  PersistenceError,
};

std::string_view to_string(ErrorKind kind);

/// Every failure the library reports carries one of the kinds above so that
/// front ends (HTTP status, CLI exit code) can classify it without parsing
/// messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// True for kinds caused by the caller's input rather than by the host.
bool is_user_error(ErrorKind kind);

}  // namespace pidres
