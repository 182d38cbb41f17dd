#include "pidres/error.hpp"

namespace pidres {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedPid: return "MalformedPid";
    case ErrorKind::InvalidRange: return "InvalidRange";
    case ErrorKind::DuplicateName: return "DuplicateName";
    case ErrorKind::BadNaan: return "BadNaan";
    case ErrorKind::InvariantViolation: return "InvariantViolation";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::EmptyFile: return "EmptyFile";
    case ErrorKind::RaggedRow: return "RaggedRow";
    case ErrorKind::DuplicateTimestamp: return "DuplicateTimestamp";
    case ErrorKind::NonIntegerTimestamp: return "NonIntegerTimestamp";
    case ErrorKind::DuplicateColumn: return "DuplicateColumn";
    case ErrorKind::UnknownSensor: return "UnknownSensor";
    case ErrorKind::UnknownMeasurement: return "UnknownMeasurement";
    case ErrorKind::EmptyColumn: return "EmptyColumn";
    case ErrorKind::DuplicateDataset: return "DuplicateDataset";
    case ErrorKind::LoadError: return "LoadError";
    case ErrorKind::NotFound: return "NotFound";
    case ErrorKind::UnknownNaan: return "UnknownNaan";
    case ErrorKind::InvalidTarget: return "InvalidTarget";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::TooFewRows: return "TooFewRows";
    case ErrorKind::PersistenceError: return "PersistenceError";
  }
  return "Unknown";
}

bool is_user_error(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::IoError:
    case ErrorKind::PersistenceError:
    case ErrorKind::InvariantViolation:
      return false;
    default:
      return true;
  }
}

}  // namespace pidres
